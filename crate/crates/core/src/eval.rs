//! Support-recovery metrics and scale-aligned errors.

use serde::{Deserialize, Serialize};

use crate::graph::Matrix;

/// Default support threshold: `1e-6` of the largest absolute entry.
pub fn default_threshold(m: &Matrix) -> f64 {
    1e-6 * m.amax()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl Prf {
    fn from_counts(tp: usize, fp: usize, fneg: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fneg);
        let f_score = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Self { precision, recall, f_score, true_positives: tp, false_positives: fp, false_negatives: fneg }
    }
}

fn prf_over(hat: &Matrix, truth: &Matrix, threshold: f64, pairs: impl Iterator<Item = (usize, usize)>) -> Prf {
    assert_eq!(hat.shape(), truth.shape(), "edge_prf: shape mismatch");
    let (mut tp, mut fp, mut fneg) = (0, 0, 0);
    for (i, j) in pairs {
        match (hat[(i, j)].abs() > threshold, truth[(i, j)] != 0.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    Prf::from_counts(tp, fp, fneg)
}

/// Precision, recall and F-score of the support `{|hat_ij| > threshold}`
/// over unordered pairs `i < j`.
pub fn edge_prf(hat: &Matrix, truth: &Matrix, threshold: f64) -> Prf {
    let n = hat.nrows();
    prf_over(hat, truth, threshold, (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j))))
}

/// As [`edge_prf`] over ordered pairs `i != j`, for directed graphs.
pub fn edge_prf_directed(hat: &Matrix, truth: &Matrix, threshold: f64) -> Prf {
    let n = hat.nrows();
    prf_over(hat, truth, threshold, (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))))
}

/// Fraction of the true edges found among the `k` pairs with the largest
/// `|hat_ij|`, for each `k` in `ks`. Ties are broken lexicographically.
pub fn topk_recovery_curve(hat: &Matrix, truth: &Matrix, ks: &[usize]) -> Vec<(usize, f64)> {
    let n = hat.nrows();
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    // stable sort keeps lexicographic order among equal weights
    pairs.sort_by(|a, b| hat[*b].abs().total_cmp(&hat[*a].abs()));
    let total = pairs.iter().filter(|&&p| truth[p] != 0.0).count();
    let mut hits = Vec::with_capacity(pairs.len() + 1);
    hits.push(0usize);
    for &p in &pairs {
        hits.push(hits.last().unwrap() + usize::from(truth[p] != 0.0));
    }
    ks.iter()
        .map(|&k| {
            let found = hits[k.min(pairs.len())];
            (k, if total == 0 { 0.0 } else { found as f64 / total as f64 })
        })
        .collect()
}

/// Optimal scalar `c = tr(hat^T truth) / ||hat||_F^2`; zero for `hat = 0`.
pub fn align_scale(hat: &Matrix, truth: &Matrix) -> f64 {
    let denom = hat.norm_squared();
    if denom == 0.0 {
        0.0
    } else {
        hat.dot(truth) / denom
    }
}

/// `min_c ||c hat - truth||_F / ||truth||_F`; 1 when `hat = 0`.
pub fn scale_aligned_error(hat: &Matrix, truth: &Matrix) -> f64 {
    let tn = truth.norm();
    if hat.norm_squared() == 0.0 || tn == 0.0 {
        return 1.0;
    }
    (hat * align_scale(hat, truth) - truth).norm() / tn
}

/// Largest absolute entry of `c hat - truth` at the optimal scale `c`.
pub fn scale_aligned_max_error(hat: &Matrix, truth: &Matrix) -> f64 {
    (hat * align_scale(hat, truth) - truth).amax()
}

/// Summary written by the `eval` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub threshold: f64,
    pub scale_aligned_error: f64,
    pub topk: Vec<(usize, f64)>,
}

impl EvalReport {
    /// Directed graphs are scored over ordered pairs.
    pub fn compute(hat: &Matrix, truth: &Matrix, threshold: Option<f64>, ks: &[usize], directed: bool) -> Self {
        let threshold = threshold.unwrap_or_else(|| default_threshold(hat));
        let prf = if directed { edge_prf_directed(hat, truth, threshold) } else { edge_prf(hat, truth, threshold) };
        Self {
            precision: prf.precision,
            recall: prf.recall,
            f_score: prf.f_score,
            threshold,
            scale_aligned_error: scale_aligned_error(hat, truth),
            topk: topk_recovery_curve(hat, truth, ks),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn path4() -> Matrix {
        Matrix::from_row_slice(4, 4, &[
            0.0, 1.0, 0.0, 0.0, //
            1.0, 0.0, 1.0, 0.0, //
            0.0, 1.0, 0.0, 1.0, //
            0.0, 0.0, 1.0, 0.0,
        ])
    }

    #[test]
    fn prf_counting() {
        let t = path4();
        let p = edge_prf(&t, &t, 0.0);
        assert_eq!((p.precision, p.recall, p.f_score), (1.0, 1.0, 1.0));
        let p = edge_prf(&Matrix::zeros(4, 4), &t, 0.0);
        assert_eq!((p.recall, p.f_score), (0.0, 0.0));
        let complete = Matrix::from_fn(4, 4, |i, j| if i == j { 0.0 } else { 1.0 });
        let p = edge_prf(&complete, &t, 0.0);
        assert_abs_diff_eq!(p.precision, 3.0 / 6.0);
        assert_eq!(p.recall, 1.0);
    }

    #[test]
    fn topk_orderings() {
        let t = path4();
        let curve = topk_recovery_curve(&t, &t, &[1, 2, 3, 6]);
        assert_eq!(curve, vec![(1, 1.0 / 3.0), (2, 2.0 / 3.0), (3, 1.0), (6, 1.0)]);
        let reversed = Matrix::from_fn(4, 4, |i, j| if i == j { 0.0 } else { 2.0 - t[(i, j)] });
        let curve = topk_recovery_curve(&reversed, &t, &[1, 2, 3, 4, 5, 6]);
        assert_eq!(curve[2].1, 0.0);
        assert!(curve[3].1 > 0.0);
    }

    #[test]
    fn scale_alignment() {
        let t = path4();
        assert_abs_diff_eq!(scale_aligned_error(&(&t * 2.0), &t), 0.0, epsilon = 1e-15);
        let orth = Matrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.0 });
        assert_eq!(scale_aligned_error(&orth, &t), 1.0);
        assert_eq!(scale_aligned_error(&Matrix::zeros(4, 4), &t), 1.0);
    }
}
