use approx::assert_abs_diff_eq;
use rand::Rng;
use topolearn::graph::{laplacian_from_weights, Matrix, ShiftKind, ShiftOperator, SignalSet};
use topolearn::simulate::{gen_er_graph, gen_smooth, standard_normal, RngSpec, WeightDist};
use topolearn::smoothlearn::*;
use topolearn::solvers::SolverConfig;

fn f_score(est: &Matrix, truth: &Matrix, thr: f64) -> f64 {
    let n = est.nrows();
    let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            match (est[(i, j)].abs() > thr, truth[(i, j)] != 0.0) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fneg += 1.0,
                _ => {}
            }
        }
    }
    2.0 * tp / (2.0 * tp + fp + fneg)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

fn random_weights(n: usize, rng: &mut impl Rng) -> Matrix {
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < 0.5 {
                w[(i, j)] = rng.random::<f64>() * 2.0;
                w[(j, i)] = w[(i, j)];
            }
        }
    }
    w
}

#[test]
fn smoothness_is_weighted_distance() {
    let mut rng = RngSpec::new(1).rng();
    for trial in 0..50 {
        let n = 2 + trial % 7;
        let w = random_weights(n, &mut rng);
        let l = laplacian_from_weights(&w);
        let x = standard_normal(n, 1 + trial % 5, &mut rng);
        let tv = (x.transpose() * &l * &x).trace();
        let z = distance_matrix(&SignalSet::new(x).unwrap());
        let rhs = 0.5 * w.component_mul(z.matrix()).sum();
        assert!((tv - rhs).abs() <= 1e-8 * tv.abs().max(1e-300), "{tv} vs {rhs}");
    }
}

/// Oracle: all K-subsets of pairs, scored by tr(X^T L X).
fn brute_force_best(x: &Matrix, k: usize) -> f64 {
    let n = x.nrows();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let m = pairs.len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << m) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let mut w = Matrix::zeros(n, n);
        for (b, &(i, j)) in pairs.iter().enumerate() {
            if mask >> b & 1 == 1 {
                w[(i, j)] = 1.0;
                w[(j, i)] = 1.0;
            }
        }
        let l = laplacian_from_weights(&w);
        best = best.min((x.transpose() * l * x).trace());
    }
    best
}

#[test]
fn edge_select_is_exact() {
    let mut rng = RngSpec::new(2).rng();
    for n in 3..=6 {
        let m = n * (n - 1) / 2;
        for k in [1, 2, m / 2, m - 1] {
            let x = standard_normal(n, 3, &mut rng);
            let sel = edge_select(&SignalSet::new(x.clone()).unwrap(), k).unwrap();
            assert_eq!(sel.edges.len(), k);
            let l = laplacian_from_weights(sel.adjacency(n).matrix());
            let ours = (x.transpose() * l * &x).trace();
            assert!(ours <= brute_force_best(&x, k) + 1e-9);
        }
    }
}

#[test]
fn kalofolias_degrees_positive_and_beta_zero_sparsest() {
    let mut rng = RngSpec::new(3).rng();
    let cfg = SolverConfig::default().with_max_iters(20000);
    for _ in 0..20 {
        let x = standard_normal(7, 4, &mut rng);
        let z = distance_matrix(&SignalSet::new(x).unwrap());
        let count = |beta: f64| {
            let (w, _) = kalofolias_learn(&z, 1.0, beta, &cfg).unwrap();
            for i in 0..7 {
                assert!(w.matrix().row(i).sum() > 0.0);
            }
            w.edges(1e-9).len()
        };
        let sparsest = count(0.0);
        for beta in [0.1, 1.0, 10.0] {
            assert!(sparsest <= count(beta));
        }
    }
}

#[test]
fn kalofolias_two_clusters() {
    // two tight clusters of 4 vertices, far apart
    let mut rng = RngSpec::new(4).rng();
    let mut x = standard_normal(8, 10, &mut rng) * 0.05;
    for i in 4..8 {
        for p in 0..10 {
            x[(i, p)] += 5.0;
        }
    }
    let z = distance_matrix(&SignalSet::new(x).unwrap());
    let (w, _) = kalofolias_learn(&z, 1.0, 0.5, &SolverConfig::default().with_max_iters(20000)).unwrap();
    let mut intra = 0.0;
    let mut total = 0.0;
    for (i, j, v) in w.edges(0.0) {
        total += v;
        if (i < 4) == (j < 4) {
            intra += v;
        }
    }
    assert!(intra >= 0.9 * total, "{intra} of {total}");
}

#[test]
fn dong_limits() {
    let mut rng = RngSpec::new(5).rng();
    let x = SignalSet::new(standard_normal(5, 20, &mut rng)).unwrap();
    let fit = dong_learn(&x, 1e-9, 1.0, &SolverConfig::default()).unwrap();
    assert_abs_diff_eq!(fit.y, x.data().clone(), epsilon = 1e-6);

    let constant = SignalSet::new(Matrix::from_fn(4, 6, |_, p| p as f64 - 2.0)).unwrap();
    let fit = dong_learn(&constant, 2.0, 1.0, &SolverConfig::default()).unwrap();
    assert_abs_diff_eq!(fit.y, constant.data().clone(), epsilon = 1e-10);
}

#[test]
fn dong_trace_and_monotone_objective() {
    let mut rng = RngSpec::new(6).rng();
    let a = gen_er_graph(8, 0.4, WeightDist::default(), true, &mut rng).unwrap();
    let x = gen_smooth(&a.laplacian().unwrap(), 100, 0.01, &mut rng).unwrap();
    let fit = dong_learn(&x, 0.05, 1.0, &SolverConfig::default()).unwrap();
    assert_eq!(fit.laplacian.kind(), ShiftKind::Laplacian);
    assert_abs_diff_eq!(fit.laplacian.matrix().trace(), 8.0, epsilon = 1e-6);
    let obj = &fit.trace.objective;
    for k in 1..obj.len() {
        assert!(obj[k] <= obj[k - 1] * (1.0 + 1e-6), "sweep {k}: {} -> {}", obj[k - 1], obj[k]);
    }
}

#[test]
fn dong_recovers_smooth_graphs() {
    let cfg = SolverConfig::default();
    let scores: Vec<f64> = (0..20)
        .map(|seed| {
            let mut rng = RngSpec::new(seed).rng();
            let a = gen_er_graph(10, 0.3, WeightDist::default(), true, &mut rng).unwrap();
            let x = gen_smooth(&a.laplacian().unwrap(), 500, 0.0, &mut rng).unwrap();
            let fit = dong_learn(&x, 0.01, 1.0, &cfg).unwrap();
            let w = -fit.laplacian.matrix().map(|v| v.min(0.0));
            f_score(&w, a.matrix(), 1e-3 * w.amax())
        })
        .collect();
    let med = median(scores);
    assert!(med >= 0.75, "median F {med}");
}

fn spanning_tree(n: usize, rng: &mut impl Rng) -> ShiftOperator {
    let mut w = Matrix::zeros(n, n);
    for v in 1..n {
        let u = rng.random_range(0..v);
        w[(u, v)] = 1.0;
        w[(v, u)] = 1.0;
    }
    ShiftOperator::new(w, ShiftKind::Adjacency, false).unwrap()
}

#[test]
fn noisy_selection_matches_noiseless_start_and_limits() {
    let mut rng = RngSpec::new(7).rng();
    let a = spanning_tree(6, &mut rng);
    let x = gen_smooth(&a.laplacian().unwrap(), 50, 0.0, &mut rng).unwrap();
    let plain = edge_select(&x, 5).unwrap();
    let noisy = edge_select_noisy(&x, 5, 1e-9).unwrap();
    assert_eq!(plain.edges, noisy.selection.edges);
    assert_abs_diff_eq!(noisy.y, x.data().clone(), epsilon = 1e-6);
    let obj = &edge_select_noisy(&x, 5, 1.0).unwrap().trace.objective;
    for k in 1..obj.len() {
        assert!(obj[k] <= obj[k - 1] + 1e-9);
    }
}

#[test]
fn noisy_selection_recovers_trees() {
    let scores: Vec<f64> = (0..20)
        .map(|seed| {
            let mut rng = RngSpec::new(100 + seed).rng();
            let a = spanning_tree(6, &mut rng);
            let x = gen_smooth(&a.laplacian().unwrap(), 200, 0.01, &mut rng).unwrap();
            let fit = edge_select_noisy(&x, 5, 1.0).unwrap();
            f_score(fit.selection.adjacency(6).matrix(), a.matrix(), 0.0)
        })
        .collect();
    let med = median(scores);
    assert!(med >= 0.8, "median F {med}");
}
