use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};
use topolearn::eval::EvalReport;
use topolearn::graph::{
    bandlimit_reconstruct, eigendecompose, gft, graph_psd, igft, total_variation, CoefficientOrder, FilterSpec,
    Matrix, ShiftKind, ShiftOperator, SignalSet, DEFAULT_PSD_THRESHOLD,
};
use topolearn::io::{read_graph, read_json, read_matrix, write_graph, write_json, write_matrix_csv, GraphFile};
use topolearn::netdyn::{dynamic_sem_track, sem_fit, svarm_fit, CascadeData};
use topolearn::simulate::{
    gen_diffusion, gen_er_graph, gen_sem, gen_smooth, sample_gmrf, spectral_radius,
    standard_normal, InputCov, RngSpec, WeightDist,
};
use topolearn::smoothlearn::{distance_matrix, dong_learn, edge_select, edge_select_noisy, kalofolias_learn};
use topolearn::solvers::{ScaleRule, ShiftConstraintSet, ShiftObjective, SolveTrace, SolverConfig};
use topolearn::spectral_id::{
    covariance_eigenbasis, default_eps, estimate_eigenbasis, infer_shift, infer_shift_partial, network_deconvolve,
    psd_filter_ls, psd_filter_recover, sym_filter_select,
};
use topolearn::statnet::{
    correlation_network, graphical_lasso, laplacian_gmrf, neighborhood_lasso, partial_correlation_network,
    sample_covariance, CombineRule,
};
use topolearn::Error;

use crate::args::*;
use crate::CliError;

type CliResult<T> = std::result::Result<T, CliError>;

struct Ctx {
    config: SolverConfig,
    rng: RngSpec,
    header: bool,
}

pub fn run(cli: Cli) -> CliResult<()> {
    let mut config = match &cli.config {
        Some(p) => read_json::<SolverConfig>(p)?,
        None => SolverConfig::default(),
    };
    config.validate()?;
    config.seed = cli.seed;
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be >= 1".into()));
        }
        config.parallel = jobs > 1;
        // a pool may already exist when run from tests; the setting is advisory
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let ctx = Ctx { config, rng: RngSpec::new(cli.seed), header: cli.header };
    match cli.command {
        Command::Simulate(a) => simulate(&ctx, &a),
        Command::Learn(a) => learn(&ctx, &a),
        Command::Eval(a) => eval(&ctx, &a),
        Command::Spectrum(a) => spectrum(&ctx, &a),
    }
}

fn emit_matrix(ctx: &Ctx, path: Option<&Path>, m: &Matrix) -> CliResult<()> {
    match path {
        Some(p) => write_matrix_csv(BufWriter::new(File::create(p).map_err(Error::from)?), m, ctx.header)?,
        None => write_matrix_csv(std::io::stdout().lock(), m, ctx.header)?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    match path {
        Some(p) => write_json(p, value)?,
        None => {
            let mut out = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, value).map_err(Error::from)?;
            writeln!(out).map_err(Error::from)?;
        }
    }
    Ok(())
}

fn emit_graph(path: Option<&Path>, s: &ShiftOperator) -> CliResult<()> {
    match path {
        Some(p) => write_graph(p, s)?,
        None => emit_json(None, &GraphFile::from_shift(s))?,
    }
    Ok(())
}

fn parse_weights(spec: &str) -> CliResult<WeightDist> {
    let bad = || CliError::Usage(format!("bad --weights '{spec}', expected uniform:LO,HI or constant:W"));
    let (kind, rest) = spec.split_once(':').ok_or_else(bad)?;
    let nums: Vec<f64> = rest.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<CliResult<_>>()?;
    match (kind, nums.as_slice()) {
        ("uniform", [lo, hi]) => Ok(WeightDist::Uniform { lo: *lo, hi: *hi }),
        ("constant", [w]) => Ok(WeightDist::Constant { value: *w }),
        _ => Err(bad()),
    }
}

fn simulate(ctx: &Ctx, a: &SimulateArgs) -> CliResult<()> {
    let mut rng = ctx.rng.rng();
    let weights = parse_weights(&a.weights)?;
    let g = gen_er_graph(a.n, a.edge_prob, weights, true, &mut rng)?;
    let (graph, signals, inputs): (ShiftOperator, Option<Matrix>, Option<Matrix>) = match a.model {
        SimModel::Er => (g, None, None),
        SimModel::Gmrf => {
            let theta = g.laplacian()?.matrix() + Matrix::identity(a.n, a.n) * 0.5;
            let x = sample_gmrf(&theta, a.p, &mut rng)?;
            (ShiftOperator::new(theta, ShiftKind::Precision, false)?, Some(x.into_data()), None)
        }
        SimModel::Diffusion => {
            // normalized so the filter taps act on comparable scales
            let rho = spectral_radius(g.matrix());
            let s = ShiftOperator::new(g.matrix() / rho, ShiftKind::Adjacency, false)?;
            let h = FilterSpec::new(a.filter.clone())?;
            let x = gen_diffusion(&s, &h, a.p, &InputCov::White, &mut rng)?;
            (s, Some(x.into_data()), None)
        }
        SimModel::Smooth => {
            let l = g.laplacian()?;
            let x = gen_smooth(&l, a.p, a.noise, &mut rng)?;
            (l, Some(x.into_data()), None)
        }
        SimModel::Sem => {
            let mut w = g.matrix().clone();
            for i in 0..a.n {
                for j in (i + 1)..a.n {
                    if w[(i, j)] != 0.0 {
                        // keep one direction per edge
                        if rand::Rng::random::<bool>(&mut rng) {
                            w[(i, j)] = 0.0;
                        } else {
                            w[(j, i)] = 0.0;
                        }
                    }
                }
            }
            let rho = spectral_radius(&w);
            if rho > 0.5 {
                w *= 0.5 / rho;
            }
            let w = ShiftOperator::new(w, ShiftKind::Generic, true)?;
            let u = standard_normal(a.n, a.p, &mut rng);
            let x = gen_sem(&w, &nalgebra::DVector::from_element(a.n, 1.0), &u, a.noise, &mut rng)?;
            (w, Some(x.into_data()), Some(u))
        }
    };
    match signals {
        Some(x) => {
            emit_matrix(ctx, a.output.as_deref(), &x)?;
            if let Some(p) = &a.graph_out {
                write_graph(p, &graph)?;
            }
        }
        None => emit_graph(a.output.as_deref().or(a.graph_out.as_deref()), &graph)?,
    }
    if let (Some(u), Some(p)) = (inputs, &a.inputs_out) {
        emit_matrix(ctx, Some(p), &u)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct LearnReport {
    method: String,
    converged: bool,
    iterations: usize,
    final_objective: Option<f64>,
    details: Value,
}

impl LearnReport {
    fn new(method: Method, trace: Option<&SolveTrace>, details: Value) -> Self {
        let name = clap::ValueEnum::to_possible_value(&method).map(|v| v.get_name().to_string()).unwrap_or_default();
        Self {
            method: name,
            converged: trace.is_none_or(|t| t.converged),
            iterations: trace.map_or(0, |t| t.iters_used),
            final_objective: trace.and_then(SolveTrace::final_objective),
            details,
        }
    }
}

fn merged(traces: &[SolveTrace]) -> SolveTrace {
    SolveTrace {
        converged: traces.iter().all(|t| t.converged),
        iters_used: traces.iter().map(|t| t.iters_used).sum(),
        ..Default::default()
    }
}

fn load(ctx: &Ctx, path: &Path) -> CliResult<Matrix> {
    Ok(read_matrix(path, ctx.header)?)
}

fn single_input(a: &LearnArgs) -> CliResult<&PathBuf> {
    match a.inputs.as_slice() {
        [one] => Ok(one),
        _ => Err(CliError::Usage(format!("this method takes exactly one -i, got {}", a.inputs.len()))),
    }
}

fn signals(ctx: &Ctx, a: &LearnArgs) -> CliResult<SignalSet> {
    if a.covariance {
        return Err(CliError::Usage("this method needs signals, not a covariance".into()));
    }
    Ok(SignalSet::new(load(ctx, single_input(a)?)?)?)
}

fn covariance(ctx: &Ctx, a: &LearnArgs) -> CliResult<(Matrix, Option<usize>)> {
    let m = load(ctx, single_input(a)?)?;
    if a.covariance {
        Ok((m, None))
    } else {
        let x = SignalSet::new(m)?;
        Ok((sample_covariance(&x, true)?, Some(x.p())))
    }
}

fn lambda(a: &LearnArgs, n: usize, p: Option<usize>, default: f64) -> CliResult<f64> {
    match a.lambda.as_deref() {
        None => Ok(default),
        Some("auto") => {
            let p = p.ok_or_else(|| CliError::Usage("--lambda auto needs signals to know the sample count".into()))?;
            Ok(2.0 * ((n as f64).ln() / p as f64).sqrt())
        }
        Some(v) => v.parse().map_err(|_| CliError::Usage(format!("bad --lambda '{v}'"))),
    }
}

fn constraint_set(a: &LearnArgs) -> ShiftConstraintSet {
    match a.set {
        SetKind::Adjacency => ShiftConstraintSet::adjacency(match a.scale {
            Scale::FirstNode => ScaleRule::FirstNodeDegreeOne,
            Scale::TotalWeight => ScaleRule::TotalWeightN,
        }),
        SetKind::Laplacian => ShiftConstraintSet::laplacian(),
    }
}

fn set_kind(a: &LearnArgs) -> ShiftKind {
    match a.set {
        SetKind::Adjacency => ShiftKind::Adjacency,
        SetKind::Laplacian => ShiftKind::Laplacian,
    }
}

fn objective(a: &LearnArgs) -> ShiftObjective {
    match a.objective {
        Objective::L1 => ShiftObjective::L1,
        Objective::Frobenius => ShiftObjective::Frobenius,
        Objective::Linf => ShiftObjective::Linf,
    }
}

fn rule(a: &LearnArgs) -> CombineRule {
    match a.rule {
        Rule::Or => CombineRule::Or,
        Rule::And => CombineRule::And,
    }
}

fn need<T>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("missing {flag}")))
}

/// Covariance pairs for the filter methods, with sample-count weights when
/// signals are given.
fn filter_pairs(ctx: &Ctx, a: &LearnArgs) -> CliResult<(Vec<Matrix>, Vec<Matrix>, Option<Vec<f64>>)> {
    if a.input_cov.len() != a.inputs.len() {
        return Err(CliError::Usage(format!(
            "need one --input-cov per -i ({} vs {})",
            a.input_cov.len(),
            a.inputs.len()
        )));
    }
    let mut sx = Vec::new();
    let mut counts = Vec::new();
    for p in &a.inputs {
        let m = load(ctx, p)?;
        if a.covariance {
            sx.push(m);
        } else {
            let x = SignalSet::new(m)?;
            counts.push(x.p() as f64);
            sx.push(sample_covariance(&x, false)?);
        }
    }
    let sw = a.input_cov.iter().map(|p| load(ctx, p)).collect::<CliResult<Vec<_>>>()?;
    let weights = (!a.covariance).then(|| {
        let total: f64 = counts.iter().sum();
        counts.iter().map(|c| c / total).collect()
    });
    Ok((sx, sw, weights))
}

fn learn(ctx: &Ctx, a: &LearnArgs) -> CliResult<()> {
    let cfg = &ctx.config;
    let out = a.output.as_deref();
    let report = match a.method {
        Method::Corr | Method::Pcorr => {
            let x = signals(ctx, a)?;
            let (table, g) = match a.method {
                Method::Corr => correlation_network(&x, a.q)?,
                _ => partial_correlation_network(&x, a.q, a.ridge)?,
            };
            emit_graph(out, &g)?;
            LearnReport::new(a.method, None, serde_json::to_value(&table).map_err(Error::from)?)
        }
        Method::Glasso => {
            let (cov, p) = covariance(ctx, a)?;
            let lam = lambda(a, cov.nrows(), p, 0.1)?;
            let (theta, trace) = graphical_lasso(&cov, lam, false, cfg)?;
            let theta = (&theta + theta.transpose()) * 0.5;
            emit_graph(out, &ShiftOperator::new(theta, ShiftKind::Precision, false)?)?;
            LearnReport::new(a.method, Some(&trace), json!({ "lambda": lam }))
        }
        Method::Lgmrf => {
            let (cov, p) = covariance(ctx, a)?;
            let lam = lambda(a, cov.nrows(), p, 0.1)?;
            let fit = laplacian_gmrf(&cov, lam, cfg)?;
            emit_graph(out, &fit.laplacian)?;
            LearnReport::new(a.method, Some(&fit.trace), json!({ "lambda": lam, "gamma": fit.gamma }))
        }
        Method::Nlasso => {
            let x = signals(ctx, a)?;
            let lam = lambda(a, x.n(), Some(x.p()), 0.1)?;
            let fit = neighborhood_lasso(&x, lam, rule(a), cfg)?;
            emit_graph(out, &fit.adjacency)?;
            LearnReport::new(a.method, Some(&merged(&fit.traces)), json!({ "lambda": lam }))
        }
        Method::Dong => {
            let x = signals(ctx, a)?;
            let (alpha, beta) = (a.alpha.unwrap_or(0.01), a.beta.unwrap_or(1.0));
            let fit = dong_learn(&x, alpha, beta, cfg)?;
            emit_graph(out, &fit.laplacian)?;
            LearnReport::new(a.method, Some(&fit.trace), json!({ "alpha": alpha, "beta": beta }))
        }
        Method::Kalofolias => {
            let x = signals(ctx, a)?;
            let (alpha, beta) = (a.alpha.unwrap_or(1.0), a.beta.unwrap_or(0.5));
            let (g, trace) = kalofolias_learn(&distance_matrix(&x), alpha, beta, cfg)?;
            emit_graph(out, &g)?;
            LearnReport::new(a.method, Some(&trace), json!({ "alpha": alpha, "beta": beta }))
        }
        Method::EdgeSelect => {
            let x = signals(ctx, a)?;
            let k = need(a.k, "--k")?;
            let (sel, trace) = if a.noisy {
                let fit = edge_select_noisy(&x, k, a.alpha.unwrap_or(1.0))?;
                (fit.selection, Some(fit.trace))
            } else {
                (edge_select(&x, k)?, None)
            };
            emit_graph(out, &sel.adjacency(x.n()))?;
            LearnReport::new(a.method, trace.as_ref(), json!({ "edges": sel.edges }))
        }
        Method::Spectral | Method::SpectralPartial => {
            let m = load(ctx, single_input(a)?)?;
            let basis = if a.covariance { covariance_eigenbasis(&m)? } else { estimate_eigenbasis(&SignalSet::new(m)?)? };
            let set = constraint_set(a);
            let (s, trace, details) = if a.method == Method::Spectral {
                let eps = match a.eps {
                    Some(e) => e,
                    None if a.covariance => 0.0,
                    None => default_eps(&basis, &set, a.eps_factor, cfg)?,
                };
                let est = infer_shift(&basis, &set, eps, objective(a), cfg)?;
                let d = json!({ "eps": eps, "known_modes": est.known_modes, "degenerate": basis.is_degenerate() });
                (est.s, est.trace, d)
            } else {
                let n = basis.n();
                let k = need(a.k, "--k")?;
                if k > n {
                    return Err(CliError::Usage(format!("--k {k} exceeds the {n} available eigenvectors")));
                }
                // leading eigenvectors: eigenvalues are ascending
                let vk = basis.vecs.columns(n - k, k).into_owned();
                let (s, trace) = infer_shift_partial(&vk, &set, cfg)?;
                (s, trace, json!({ "k": k }))
            };
            emit_graph(out, &ShiftOperator::from_estimate(s, set_kind(a))?)?;
            LearnReport::new(a.method, Some(&trace), details)
        }
        Method::Deconv => {
            let t = load(ctx, single_input(a)?)?;
            let set = constraint_set(a);
            let est = network_deconvolve(&t, &set, a.eps.unwrap_or(0.0), cfg)?;
            emit_graph(out, &ShiftOperator::from_estimate(est.s, set_kind(a))?)?;
            LearnReport::new(a.method, Some(&est.trace), json!({ "known_modes": est.known_modes }))
        }
        Method::PsdFilter => {
            let (sx, sw, weights) = filter_pairs(ctx, a)?;
            let (est, trace) = if sx.len() == 1 {
                (psd_filter_recover(&sx[0], &sw[0])?, None)
            } else {
                let (est, trace) = psd_filter_ls(&sx, &sw, weights.as_deref(), cfg)?;
                (est, Some(trace))
            };
            emit_matrix(ctx, out, &est.h)?;
            LearnReport::new(a.method, trace.as_ref(), json!({ "psd": est.psd, "weights": weights }))
        }
        Method::SymFilter => {
            let (sx, sw, _) = filter_pairs(ctx, a)?;
            let sel = sym_filter_select(&sx, &sw, cfg)?;
            emit_matrix(ctx, out, &sel.estimate.h)?;
            LearnReport::new(
                a.method,
                None,
                json!({
                    "signs": sel.signs,
                    "residual": sel.residual,
                    "tied": sel.tied,
                    "ambiguous": sel.ambiguous,
                }),
            )
        }
        Method::Sem | Method::Dsem => {
            let x = load(ctx, single_input(a)?)?;
            let u = load(ctx, need(a.exo.as_ref(), "--exo")?)?;
            let data = epochs(&x, &u, a.cascades)?;
            let alpha = a.alpha.unwrap_or(1.0);
            if a.method == Method::Sem {
                let fit = sem_fit(&data, alpha, cfg)?;
                emit_graph(out, &fit.w)?;
                LearnReport::new(
                    a.method,
                    Some(&merged(&fit.traces)),
                    json!({ "alpha": alpha, "omega": fit.omega.as_slice(), "objective": fit.objective }),
                )
            } else {
                let traj = dynamic_sem_track(&data, a.gamma, alpha, a.stride, cfg)?;
                emit_json(out, &traj)?;
                LearnReport::new(a.method, None, json!({ "alpha": alpha, "gamma": a.gamma, "edge_counts": traj.edge_counts() }))
            }
        }
        Method::Svarm => {
            let x = load(ctx, single_input(a)?)?;
            let lam = lambda(a, x.nrows(), Some(x.ncols()), 0.1)?;
            let fit = svarm_fit(&x, a.lags, lam, rule(a), cfg)?;
            emit_graph(out, &ShiftOperator::new(fit.adjacency.clone(), ShiftKind::Generic, true)?)?;
            let lags: Vec<Vec<f64>> = fit.lags.iter().map(|m| m.transpose().as_slice().to_vec()).collect();
            LearnReport::new(a.method, Some(&merged(&fit.traces)), json!({ "lambda": lam, "lag_weights_row_major": lags }))
        }
    };
    if let Some(p) = &a.report {
        write_json(p, &report)?;
    }
    Ok(())
}

/// Groups columns into epochs of `c`. Inputs either match `x` column for
/// column or hold one column per cascade, shared by every epoch.
fn epochs(x: &Matrix, u: &Matrix, c: usize) -> CliResult<CascadeData> {
    if c == 0 || !x.ncols().is_multiple_of(c) {
        return Err(CliError::Usage(format!("--cascades {c} does not divide the {} columns", x.ncols())));
    }
    let count = x.ncols() / c;
    let shared = u.ncols() == c && u.ncols() != x.ncols();
    let parts = (0..count)
        .map(|t| {
            let xt = x.columns(t * c, c).into_owned();
            let ut = if shared { u.clone() } else { u.columns(t * c, c).into_owned() };
            (xt, ut)
        })
        .collect();
    Ok(CascadeData::new(parts)?)
}

fn load_any(ctx: &Ctx, path: &Path) -> CliResult<(Matrix, bool)> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let g = read_graph(path)?;
        let directed = g.is_directed();
        let w = match g.kind() {
            ShiftKind::Laplacian => g.weights(),
            _ => g.into_matrix(),
        };
        Ok((w, directed))
    } else {
        Ok((read_matrix(path, ctx.header)?, false))
    }
}

fn eval(ctx: &Ctx, a: &EvalArgs) -> CliResult<()> {
    let (hat, _) = load_any(ctx, &a.input)?;
    let (truth, directed) = load_any(ctx, &a.truth)?;
    if hat.shape() != truth.shape() {
        return Err(Error::BadDimension { expected: truth.nrows(), got: hat.nrows() }.into());
    }
    let mut ks = a.topk.clone();
    ks.sort_unstable();
    let report = EvalReport::compute(&hat, &truth, a.threshold, &ks, directed);
    emit_json(None, &report)?;
    if let Some(p) = &a.output {
        write_json(p, &report)?;
    }
    Ok(())
}

fn columns_map(x: &Matrix, f: impl Fn(&nalgebra::DVector<f64>) -> topolearn::Result<nalgebra::DVector<f64>>) -> CliResult<Matrix> {
    let cols = x.column_iter().map(|c| f(&c.into_owned())).collect::<topolearn::Result<Vec<_>>>()?;
    Ok(DMatrix::from_columns(&cols))
}

fn spectrum(ctx: &Ctx, a: &SpectrumArgs) -> CliResult<()> {
    let g = read_graph(&a.graph)?;
    let basis = eigendecompose(&g)?;
    let input = || -> CliResult<Matrix> { load(ctx, need(a.input.as_ref(), "-i")?) };
    let out = a.output.as_deref();
    match a.op {
        SpectrumOp::Eig => emit_matrix(ctx, out, &Matrix::from_column_slice(basis.n(), 1, basis.vals.as_slice())),
        SpectrumOp::Gft => emit_matrix(ctx, out, &columns_map(&input()?, |c| gft(c, &basis))?),
        SpectrumOp::Igft => emit_matrix(ctx, out, &columns_map(&input()?, |c| igft(c, &basis))?),
        SpectrumOp::Psd => {
            let cov = sample_covariance(&SignalSet::new(input()?)?, false)?;
            let psd = graph_psd(&cov, &basis, DEFAULT_PSD_THRESHOLD);
            log::info!("stationarity score {:.3e} (stationary: {})", psd.score, psd.stationary);
            emit_matrix(ctx, out, &Matrix::from_column_slice(basis.n(), 1, psd.values.as_slice()))
        }
        SpectrumOp::Tv => {
            let l = match g.kind() {
                ShiftKind::Laplacian => g.clone(),
                _ => g.laplacian()?,
            };
            let x = input()?;
            let tv = x.column_iter().map(|c| total_variation(&c.into_owned(), &l)).collect::<topolearn::Result<Vec<_>>>()?;
            emit_matrix(ctx, out, &Matrix::from_row_slice(1, tv.len(), &tv))
        }
        SpectrumOp::Bandlimit => {
            let k = need(a.k, "--k")?;
            let order = match a.order {
                Order::Freq => CoefficientOrder::Freq,
                Order::Magnitude => CoefficientOrder::Magnitude,
            };
            let rec = columns_map(&input()?, |c| bandlimit_reconstruct(c, &basis, k, order).map(|r| r.0))?;
            emit_matrix(ctx, out, &rec)
        }
    }
}

