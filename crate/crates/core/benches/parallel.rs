use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use topolearn::graph::{Matrix, SignalSet};
use topolearn::netdyn::svarm_fit;
use topolearn::simulate::{sample_gmrf, standard_normal, RngSpec};
use topolearn::solvers::SolverConfig;
use topolearn::spectral_id::sym_filter_select;
use topolearn::statnet::{neighborhood_lasso, CombineRule};

fn config(parallel: bool) -> SolverConfig {
    SolverConfig { parallel, ..SolverConfig::default() }
}

fn modes() -> [(&'static str, bool); 2] {
    [("sequential", false), ("parallel", true)]
}

fn nlasso(c: &mut Criterion) {
    let n = 40;
    let theta = Matrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 1.0,
        1 => -0.3,
        _ => 0.0,
    });
    let x: SignalSet = sample_gmrf(&theta, 2000, &mut RngSpec::new(1).rng()).unwrap();
    let mut g = c.benchmark_group("neighborhood_lasso_n40");
    for (name, par) in modes() {
        let cfg = config(par);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| neighborhood_lasso(black_box(&x), 0.05, CombineRule::Or, &cfg).unwrap())
        });
    }
    g.finish();
}

fn sign_search(c: &mut Criterion) {
    let mut rng = RngSpec::new(2).rng();
    let a = standard_normal(7, 7, &mut rng);
    let h = (&a + a.transpose()) * 0.5;
    let w = standard_normal(7, 7, &mut rng);
    let sw = vec![Matrix::identity(7, 7), &w * w.transpose() + Matrix::identity(7, 7)];
    let sx: Vec<Matrix> = sw.iter().map(|s| &h * s * &h).collect();
    let mut g = c.benchmark_group("sign_search_n7_m2");
    for (name, par) in modes() {
        let cfg = config(par);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sym_filter_select(black_box(&sx), &sw, &cfg).unwrap())
        });
    }
    g.finish();
}

fn svarm(c: &mut Criterion) {
    let x = standard_normal(30, 1500, &mut RngSpec::new(3).rng());
    let mut g = c.benchmark_group("svarm_n30_order2");
    for (name, par) in modes() {
        let cfg = config(par);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| svarm_fit(black_box(&x), 2, 0.1, CombineRule::Or, &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = nlasso, sign_search, svarm
}
criterion_main!(benches);
