use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "glk", version, about = "Learn graph topologies from nodal observations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Random seed for simulations and randomized solvers.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// JSON file with solver settings (iteration caps, tolerances, ...).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// CSV files carry a header row.
    #[arg(long, global = true)]
    pub header: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random graph and signals on it.
    Simulate(SimulateArgs),
    /// Estimate a graph (or graph filter) from data.
    Learn(LearnArgs),
    /// Score an estimated graph against a reference.
    Eval(EvalArgs),
    /// Graph Fourier utilities.
    Spectrum(SpectrumArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimModel {
    Er,
    Gmrf,
    Diffusion,
    Smooth,
    Sem,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub model: SimModel,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Number of signals (columns).
    #[arg(long, default_value_t = 500)]
    pub p: usize,
    #[arg(long, default_value_t = 0.3)]
    pub edge_prob: f64,
    /// Edge weights: `uniform:LO,HI` or `constant:W`.
    #[arg(long, default_value = "uniform:0.5,1.5")]
    pub weights: String,
    /// Polynomial filter coefficients h0,h1,... for diffusion.
    #[arg(long, value_delimiter = ',', default_value = "1,0.5,0.2")]
    pub filter: Vec<f64>,
    /// Additive noise variance.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Signals CSV (graph JSON for `er`).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Where to write the ground-truth graph.
    #[arg(long)]
    pub graph_out: Option<PathBuf>,
    /// Where to write exogenous inputs (`sem`).
    #[arg(long)]
    pub inputs_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Corr,
    Pcorr,
    Glasso,
    Lgmrf,
    Nlasso,
    Dong,
    Kalofolias,
    EdgeSelect,
    Spectral,
    SpectralPartial,
    PsdFilter,
    SymFilter,
    Deconv,
    Sem,
    Svarm,
    Dsem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    Or,
    And,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Objective {
    L1,
    Frobenius,
    Linf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SetKind {
    Adjacency,
    Laplacian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    FirstNode,
    TotalWeight,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    pub method: Method,
    /// Input CSV (signals, or covariances with --covariance). Repeat for
    /// methods that take several.
    #[arg(short, long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Estimated graph JSON (filter CSV for psd-filter/sym-filter,
    /// trajectory JSON for dsem). Stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Solver diagnostics as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Inputs are covariance matrices rather than signals.
    #[arg(long)]
    pub covariance: bool,
    /// Exogenous inputs CSV (sem, dsem).
    #[arg(long)]
    pub exo: Option<PathBuf>,
    /// Input covariance CSVs, one per input (psd-filter, sym-filter).
    #[arg(long)]
    pub input_cov: Vec<PathBuf>,
    /// Sparsity weight, a number or `auto` for 2 sqrt(log N / P).
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Edge count (edge-select) or eigenvector count (spectral-partial).
    #[arg(long)]
    pub k: Option<usize>,
    /// False discovery rate (corr, pcorr).
    #[arg(long, default_value_t = 0.1)]
    pub q: f64,
    #[arg(long)]
    pub ridge: bool,
    #[arg(long, value_enum, default_value_t = Rule::Or)]
    pub rule: Rule,
    /// Spectral tolerance; derived from the data when omitted.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = topolearn::spectral_id::DEFAULT_EPS_FACTOR)]
    pub eps_factor: f64,
    #[arg(long, value_enum, default_value_t = Objective::L1)]
    pub objective: Objective,
    #[arg(long, value_enum, default_value_t = SetKind::Adjacency)]
    pub set: SetKind,
    #[arg(long, value_enum, default_value_t = Scale::FirstNode)]
    pub scale: Scale,
    /// Autoregressive order (svarm).
    #[arg(long, default_value_t = 1)]
    pub lags: usize,
    /// Forgetting factor (dsem).
    #[arg(long, default_value_t = 0.9)]
    pub gamma: f64,
    /// Columns per epoch (dsem).
    #[arg(long, default_value_t = 1)]
    pub cascades: usize,
    /// Record every n-th epoch (dsem).
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Denoise before edge selection, with smoothing weight --alpha.
    #[arg(long)]
    pub noisy: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Estimated graph (JSON) or matrix (CSV).
    #[arg(short, long = "input")]
    pub input: PathBuf,
    /// Reference graph (JSON) or matrix (CSV).
    #[arg(long)]
    pub truth: PathBuf,
    /// Support threshold; 1e-6 of the largest entry when omitted.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Cut-offs for the top-k recovery curve.
    #[arg(long, value_delimiter = ',')]
    pub topk: Vec<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpectrumOp {
    /// Eigenvalues of the shift.
    Eig,
    /// GFT coefficients of every signal.
    Gft,
    /// Inverse GFT of coefficient columns.
    Igft,
    /// Graph power spectral density of the signals.
    Psd,
    /// Total variation of every signal.
    Tv,
    /// Bandlimited approximation with --k coefficients.
    Bandlimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Order {
    Freq,
    Magnitude,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    pub op: SpectrumOp,
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(short, long = "input")]
    pub input: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum, default_value_t = Order::Magnitude)]
    pub order: Order,
}
