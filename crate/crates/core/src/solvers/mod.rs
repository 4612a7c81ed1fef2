//! Optimization kernels shared by the learners.

mod config;
mod lasso;
mod logdet;
mod primal_dual;
mod projection;
mod spectral_admm;

pub use config::{SolveTrace, SolverConfig};
pub use lasso::{lasso_cd, lasso_gram, soft_threshold, LassoProblem};
pub use logdet::prox_neg_logdet;
pub use primal_dual::{degree_operator_norm, graph_kkt_residual, graph_objective, primal_dual_graph, GraphPrior};
pub use projection::{
    dykstra_project, project_simplex, ConstraintKind, ScaleRule, ShiftConstraintSet,
};
pub use spectral_admm::{admm_l1_spectral, ShiftObjective, SpectralSolution, SpectralTemplate};
