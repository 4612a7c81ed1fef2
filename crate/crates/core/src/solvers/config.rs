use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Iteration limits and tuning knobs shared by every iterative solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Relative change threshold for convergence.
    pub tol: f64,
    /// Absolute floor for constraint residuals.
    pub feas_tol: f64,
    /// ADMM penalty.
    pub rho: f64,
    /// Residual-balancing rho updates (factor 2 when residuals differ by 10x).
    pub adaptive_rho: bool,
    /// Primal-dual step sizes are `step_scale / ||K||`.
    pub step_scale: f64,
    /// Power iterations used to estimate `||K||`.
    pub power_iters: usize,
    pub seed: u64,
    /// Fan independent subproblems out over worker threads.
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol: 1e-7,
            feas_tol: 1e-6,
            rho: 1.0,
            adaptive_rho: false,
            step_scale: 0.9,
            power_iters: 50,
            seed: 0,
            parallel: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::BadParameter(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iters < 1 {
            return Err(Error::BadParameter("max_iters must be >= 1".into()));
        }
        if !(self.rho > 0.0) {
            return Err(Error::BadParameter(format!("rho must be > 0, got {}", self.rho)));
        }
        if !(self.step_scale > 0.0 && self.step_scale < 1.0) {
            return Err(Error::BadParameter("step_scale must lie in (0, 1)".into()));
        }
        if !(self.feas_tol > 0.0) {
            return Err(Error::BadParameter("feas_tol must be > 0".into()));
        }
        Ok(())
    }

    pub fn with_max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }
}

/// Per-iteration diagnostics returned alongside every iterative solution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub objective: Vec<f64>,
    pub primal_residual: Vec<f64>,
    pub dual_residual: Vec<f64>,
    pub converged: bool,
    pub iters_used: usize,
}

impl SolveTrace {
    pub(crate) fn record(&mut self, objective: f64, primal: f64, dual: f64) {
        if objective.is_finite() {
            self.objective.push(objective);
        }
        self.primal_residual.push(primal);
        self.dual_residual.push(dual);
        self.iters_used += 1;
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.objective.last().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SolverConfig::default().validate().unwrap();
        assert!(SolverConfig { tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { rho: -1.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { max_iters: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn config_from_partial_json() {
        let c: SolverConfig = serde_json::from_str(r#"{"max_iters": 10}"#).unwrap();
        assert_eq!(c.max_iters, 10);
        assert_eq!(c.tol, 1e-7);
    }
}
