//! Stochastic optimizers for the compositional objective.
//!
//! [`scdro_run`] and [`ascdro_run`] implement the moving-average and STORM
//! trackers; [`restart_run`] wraps either in a stagewise schedule on
//! `F_μ`. The [`baselines`] share the same [`RunResult`] trace so they can be
//! compared on oracle calls.

pub mod baselines;
pub mod reference;
mod restart;
mod run;
pub mod schedule;
mod tracker;

pub use restart::{
    practical_plan, restart_run, theory_init_batch, theory_plan, RestartOptions, StageParams,
};
pub use run::{ascdro_run, run_tracker, scdro_run, RunOptions};
pub use schedule::{StepRule, Theorem2Params};
pub use tracker::{
    ascdro_direction, ascdro_init, ascdro_step, implied_inner, scdro_init, scdro_step, Algorithm,
    EstimatorState, Oracle,
};

use crate::objective::Point;

/// Stacked update direction `z_t`.
pub type GradEstimate = crate::objective::Gradient;

/// One logged evaluation. Full-batch quantities are exact.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub iter: u64,
    pub oracle_calls: u64,
    pub f: f64,
    /// `F_μ` when the run regularises with `μ > 0`.
    pub f_mu: Option<f64>,
    /// `dist(0, ∇F_μ(x) + N_X(x))²` (plain `F` when `μ = 0`).
    pub dist_sq: f64,
    /// Residual of the step that produced this iterate; absent at iteration 0.
    pub step_residual: Option<f64>,
    pub train_acc: f64,
    pub stage: usize,
    pub wall_ms: f64,
}

/// Exact tracking errors after one update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackingSample {
    pub iter: u64,
    pub oracle_calls: u64,
    /// `|s − g|² + ‖v̂ − ∇_w g‖² + |û − ∂_λ g|²`, with `(v̂, û)` the tracker's
    /// estimate of `∇g` (see [`implied_inner`]).
    pub kappa_sq: f64,
    /// `‖z − ∇F_μ‖²` for the direction the next step would use.
    pub z_err_sq: f64,
}

/// Counters gathered while a run executes.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    /// Times a tracked `s` below 1 was clamped before `log s` or `λ/s`.
    pub s_clamps: u64,
    /// Smallest per-sample `g_i` seen by the oracle.
    pub min_g: f64,
    /// Largest constraint violation over all iterates:
    /// `max(‖w‖ − R, λ0 − λ, λ − λ̃, 0)`.
    pub max_violation: f64,
    pub tracking: Vec<TrackingSample>,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Diagnostics {
            s_clamps: 0,
            min_g: f64::INFINITY,
            max_violation: 0.0,
            tracking: Vec::new(),
        }
    }
}

/// End-of-stage snapshot of a restarted run.
#[derive(Clone, Debug, PartialEq)]
pub struct StageEnd {
    pub stage: usize,
    pub iter: u64,
    pub oracle_calls: u64,
    pub f: f64,
    pub f_mu: f64,
    pub point: Point,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub final_point: Point,
    /// Iterate `x_τ` for `τ` uniform on `1..=T` (on the last stage for restarts).
    pub sampled_point: Point,
    pub sampled_iter: u64,
    pub final_dist_sq: f64,
    pub sampled_dist_sq: f64,
    pub final_state: Option<EstimatorState>,
    /// Explicit worst-case weights, for methods that keep them.
    pub dual_weights: Option<Vec<f64>>,
    pub metrics: Vec<MetricsRow>,
    pub stage_ends: Vec<StageEnd>,
    pub oracle_calls: u64,
    pub iterations: u64,
    pub diag: Diagnostics,
}

impl RunResult {
    /// Oracle calls at the first logged row with `dist_sq ≤ target`.
    pub fn oracle_calls_to_reach(&self, target: f64) -> Option<u64> {
        self.metrics
            .iter()
            .find(|r| r.dist_sq <= target)
            .map(|r| r.oracle_calls)
    }

    /// Mean tracking error over the second half of the trace.
    pub fn late_mean_kappa_sq(&self) -> Option<f64> {
        let t = &self.diag.tracking;
        if t.is_empty() {
            return None;
        }
        let tail = &t[t.len() / 2..];
        Some(tail.iter().map(|s| s.kappa_sq).sum::<f64>() / tail.len() as f64)
    }
}

pub(crate) fn violation(x: &Point, dom: &crate::objective::Domain) -> f64 {
    let nw = crate::linalg::norm(&x.w);
    (nw - dom.radius)
        .max(dom.lambda0 - x.lambda)
        .max(x.lambda - dom.lambda_tilde)
        .max(0.0)
}
