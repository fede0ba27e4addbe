//! Shared iteration loop, metric logging and the single-stage runners.

use std::time::Instant;

use rand::Rng;

use super::tracker::{
    ascdro_init, ascdro_step, implied_inner, peek_direction, scdro_init, scdro_step,
};
use super::{
    violation, Algorithm, Diagnostics, EstimatorState, MetricsRow, Oracle, RunResult, StepRule,
    TrackingSample,
};
use crate::error::{Error, Result};
use crate::geometry::{dist_sq_to_subdifferential, subgradient_residual_from_step};
use crate::linalg::dist_sq;
use crate::objective::{DroProblem, Gradient, Point};

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub iters: u64,
    /// Log a metrics row every this many iterations (0: first and last only).
    pub eval_every: u64,
    pub init_batch: usize,
    pub mu: f64,
    pub seed: u64,
    /// Record exact tracking errors (full-batch work per record; small `n` only).
    pub track_kappa: bool,
    pub kappa_every: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            iters: 1000,
            eval_every: 100,
            init_batch: 1,
            mu: 0.0,
            seed: 0,
            track_kappa: false,
            kappa_every: 1,
        }
    }
}

pub(crate) struct Recorder<'p> {
    problem: &'p DroProblem,
    pub mu: f64,
    eval_every: u64,
    start: Instant,
    pub metrics: Vec<MetricsRow>,
    pub diag: Diagnostics,
    pub iter: u64,
}

impl<'p> Recorder<'p> {
    pub fn new(problem: &'p DroProblem, mu: f64, eval_every: u64) -> Self {
        Recorder {
            problem,
            mu,
            eval_every,
            start: Instant::now(),
            metrics: Vec::new(),
            diag: Diagnostics::default(),
            iter: 0,
        }
    }

    pub fn due(&self) -> bool {
        self.eval_every > 0 && self.iter.is_multiple_of(self.eval_every)
    }

    /// `dist_sq` of the regularised objective at `x`.
    pub fn dist_sq_at(&self, x: &Point) -> Result<f64> {
        let (_, g) = self.problem.value_and_grad_mu(x, self.mu)?;
        dist_sq_to_subdifferential(x, &g, &self.problem.domain())
    }

    pub fn log(
        &mut self,
        x: &Point,
        calls: u64,
        stage: usize,
        last: Option<(&Point, &Gradient, f64)>,
    ) -> Result<()> {
        let p = self.problem;
        let (f, mut g) = p.value_and_grad(x)?;
        let f_mu = if self.mu > 0.0 {
            crate::linalg::axpy(self.mu, &x.w, &mut g.w);
            g.lambda += self.mu * x.lambda;
            Some(f + 0.5 * self.mu * x.norm_sq())
        } else {
            None
        };
        let dist_sq = dist_sq_to_subdifferential(x, &g, &p.domain())?;
        let step_residual = match last {
            Some((prev, z, eta)) if eta > 0.0 => {
                Some(subgradient_residual_from_step(prev, x, z, &g, eta)?)
            }
            _ => None,
        };
        self.metrics.push(MetricsRow {
            iter: self.iter,
            oracle_calls: calls,
            f,
            f_mu,
            dist_sq,
            step_residual,
            train_acc: p.accuracy(&x.w),
            stage,
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
        });
        Ok(())
    }

    pub fn track(
        &mut self,
        algo: Algorithm,
        state: &EstimatorState,
        x: &Point,
        calls: u64,
    ) -> Result<()> {
        let p = self.problem;
        let exact = p.inner_exact(x)?;
        let est = implied_inner(algo, state, x, p.rho(), self.mu);
        let kappa_sq = (est.g - exact.g).powi(2)
            + dist_sq(&est.grad_w, &exact.grad_w)
            + (est.grad_lambda - exact.grad_lambda).powi(2);
        let z = peek_direction(algo, state, x, p.rho(), self.mu);
        let grad = p.grad_f_mu_exact(x, self.mu)?;
        let z_err_sq = dist_sq(&z.w, &grad.w) + (z.lambda - grad.lambda).powi(2);
        self.diag.tracking.push(TrackingSample {
            iter: self.iter,
            oracle_calls: calls,
            kappa_sq,
            z_err_sq,
        });
        Ok(())
    }
}

pub(crate) struct StageSpec {
    pub algo: Algorithm,
    pub rule: StepRule,
    pub iters: u64,
    pub stage: usize,
    /// Local iteration `τ` whose iterate is kept as the sampled output.
    pub tau: u64,
    pub kappa_every: u64,
    pub track_kappa: bool,
}

/// Runs one stage of `iters` steps from `x`, logging as due and always at the end.
/// Returns the iterate `x_τ`.
pub(crate) fn run_stage(
    spec: &StageSpec,
    oracle: &mut Oracle,
    rec: &mut Recorder,
    state: &mut EstimatorState,
    x: &mut Point,
) -> Result<Point> {
    let dom = oracle.problem().domain();
    let mu = rec.mu;
    let mut sampled = x.clone();
    for t in 1..=spec.iters {
        if t == spec.tau {
            sampled = x.clone();
        }
        let (beta, eta) = spec.rule.at(t);
        let prev = x.clone();
        let z = match spec.algo {
            Algorithm::Scdro => scdro_step(oracle, state, x, beta, eta, mu)?,
            Algorithm::Ascdro => ascdro_step(oracle, state, x, beta, eta, mu)?,
        };
        rec.iter += 1;
        rec.diag.max_violation = rec.diag.max_violation.max(violation(x, &dom));
        if spec.track_kappa && rec.iter.is_multiple_of(spec.kappa_every.max(1)) {
            rec.track(spec.algo, state, x, oracle.calls())?;
        }
        if rec.due() || t == spec.iters {
            rec.log(x, oracle.calls(), spec.stage, Some((&prev, &z, eta)))?;
        }
    }
    Ok(sampled)
}

pub(crate) fn require_feasible(problem: &DroProblem, x: &Point) -> Result<()> {
    if x.w.len() != problem.dim_w() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim_w(),
            got: x.w.len(),
        });
    }
    if !problem.domain().contains(x) {
        return Err(Error::Infeasible(format!(
            "initial point (λ = {}) lies outside X",
            x.lambda
        )));
    }
    Ok(())
}

pub(crate) fn init_state(
    algo: Algorithm,
    oracle: &mut Oracle,
    x1: &Point,
    batch: usize,
    mu: f64,
) -> Result<EstimatorState> {
    match algo {
        Algorithm::Scdro => scdro_init(oracle, x1, batch, mu),
        Algorithm::Ascdro => ascdro_init(oracle, x1, batch),
    }
}

/// Runs `opts.iters` steps of `algo` from `x1` under `rule`.
pub fn run_tracker(
    problem: &DroProblem,
    algo: Algorithm,
    x1: &Point,
    rule: StepRule,
    opts: &RunOptions,
) -> Result<RunResult> {
    require_feasible(problem, x1)?;
    rule.validate()?;
    if opts.iters == 0 {
        return Err(Error::InvalidParameter(
            "need at least one iteration".into(),
        ));
    }
    if !(opts.mu >= 0.0) || !opts.mu.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "μ must be nonnegative, got {}",
            opts.mu
        )));
    }
    let mut oracle = Oracle::new(problem, opts.seed);
    let tau = oracle.rng().random_range(1..=opts.iters);
    let mut rec = Recorder::new(problem, opts.mu, opts.eval_every);
    let mut x = x1.clone();
    let mut state = init_state(algo, &mut oracle, &x, opts.init_batch, opts.mu)?;
    rec.log(&x, oracle.calls(), 0, None)?;
    if opts.track_kappa {
        rec.track(algo, &state, &x, oracle.calls())?;
    }
    let spec = StageSpec {
        algo,
        rule,
        iters: opts.iters,
        stage: 0,
        tau,
        kappa_every: opts.kappa_every,
        track_kappa: opts.track_kappa,
    };
    let sampled = run_stage(&spec, &mut oracle, &mut rec, &mut state, &mut x)?;
    finish(oracle, rec, x, sampled, tau, Some(state), Vec::new())
}

pub(crate) fn finish(
    oracle: Oracle,
    mut rec: Recorder,
    x: Point,
    sampled: Point,
    tau: u64,
    state: Option<EstimatorState>,
    stage_ends: Vec<super::StageEnd>,
) -> Result<RunResult> {
    let final_dist_sq = rec.dist_sq_at(&x)?;
    let sampled_dist_sq = rec.dist_sq_at(&sampled)?;
    rec.diag.s_clamps = oracle.s_clamps();
    rec.diag.min_g = oracle.min_g();
    Ok(RunResult {
        final_point: x,
        sampled_point: sampled,
        sampled_iter: tau,
        final_dist_sq,
        sampled_dist_sq,
        final_state: state,
        dual_weights: None,
        metrics: rec.metrics,
        stage_ends,
        oracle_calls: oracle.calls(),
        iterations: rec.iter,
        diag: rec.diag,
    })
}

/// SCDRO; Theorem-1 steps are `StepRule::theorem1(T, L)`.
pub fn scdro_run(
    problem: &DroProblem,
    x1: &Point,
    rule: StepRule,
    opts: &RunOptions,
) -> Result<RunResult> {
    run_tracker(problem, Algorithm::Scdro, x1, rule, opts)
}

/// ASCDRO with a constant or decaying rule.
pub fn ascdro_run(
    problem: &DroProblem,
    x1: &Point,
    rule: StepRule,
    opts: &RunOptions,
) -> Result<RunResult> {
    run_tracker(problem, Algorithm::Ascdro, x1, rule, opts)
}
