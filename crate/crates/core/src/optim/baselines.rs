//! Simple comparison methods: a minibatch plug-in gradient method, a
//! single-sample projected SGD and an explicit primal–dual method.

use rand::Rng;

use super::reference::minimize_lambda;
use super::run::{finish, require_feasible, Recorder};
use super::{violation, Oracle, RunResult};
use crate::error::{Error, Result};
use crate::geometry::projected_step;
use crate::linalg::{axpy, log_sum_exp, norm, softmax_with_logs};
use crate::objective::{kl_divergence, DroProblem, Gradient, Point};

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineOptions {
    pub iters: u64,
    pub eval_every: u64,
    pub seed: u64,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        BaselineOptions {
            iters: 1000,
            eval_every: 100,
            seed: 0,
        }
    }
}

/// Plug-in estimate of `∇F` from the samples `idx`: the batch log-sum-exp
/// gradient `Σ_b p_b ∇ℓ_b`, `log ĝ + ρ − Σ_b p_b ℓ_b/λ` with `p = softmax(ℓ/λ)`.
pub fn plugin_gradient(oracle: &mut Oracle, idx: &[usize], x: &Point) -> Result<Gradient> {
    let d = x.w.len();
    let mut grads = vec![0.0; idx.len() * d];
    let mut losses = Vec::with_capacity(idx.len());
    for (b, &i) in idx.iter().enumerate() {
        losses.push(oracle.loss_eval(i, &x.w, &mut grads[b * d..(b + 1) * d])?);
    }
    Ok(plugin_from_losses(
        &losses,
        &grads,
        x.lambda,
        oracle.problem().rho(),
    ))
}

fn plugin_from_losses(losses: &[f64], grads: &[f64], lambda: f64, rho: f64) -> Gradient {
    let d = grads.len() / losses.len();
    let scaled: Vec<f64> = losses.iter().map(|l| l / lambda).collect();
    let (p, _) = softmax_with_logs(&scaled);
    let mut w = vec![0.0; d];
    let mut mean_scaled = 0.0;
    for (b, pb) in p.iter().enumerate() {
        axpy(*pb, &grads[b * d..(b + 1) * d], &mut w);
        mean_scaled += pb * scaled[b];
    }
    let log_g = log_sum_exp(&scaled) - (losses.len() as f64).ln();
    Gradient {
        w,
        lambda: log_g + rho - mean_scaled,
    }
}

fn check(problem: &DroProblem, x1: &Point, opts: &BaselineOptions, eta: f64) -> Result<()> {
    require_feasible(problem, x1)?;
    if opts.iters == 0 {
        return Err(Error::InvalidParameter(
            "need at least one iteration".into(),
        ));
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "η must be positive, got {eta}"
        )));
    }
    Ok(())
}

/// Shared loop for methods that step in `(w, λ)`; `direction` returns `z_t` at `x_t`.
fn plain_loop<F>(
    problem: &DroProblem,
    x1: &Point,
    eta: f64,
    opts: &BaselineOptions,
    mut direction: F,
) -> Result<RunResult>
where
    F: FnMut(&mut Oracle, &Point) -> Result<Gradient>,
{
    let dom = problem.domain();
    let mut oracle = Oracle::new(problem, opts.seed);
    let tau = oracle.rng().random_range(1..=opts.iters);
    let mut rec = Recorder::new(problem, 0.0, opts.eval_every);
    let mut x = x1.clone();
    let mut sampled = x.clone();
    rec.log(&x, oracle.calls(), 0, None)?;
    for t in 1..=opts.iters {
        if t == tau {
            sampled = x.clone();
        }
        let z = direction(&mut oracle, &x)?;
        let prev = x.clone();
        projected_step(&mut x, &z, eta, &dom);
        if !x.is_finite() {
            return Err(Error::InvalidParameter(
                "iterate diverged to a non-finite value".into(),
            ));
        }
        rec.iter += 1;
        rec.diag.max_violation = rec.diag.max_violation.max(violation(&x, &dom));
        if rec.due() || t == opts.iters {
            rec.log(&x, oracle.calls(), 0, Some((&prev, &z, eta)))?;
        }
    }
    finish(oracle, rec, x, sampled, tau, None, Vec::new())
}

/// Projected steps along the plug-in gradient of `batch` samples drawn
/// without replacement (all samples, in order, when `batch ≥ n`).
pub fn baseline_plugin_minibatch_run(
    problem: &DroProblem,
    x1: &Point,
    batch: usize,
    eta: f64,
    opts: &BaselineOptions,
) -> Result<RunResult> {
    check(problem, x1, opts, eta)?;
    if batch == 0 {
        return Err(Error::InvalidParameter("batch must be at least 1".into()));
    }
    let n = problem.n();
    let all: Vec<usize> = (0..n).collect();
    plain_loop(problem, x1, eta, opts, |oracle, x| {
        if batch >= n {
            plugin_gradient(oracle, &all, x)
        } else {
            let idx = rand::seq::index::sample(oracle.rng(), n, batch).into_vec();
            plugin_gradient(oracle, &idx, x)
        }
    })
}

/// Single-sample projected SGD. A one-sample plug-in λ-gradient is always
/// exactly `ρ`, so the λ-component comes from an independent pair of
/// samples instead; each iteration costs three oracle calls.
pub fn baseline_projected_sgd_run(
    problem: &DroProblem,
    x1: &Point,
    eta: f64,
    opts: &BaselineOptions,
) -> Result<RunResult> {
    check(problem, x1, opts, eta)?;
    let d = problem.dim_w();
    let mut gi = vec![0.0; d];
    plain_loop(problem, x1, eta, opts, |oracle, x| {
        let i = oracle.draw();
        oracle.loss_eval(i, &x.w, &mut gi)?;
        let pair = [oracle.draw(), oracle.draw()];
        let gl = plugin_gradient(oracle, &pair, x)?.lambda;
        Ok(Gradient {
            w: gi.clone(),
            lambda: gl,
        })
    })
}

/// Largest `D(q, 1/n) ≤ ρ` along the path `q_θ ∝ p^θ`, `θ ∈ [0, 1]`, found by
/// bisection. Returns `log q`. This is the KL (Bregman) projection of `p`
/// onto the ball `{D(q, 1/n) ≤ ρ}`.
pub fn project_kl_ball(log_p: &[f64], rho: f64) -> Result<Vec<f64>> {
    let kl_of = |lp: &[f64]| -> f64 {
        let n = lp.len() as f64;
        lp.iter()
            .map(|&l| l.exp() * (l + n.ln()))
            .sum::<f64>()
            .max(0.0)
    };
    if kl_of(log_p) <= rho {
        return Ok(log_p.to_vec());
    }
    let tilt = |theta: f64| -> Vec<f64> {
        let s: Vec<f64> = log_p.iter().map(|l| theta * l).collect();
        let z = log_sum_exp(&s);
        s.iter().map(|v| v - z).collect()
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let q = tilt(mid);
        let k = kl_of(&q);
        if k <= rho {
            lo = mid;
            if rho - k <= 1e-10 {
                return Ok(q);
            }
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 {
            return Ok(tilt(lo));
        }
    }
    Err(Error::BisectionFailed {
        iterations: 200,
        width: hi - lo,
    })
}

/// Primal–dual method with explicit weights `p`.
///
/// Each iteration draws `batch` samples with replacement and takes
/// - a projected `w`-step along `(n/B) Σ_b p_{i_b} ∇ℓ_{i_b}`;
/// - an entropic ascent step on `Σ p_i ℓ_i − λ0·D(p, 1/n)` using the sparse
///   estimate `(n/B)·ℓ_{i_b}` on sampled coordinates, followed by the KL-ball
///   projection of [`project_kl_ball`].
///
/// Metrics are reported at `(w, λ(w))` with `λ(w)` minimising `F(w, ·)`.
pub fn baseline_primal_dual_run(
    problem: &DroProblem,
    x1: &Point,
    batch: usize,
    eta_w: f64,
    eta_p: f64,
    opts: &BaselineOptions,
) -> Result<RunResult> {
    check(problem, x1, opts, eta_w)?;
    if !(eta_p > 0.0) || batch == 0 {
        return Err(Error::InvalidParameter(
            "primal–dual needs η_p > 0 and batch ≥ 1".into(),
        ));
    }
    let n = problem.n();
    let d = problem.dim_w();
    let dom = problem.domain();
    let (rho, lambda0) = (problem.rho(), problem.lambda0());
    let scale = n as f64 / batch as f64;
    let mut oracle = Oracle::new(problem, opts.seed);
    let tau = oracle.rng().random_range(1..=opts.iters);
    let mut rec = Recorder::new(problem, 0.0, opts.eval_every);
    let with_lambda = |w: &[f64]| -> Result<Point> {
        let (l, _) = minimize_lambda(problem, w, dom.lambda0, dom.lambda_tilde, 1e-10)?;
        Ok(Point::new(w.to_vec(), l))
    };
    let mut w = x1.w.clone();
    let mut log_p = vec![-(n as f64).ln(); n];
    let mut sampled_w = w.clone();
    let mut grad = vec![0.0; d];
    let mut step = vec![0.0; d];
    let mut ascent = vec![0.0; n];
    rec.log(&with_lambda(&w)?, 0, 0, None)?;
    for t in 1..=opts.iters {
        if t == tau {
            sampled_w = w.clone();
        }
        step.iter_mut().for_each(|v| *v = 0.0);
        ascent.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..batch {
            let i = oracle.draw();
            let l = oracle.loss_eval(i, &w, &mut grad)?;
            axpy(scale * log_p[i].exp(), &grad, &mut step);
            ascent[i] += scale * l;
        }
        axpy(-eta_w, &step, &mut w);
        let nw = norm(&w);
        if nw > dom.radius {
            let s = dom.radius / nw;
            w.iter_mut().for_each(|v| *v *= s);
        }
        for (lp, a) in log_p.iter_mut().zip(&ascent) {
            let entropy_grad = lambda0 * (*lp + (n as f64).ln() + 1.0);
            *lp += eta_p * (a - entropy_grad);
        }
        let z = log_sum_exp(&log_p);
        log_p.iter_mut().for_each(|v| *v -= z);
        log_p = project_kl_ball(&log_p, rho)?;
        if !w.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(
                "iterate diverged to a non-finite value".into(),
            ));
        }
        rec.iter += 1;
        if rec.due() || t == opts.iters {
            let x = with_lambda(&w)?;
            rec.diag.max_violation = rec.diag.max_violation.max(violation(&x, &dom));
            rec.log(&x, oracle.calls(), 0, None)?;
        }
    }
    let x = with_lambda(&w)?;
    let sampled = with_lambda(&sampled_w)?;
    let mut r = finish(oracle, rec, x, sampled, tau, None, Vec::new())?;
    r.dual_weights = Some(log_p.iter().map(|v| v.exp()).collect());
    Ok(r)
}

/// `Σ p_i ℓ_i − λ0·D(p, 1/n)` for explicit weights `p`.
pub fn weighted_robust_value(problem: &DroProblem, w: &[f64], p: &[f64]) -> Result<f64> {
    let losses = problem.losses(w)?;
    if p.len() != losses.len() {
        return Err(Error::DimensionMismatch {
            expected: losses.len(),
            got: p.len(),
        });
    }
    let lin: f64 = p.iter().zip(&losses).map(|(a, b)| a * b).sum();
    Ok(lin - problem.lambda0() * kl_divergence(p)?)
}

/// Exact `max_{D(p,1/n) ≤ ρ} Σ p_i ℓ_i − λ0·D(p, 1/n)` at `w`: the maximiser is
/// `p ∝ exp(ℓ/τ)` with `τ = λ0` when that is feasible and otherwise the
/// `τ > λ0` at which the constraint is tight (found by bisection on `log τ`).
pub fn primal_robust_value(problem: &DroProblem, w: &[f64]) -> Result<(f64, Vec<f64>)> {
    let losses = problem.losses(w)?;
    let rho = problem.rho();
    let lambda0 = problem.lambda0();
    let weights = |tau: f64| -> Vec<f64> {
        let s: Vec<f64> = losses.iter().map(|l| l / tau).collect();
        softmax_with_logs(&s).0
    };
    let kl = |p: &[f64]| kl_divergence(p);
    let mut p = weights(lambda0);
    if kl(&p)? > rho {
        let (mut lo, mut hi) = (lambda0.ln(), lambda0.ln());
        loop {
            hi += 1.0;
            if kl(&weights(hi.exp()))? <= rho {
                break;
            }
            if hi > 700.0 {
                return Err(Error::BisectionFailed {
                    iterations: 0,
                    width: f64::INFINITY,
                });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if kl(&weights(mid.exp()))? > rho {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        p = weights(hi.exp());
    }
    let lin: f64 = p.iter().zip(&losses).map(|(a, b)| a * b).sum();
    Ok((lin - lambda0 * kl(&p)?, p))
}
