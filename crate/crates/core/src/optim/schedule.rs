//! Step-size and momentum schedules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::project;
use crate::linalg::axpy;
use crate::loss::random_in_ball;
use crate::objective::{DroProblem, Gradient, Point, SampleEval};

/// Per-iteration `(β_t, η_t)` rule for one run (or one stage).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepRule {
    Constant {
        beta: f64,
        eta: f64,
    },
    /// `η_t = k/(w + tσ²)^{1/3}`, `β_t = min(c·η_t², 1)`.
    Decay(Theorem2Params),
}

impl StepRule {
    /// `(β_t, η_t)` at the 1-based iteration `t`.
    pub fn at(&self, t: u64) -> (f64, f64) {
        match *self {
            StepRule::Constant { beta, eta } => (beta, eta),
            StepRule::Decay(p) => {
                let eta = p.eta(t);
                (p.beta(t), eta)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (beta, eta) = self.at(1);
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "β must lie in (0, 1], got {beta}"
            )));
        }
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "η must be positive, got {eta}"
            )));
        }
        Ok(())
    }

    /// `β = 1/√T`, `η = β/(20 L²)`.
    pub fn theorem1(iters: u64, smoothness: f64) -> Result<StepRule> {
        if iters == 0 || !(smoothness > 0.0) {
            return Err(Error::InvalidParameter("need T ≥ 1 and L > 0".into()));
        }
        let beta = 1.0 / (iters as f64).sqrt();
        Ok(StepRule::Constant {
            beta,
            eta: beta / (20.0 * smoothness * smoothness),
        })
    }
}

/// Constants of the decaying schedule: `k = ασ^{2/3}/L_F`,
/// `w = max(2σ², (16 L_F² k)³)`, `c = σ²/(14 L_F k³) + 130 L_F⁴`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Theorem2Params {
    pub k: f64,
    pub w: f64,
    pub c: f64,
    pub sigma_sq: f64,
}

impl Theorem2Params {
    pub fn new(alpha: f64, sigma_sq: f64, l_f: f64) -> Result<Self> {
        if !(alpha > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "α must exceed 1, got {alpha}"
            )));
        }
        if !(sigma_sq > 0.0 && l_f > 0.0) || !sigma_sq.is_finite() || !l_f.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need finite σ² > 0 and L_F > 0 (σ²={sigma_sq}, L_F={l_f})"
            )));
        }
        let k = alpha * sigma_sq.cbrt() / l_f;
        let w = (2.0 * sigma_sq).max((16.0 * l_f * l_f * k).powi(3));
        let c = sigma_sq / (14.0 * l_f * k.powi(3)) + 130.0 * l_f.powi(4);
        Ok(Theorem2Params { k, w, c, sigma_sq })
    }

    pub fn eta(&self, t: u64) -> f64 {
        self.k / (self.w + t as f64 * self.sigma_sq).cbrt()
    }

    pub fn beta(&self, t: u64) -> f64 {
        let e = self.eta(t);
        (self.c * e * e).min(1.0)
    }
}

/// Empirical `σ² = max(Var[g_i(x)], E‖∇g_i(x) − ∇g(x)‖²)` from `samples` draws at `x`.
pub fn estimate_sigma_sq(
    problem: &DroProblem,
    x: &Point,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = x.w.len();
    let mut evals = Vec::with_capacity(samples);
    let mut ev = SampleEval::zeros(dim);
    for _ in 0..samples {
        let i = rng.random_range(0..problem.n());
        problem.sample_eval_into(i, x, &mut ev)?;
        evals.push(ev.clone());
    }
    let m = samples as f64;
    let mean_g = evals.iter().map(|e| e.g).sum::<f64>() / m;
    let mut mean_gw = vec![0.0; dim];
    let mut mean_gl = 0.0;
    for e in &evals {
        axpy(1.0 / m, &e.grad_w_g, &mut mean_gw);
        mean_gl += e.grad_lambda_g / m;
    }
    let var_g = evals.iter().map(|e| (e.g - mean_g).powi(2)).sum::<f64>() / (m - 1.0);
    let var_grad = evals
        .iter()
        .map(|e| {
            crate::linalg::dist_sq(&e.grad_w_g, &mean_gw) + (e.grad_lambda_g - mean_gl).powi(2)
        })
        .sum::<f64>()
        / (m - 1.0);
    Ok(var_g.max(var_grad))
}

/// Sampled local smoothness of `F` around `center`: the largest ratio
/// `‖∇F(x₁) − ∇F(x₂)‖/‖x₁ − x₂‖` over `pairs` random feasible pairs drawn
/// within distance `spread` of `center`. A lower estimate of the true
/// constant on that neighbourhood, used in place of the closed-form `L_F`
/// when the latter is astronomically large.
pub fn estimate_local_smoothness(
    problem: &DroProblem,
    center: &Point,
    spread: f64,
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dom = problem.domain();
    let dim = center.dim();
    let mut best = 0.0f64;
    let jitter = |rng: &mut ChaCha8Rng| {
        let d = random_in_ball(rng, dim, spread);
        let mut v = center.to_vec();
        axpy(1.0, &d, &mut v);
        project(&Point::from_slice(&v), &dom)
    };
    for _ in 0..pairs {
        let a = jitter(&mut rng);
        let b = jitter(&mut rng);
        let dx = a.dist(&b);
        if dx < 1e-12 {
            continue;
        }
        let ga = problem.grad_f_exact(&a)?;
        let gb = problem.grad_f_exact(&b)?;
        best = best.max(grad_diff(&ga, &gb) / dx);
    }
    if best > 0.0 {
        Ok(best)
    } else {
        Err(Error::InvalidParameter(
            "could not sample a nondegenerate pair".into(),
        ))
    }
}

fn grad_diff(a: &Gradient, b: &Gradient) -> f64 {
    (crate::linalg::dist_sq(&a.w, &b.w) + (a.lambda - b.lambda).powi(2)).sqrt()
}

/// Default restart regulariser `μ = ε/(2(R² + λ̃²))`.
pub fn default_mu(epsilon: f64, radius: f64, lambda_tilde: f64) -> f64 {
    epsilon / (2.0 * (radius * radius + lambda_tilde * lambda_tilde))
}

/// Number of halvings needed to take `ε₁` down to `ε`.
pub fn stages_for_target(eps1: f64, eps: f64) -> usize {
    if eps >= eps1 {
        return 1;
    }
    (eps1 / eps).log2().ceil() as usize
}
