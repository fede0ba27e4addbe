//! The compositional DRO objective
//!
//! ```text
//! F(w, λ) = f_λ(g(w, λ)),   g(w, λ) = (1/n) Σ_i exp(ℓ_i(w)/λ),   f_λ(s) = λ log s + λρ
//! ```
//!
//! over `X = {‖w‖ ≤ R} × [λ0, λ̃]`, together with exact full-batch values and
//! gradients, the closed-form worst-case weights `p*`, and the smoothness
//! constants that parameterise the theoretical step sizes.
//!
//! Full-batch quantities are computed in the log domain so they never
//! overflow; per-sample `g_i` values are guarded by an exponent cap instead.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{axpy, log_sum_exp, norm, norm_sq, softmax_with_logs};
use crate::loss::{LossBounds, LossModel};

/// Default cap on `ℓ_i(w)/λ` before a per-sample exponential is refused.
pub const DEFAULT_EXP_CAP: f64 = 300.0;

/// Relative slack used when deciding feasibility and constraint activity.
pub const ACTIVE_TOL: f64 = 1e-10;

/// Joint decision variable `x = (w, λ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub w: Vec<f64>,
    pub lambda: f64,
}

impl Point {
    pub fn new(w: Vec<f64>, lambda: f64) -> Self {
        Point { w, lambda }
    }

    /// Dimension of the stacked vector `(w, λ)`.
    pub fn dim(&self) -> usize {
        self.w.len() + 1
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.w.clone();
        v.push(self.lambda);
        v
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let (w, l) = v.split_at(v.len() - 1);
        Point {
            w: w.to_vec(),
            lambda: l[0],
        }
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.w) + self.lambda * self.lambda
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (crate::linalg::dist_sq(&self.w, &other.w) + (self.lambda - other.lambda).powi(2)).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.lambda.is_finite() && self.w.iter().all(|v| v.is_finite())
    }
}

/// Gradient (or any direction) in `(w, λ)` coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub w: Vec<f64>,
    pub lambda: f64,
}

impl Gradient {
    pub fn zeros(dim_w: usize) -> Self {
        Gradient {
            w: vec![0.0; dim_w],
            lambda: 0.0,
        }
    }

    pub fn norm(&self) -> f64 {
        (norm_sq(&self.w) + self.lambda * self.lambda).sqrt()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.w.clone();
        v.push(self.lambda);
        v
    }

    pub fn dist(&self, other: &Gradient) -> f64 {
        (crate::linalg::dist_sq(&self.w, &other.w) + (self.lambda - other.lambda).powi(2)).sqrt()
    }
}

/// `X = {‖w‖ ≤ R} × [λ0, λ̃]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub radius: f64,
    pub lambda0: f64,
    pub lambda_tilde: f64,
}

impl Domain {
    pub fn new(radius: f64, lambda0: f64, lambda_tilde: f64) -> Result<Self> {
        if !(radius > 0.0 && lambda0 > 0.0 && lambda0 <= lambda_tilde) || !lambda_tilde.is_finite()
        {
            return Err(Error::InvalidParameter(format!(
                "domain needs R > 0 and 0 < λ0 ≤ λ̃ (got R={radius}, λ0={lambda0}, λ̃={lambda_tilde})"
            )));
        }
        Ok(Domain {
            radius,
            lambda0,
            lambda_tilde,
        })
    }

    pub fn contains(&self, x: &Point) -> bool {
        let r = self.radius;
        x.is_finite()
            && norm(&x.w) <= r * (1.0 + ACTIVE_TOL)
            && x.lambda >= self.lambda0 * (1.0 - ACTIVE_TOL)
            && x.lambda <= self.lambda_tilde * (1.0 + ACTIVE_TOL)
    }

    fn require(&self, x: &Point) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Infeasible(format!(
                "‖w‖ = {:.6e} (R = {}), λ = {:.6e} (range [{}, {}])",
                norm(&x.w),
                self.radius,
                x.lambda,
                self.lambda0,
                self.lambda_tilde
            )))
        }
    }
}

/// Smoothness constants of the inner map and the composed objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothnessConstants {
    pub l_g: f64,
    pub l_grad_g: f64,
    pub l_a: f64,
    pub l_b: f64,
    pub l_c: f64,
    pub l_d: f64,
    pub l_f: f64,
}

/// Per-sample quantities at one point: `ℓ_i`, `∇ℓ_i`, `g_i`, `∇_w g_i`, `∂_λ g_i`.
#[derive(Clone, Debug)]
pub struct SampleEval {
    pub loss: f64,
    pub grad_loss: Vec<f64>,
    pub g: f64,
    pub grad_w_g: Vec<f64>,
    pub grad_lambda_g: f64,
}

impl SampleEval {
    pub fn zeros(dim_w: usize) -> Self {
        SampleEval {
            loss: 0.0,
            grad_loss: vec![0.0; dim_w],
            g: 1.0,
            grad_w_g: vec![0.0; dim_w],
            grad_lambda_g: 0.0,
        }
    }
}

/// Worst-case weights `p*_i ∝ exp(ℓ_i/λ)` with their logarithms.
#[derive(Clone, Debug)]
pub struct PStar {
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
}

/// Exact full-batch inner map: `g(x)`, `∇_w g(x)`, `∂_λ g(x)`.
#[derive(Clone, Debug)]
pub struct InnerExact {
    pub g: f64,
    pub grad_w: Vec<f64>,
    pub grad_lambda: f64,
}

/// Dataset, loss model and constraint parameters defining `F` on `X`.
#[derive(Clone, Debug)]
pub struct DroProblem {
    data: Dataset,
    loss: LossModel,
    rho: f64,
    lambda0: f64,
    domain: Domain,
    bounds: LossBounds,
    exp_cap: f64,
}

impl DroProblem {
    /// Derives the loss bounds over `‖w‖ ≤ radius` and sets `λ̃ = λ0 + C/ρ`.
    pub fn new(
        data: Dataset,
        loss: LossModel,
        rho: f64,
        lambda0: f64,
        radius: f64,
    ) -> Result<Self> {
        let bounds = loss.bounds(&data, radius)?;
        let lt = lambda_tilde(bounds.c, rho, lambda0)?;
        let domain = Domain::new(radius, lambda0, lt)?;
        Ok(DroProblem {
            data,
            loss,
            rho,
            lambda0,
            domain,
            bounds,
            exp_cap: DEFAULT_EXP_CAP,
        })
    }

    pub fn with_exp_cap(mut self, cap: f64) -> Result<Self> {
        if !(cap > 0.0) || !cap.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "exponent cap must be positive, got {cap}"
            )));
        }
        self.exp_cap = cap;
        Ok(self)
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn loss(&self) -> LossModel {
        self.loss
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn bounds(&self) -> LossBounds {
        self.bounds
    }

    pub fn exp_cap(&self) -> f64 {
        self.exp_cap
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    /// Parameter count of the loss model.
    pub fn dim_w(&self) -> usize {
        self.loss.num_params(self.data.d())
    }

    /// The additive constant `λ0ρ` separating the `λρ` form used here from the `(λ−λ0)ρ` form.
    pub fn objective_offset(&self) -> f64 {
        self.lambda0 * self.rho
    }

    fn check_lambda(&self, lambda: f64) -> Result<()> {
        if lambda > 0.0 && lambda.is_finite() {
            Ok(())
        } else {
            Err(Error::Infeasible(format!(
                "λ must be positive, got {lambda}"
            )))
        }
    }

    /// `g_i(x) = exp(ℓ_i(w)/λ)`.
    pub fn g_value(&self, i: usize, x: &Point) -> Result<f64> {
        self.check_lambda(x.lambda)?;
        let l = self.loss.value(&self.data, i, &x.w)?;
        self.guarded_exp(i, l / x.lambda)
    }

    fn guarded_exp(&self, i: usize, exponent: f64) -> Result<f64> {
        if exponent > self.exp_cap || !exponent.is_finite() {
            return Err(Error::OverflowGuard {
                sample: i,
                exponent,
                cap: self.exp_cap,
            });
        }
        Ok(exponent.exp())
    }

    /// `(∇_w g_i(x), ∂_λ g_i(x)) = (g_i ∇ℓ_i/λ, −g_i ℓ_i/λ²)`.
    pub fn g_grad(&self, i: usize, x: &Point) -> Result<(Vec<f64>, f64)> {
        let mut ev = SampleEval::zeros(x.w.len());
        self.sample_eval_into(i, x, &mut ev)?;
        Ok((ev.grad_w_g, ev.grad_lambda_g))
    }

    /// Evaluates every per-sample quantity at `x` into `out`. One oracle call.
    pub fn sample_eval_into(&self, i: usize, x: &Point, out: &mut SampleEval) -> Result<()> {
        self.check_lambda(x.lambda)?;
        out.grad_loss.resize(x.w.len(), 0.0);
        out.grad_w_g.resize(x.w.len(), 0.0);
        let l = self
            .loss
            .value_and_grad_into(&self.data, i, &x.w, &mut out.grad_loss)?;
        let g = self.guarded_exp(i, l / x.lambda)?;
        let c = g / x.lambda;
        for (o, gl) in out.grad_w_g.iter_mut().zip(&out.grad_loss) {
            *o = c * gl;
        }
        out.loss = l;
        out.g = g;
        out.grad_lambda_g = -g * l / (x.lambda * x.lambda);
        Ok(())
    }

    pub fn sample_eval(&self, i: usize, x: &Point) -> Result<SampleEval> {
        let mut ev = SampleEval::zeros(x.w.len());
        self.sample_eval_into(i, x, &mut ev)?;
        Ok(ev)
    }

    /// All per-sample losses at `w`.
    pub fn losses(&self, w: &[f64]) -> Result<Vec<f64>> {
        (0..self.n())
            .map(|i| self.loss.value(&self.data, i, w))
            .collect()
    }

    /// `F` at any `λ > 0` and any `w`, ignoring the domain. Used by oracles that search beyond `λ̃`.
    pub fn f_unconstrained(&self, w: &[f64], lambda: f64) -> Result<f64> {
        self.check_lambda(lambda)?;
        let losses = self.losses(w)?;
        Ok(f_from_losses(&losses, lambda, self.rho))
    }

    /// `F(x) = λ log((1/n) Σ exp(ℓ_i/λ)) + λρ` via shifted log-sum-exp.
    pub fn f_exact(&self, x: &Point) -> Result<f64> {
        self.domain.require(x)?;
        self.f_unconstrained(&x.w, x.lambda)
    }

    /// Value and gradient of `F` at any `λ > 0`.
    pub fn value_and_grad_unconstrained(&self, x: &Point) -> Result<(f64, Gradient)> {
        self.check_lambda(x.lambda)?;
        let n = self.n();
        let dim = x.w.len();
        let mut scaled = Vec::with_capacity(n);
        let mut grads = vec![0.0; n * dim];
        let mut losses = Vec::with_capacity(n);
        for i in 0..n {
            let l = self.loss.value_and_grad_into(
                &self.data,
                i,
                &x.w,
                &mut grads[i * dim..(i + 1) * dim],
            )?;
            losses.push(l);
            scaled.push(l / x.lambda);
        }
        let lse = log_sum_exp(&scaled);
        let (p, _) = softmax_with_logs(&scaled);
        let log_g = lse - (n as f64).ln();
        let mut gw = vec![0.0; dim];
        let mut weighted_loss = 0.0;
        for i in 0..n {
            axpy(p[i], &grads[i * dim..(i + 1) * dim], &mut gw);
            weighted_loss += p[i] * losses[i];
        }
        let value = x.lambda * log_g + x.lambda * self.rho;
        let gl = log_g + self.rho - weighted_loss / x.lambda;
        Ok((value, Gradient { w: gw, lambda: gl }))
    }

    /// `∇F(x)`: `∂_w F = Σ p*_i ∇ℓ_i`, `∂_λ F = log g + ρ − Σ p*_i ℓ_i / λ`.
    pub fn grad_f_exact(&self, x: &Point) -> Result<Gradient> {
        self.domain.require(x)?;
        Ok(self.value_and_grad_unconstrained(x)?.1)
    }

    pub fn value_and_grad(&self, x: &Point) -> Result<(f64, Gradient)> {
        self.domain.require(x)?;
        self.value_and_grad_unconstrained(x)
    }

    /// `F_μ(x) = F(x) + μ‖x‖²/2`.
    pub fn f_mu_exact(&self, x: &Point, mu: f64) -> Result<f64> {
        check_mu(mu)?;
        Ok(self.f_exact(x)? + 0.5 * mu * x.norm_sq())
    }

    pub fn grad_f_mu_exact(&self, x: &Point, mu: f64) -> Result<Gradient> {
        Ok(self.value_and_grad_mu(x, mu)?.1)
    }

    pub fn value_and_grad_mu(&self, x: &Point, mu: f64) -> Result<(f64, Gradient)> {
        check_mu(mu)?;
        let (f, mut g) = self.value_and_grad(x)?;
        axpy(mu, &x.w, &mut g.w);
        g.lambda += mu * x.lambda;
        Ok((f + 0.5 * mu * x.norm_sq(), g))
    }

    /// Closed-form inner maximiser `p*_i(x) ∝ exp(ℓ_i(w)/λ)`.
    pub fn p_star(&self, x: &Point) -> Result<PStar> {
        self.domain.require(x)?;
        let scaled: Vec<f64> = self
            .losses(&x.w)?
            .into_iter()
            .map(|l| l / x.lambda)
            .collect();
        let (probs, log_probs) = softmax_with_logs(&scaled);
        Ok(PStar { probs, log_probs })
    }

    /// Exact `g(x)` and `∇g(x)` by direct summation. Subject to the exponent cap.
    pub fn inner_exact(&self, x: &Point) -> Result<InnerExact> {
        let n = self.n() as f64;
        let mut ev = SampleEval::zeros(x.w.len());
        let mut out = InnerExact {
            g: 0.0,
            grad_w: vec![0.0; x.w.len()],
            grad_lambda: 0.0,
        };
        for i in 0..self.n() {
            self.sample_eval_into(i, x, &mut ev)?;
            out.g += ev.g / n;
            axpy(1.0 / n, &ev.grad_w_g, &mut out.grad_w);
            out.grad_lambda += ev.grad_lambda_g / n;
        }
        Ok(out)
    }

    pub fn accuracy(&self, w: &[f64]) -> f64 {
        self.loss.accuracy(&self.data, w)
    }

    /// Closed-form constants from the loss bounds `(C, G, L)` and `λ0`, `λ̃`.
    /// With a small `λ0` the `exp(C/λ0)` factor overflows to `+∞`.
    pub fn smoothness_constants(&self) -> SmoothnessConstants {
        smoothness_from_bounds(&self.bounds, self.lambda0, self.domain.lambda_tilde)
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu >= 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "μ must be nonnegative, got {mu}"
        )))
    }
}

/// `λ log((1/n) Σ exp(ℓ_i/λ)) + λρ` from precomputed losses.
pub fn f_from_losses(losses: &[f64], lambda: f64, rho: f64) -> f64 {
    let scaled: Vec<f64> = losses.iter().map(|l| l / lambda).collect();
    lambda * (log_sum_exp(&scaled) - (losses.len() as f64).ln()) + lambda * rho
}

/// `f_λ(s) = λ log s + λρ`, with `s` clamped to at least 1.
pub fn f_lambda(s: f64, lambda: f64, rho: f64) -> f64 {
    lambda * s.max(1.0).ln() + lambda * rho
}

/// `∇f_λ(s) = λ/s`, with `s` clamped to at least 1 so the result lies in `(0, λ]`.
pub fn grad_f_lambda(s: f64, lambda: f64) -> f64 {
    lambda / s.max(1.0)
}

/// KL divergence `D(p, 1/n) = Σ_{p_i>0} p_i log(p_i n)`.
pub fn kl_divergence(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::NotProbabilityVector("empty vector".into()));
    }
    if let Some(v) = p.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::NotProbabilityVector(format!(
            "entry {v} is negative or not finite"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::NotProbabilityVector(format!("entries sum to {s}")));
    }
    let n = p.len() as f64;
    Ok(p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * (v * n).ln())
        .sum::<f64>()
        .max(0.0))
}

/// Upper bound on the optimal dual temperature, `λ̃ = λ0 + C/ρ`.
pub fn lambda_tilde(c: f64, rho: f64, lambda0: f64) -> Result<f64> {
    if !(c > 0.0 && rho > 0.0 && lambda0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "λ̃ needs C, ρ, λ0 > 0 (got C={c}, ρ={rho}, λ0={lambda0})"
        )));
    }
    Ok(lambda0 + c / rho)
}

pub fn smoothness_from_bounds(
    b: &LossBounds,
    lambda0: f64,
    lambda_tilde: f64,
) -> SmoothnessConstants {
    let (c, g, l, l0) = (b.c, b.g, b.l, lambda0);
    let e = (c / l0).exp();
    let l_g = e * (g / l0 + c / (l0 * l0));
    let l_a = e * (g * g / (l0 * l0) + l / l0);
    let l_b = e * (c * g / l0.powi(3) + g / (l0 * l0));
    let l_c = e * ((c * g + l0 * g) / l0.powi(3));
    let l_d = e * ((c * c + 2.0 * l0 * c) / l0.powi(4));
    let l_grad_g = (l_a * l_a + l_b * l_b + l_c * l_c + l_d * l_d).sqrt();
    let lt = lambda_tilde;
    let l_f = lt * l_g * l_g + 2.0 * l_g + lt * l_grad_g + 1.0 + lt;
    SmoothnessConstants {
        l_g,
        l_grad_g,
        l_a,
        l_b,
        l_c,
        l_d,
        l_f,
    }
}
