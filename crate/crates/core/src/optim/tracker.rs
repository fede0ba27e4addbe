//! Moving-average (SCDRO) and STORM (ASCDRO) estimators of `∇F`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::projected_step;
use crate::linalg::axpy;
use crate::objective::{DroProblem, Gradient, InnerExact, Point, SampleEval};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Scdro,
    Ascdro,
}

impl Algorithm {
    /// Per-sample evaluations consumed by one step.
    pub fn oracle_per_step(self) -> u64 {
        match self {
            Algorithm::Scdro => 1,
            Algorithm::Ascdro => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Scdro => "scdro",
            Algorithm::Ascdro => "ascdro",
        }
    }
}

/// Trackers `(s, v, u)`.
///
/// For SCDRO `v` and `u` already estimate `∂_w F` and `∂_λ F`. For ASCDRO
/// they estimate `∇_w g` and `∂_λ g`, and the direction is assembled in
/// [`ascdro_direction`].
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorState {
    pub s: f64,
    pub v: Vec<f64>,
    pub u: f64,
}

impl EstimatorState {
    pub fn is_finite(&self) -> bool {
        self.s.is_finite() && self.u.is_finite() && self.v.iter().all(|x| x.is_finite())
    }
}

/// Sampling oracle: owns the run's RNG and counts every per-sample evaluation.
pub struct Oracle<'a> {
    problem: &'a DroProblem,
    rng: ChaCha8Rng,
    calls: u64,
    min_g: f64,
    s_clamps: u64,
    a: SampleEval,
    b: SampleEval,
}

impl<'a> Oracle<'a> {
    pub fn new(problem: &'a DroProblem, seed: u64) -> Self {
        let d = problem.dim_w();
        Oracle {
            problem,
            rng: ChaCha8Rng::seed_from_u64(seed),
            calls: 0,
            min_g: f64::INFINITY,
            s_clamps: 0,
            a: SampleEval::zeros(d),
            b: SampleEval::zeros(d),
        }
    }

    pub fn problem(&self) -> &'a DroProblem {
        self.problem
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn min_g(&self) -> f64 {
        self.min_g
    }

    pub fn s_clamps(&self) -> u64 {
        self.s_clamps
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Uniform sample index.
    pub fn draw(&mut self) -> usize {
        self.rng.random_range(0..self.problem.n())
    }

    /// Evaluates sample `i` at `x`; one oracle call.
    pub fn eval(&mut self, i: usize, x: &Point) -> Result<&SampleEval> {
        self.problem.sample_eval_into(i, x, &mut self.a)?;
        self.calls += 1;
        self.min_g = self.min_g.min(self.a.g);
        Ok(&self.a)
    }

    /// Loss and loss gradient of sample `i` at `w` into `grad`; one oracle call.
    pub fn loss_eval(&mut self, i: usize, w: &[f64], grad: &mut [f64]) -> Result<f64> {
        let l = self
            .problem
            .loss()
            .value_and_grad_into(self.problem.data(), i, w, grad)?;
        self.calls += 1;
        Ok(l)
    }

    /// Evaluates sample `i` at two points; two oracle calls.
    fn eval_pair(&mut self, i: usize, x_new: &Point, x_old: &Point) -> Result<()> {
        self.problem.sample_eval_into(i, x_new, &mut self.a)?;
        self.problem.sample_eval_into(i, x_old, &mut self.b)?;
        self.calls += 2;
        self.min_g = self.min_g.min(self.a.g).min(self.b.g);
        Ok(())
    }

    fn clamp_s(&mut self, s: f64) -> f64 {
        if s < 1.0 {
            self.s_clamps += 1;
            1.0
        } else {
            s
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "β must lie in (0, 1], got {beta}"
        )))
    }
}

fn check_finite(state: &EstimatorState, x: &Point) -> Result<()> {
    if state.is_finite() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(
            "estimator diverged to a non-finite value".into(),
        ))
    }
}

/// Batch means of `g_i`, `∇_w g_i`, `∂_λ g_i` at `x`.
fn batch_means(oracle: &mut Oracle, x: &Point, batch: usize) -> Result<(f64, Vec<f64>, f64)> {
    if batch == 0 {
        return Err(Error::InvalidParameter(
            "initial batch must be at least 1".into(),
        ));
    }
    let m = batch as f64;
    let (mut s, mut v, mut u) = (0.0, vec![0.0; x.w.len()], 0.0);
    for _ in 0..batch {
        let i = oracle.draw();
        let ev = oracle.eval(i, x)?;
        s += ev.g / m;
        u += ev.grad_lambda_g / m;
        axpy(1.0 / m, &ev.grad_w_g, &mut v);
    }
    Ok((s, v, u))
}

/// `s = ĝ`, `v = ∇f_λ(s)·∇̂_w g + μw`, `u = ∇f_λ(s)·∂̂_λ g + log s + ρ + μλ`
/// from `batch` draws at `x1`.
pub fn scdro_init(
    oracle: &mut Oracle,
    x1: &Point,
    batch: usize,
    mu: f64,
) -> Result<EstimatorState> {
    let (s, mut v, u) = batch_means(oracle, x1, batch)?;
    let sc = oracle.clamp_s(s);
    let gf = x1.lambda / sc;
    v.iter_mut().for_each(|e| *e *= gf);
    axpy(mu, &x1.w, &mut v);
    let u = gf * u + sc.ln() + oracle.problem.rho() + mu * x1.lambda;
    Ok(EstimatorState { s, v, u })
}

/// One SCDRO iteration: `x ← Π_X(x − η z)` with `z = (v, u)`, then the
/// moving averages absorb one fresh sample at the new point. Returns `z`.
pub fn scdro_step(
    oracle: &mut Oracle,
    state: &mut EstimatorState,
    x: &mut Point,
    beta: f64,
    eta: f64,
    mu: f64,
) -> Result<Gradient> {
    check_beta(beta)?;
    let z = Gradient {
        w: state.v.clone(),
        lambda: state.u,
    };
    let dom = oracle.problem.domain();
    projected_step(x, &z, eta, &dom);
    let i = oracle.draw();
    let rho = oracle.problem.rho();
    let (g, gl) = {
        let ev = oracle.eval(i, x)?;
        (ev.g, ev.grad_lambda_g)
    };
    state.s = (1.0 - beta) * state.s + beta * g;
    let sc = oracle.clamp_s(state.s);
    let gf = x.lambda / sc;
    let keep = 1.0 - beta;
    for ((v, gw), w) in state.v.iter_mut().zip(&oracle.a.grad_w_g).zip(&x.w) {
        *v = keep * *v + beta * (gf * gw + mu * w);
    }
    state.u = keep * state.u + beta * (gf * gl + sc.ln() + rho + mu * x.lambda);
    check_finite(state, x)?;
    Ok(z)
}

/// `s, v, u` = batch means of `g_i`, `∇_w g_i`, `∂_λ g_i` at `x1`.
pub fn ascdro_init(oracle: &mut Oracle, x1: &Point, batch: usize) -> Result<EstimatorState> {
    let (s, v, u) = batch_means(oracle, x1, batch)?;
    Ok(EstimatorState { s, v, u })
}

fn assemble(state: &EstimatorState, x: &Point, rho: f64, mu: f64) -> (Gradient, bool) {
    let clamped = state.s < 1.0;
    let sc = state.s.max(1.0);
    let gf = x.lambda / sc;
    let mut w: Vec<f64> = state.v.iter().map(|v| gf * v).collect();
    axpy(mu, &x.w, &mut w);
    (
        Gradient {
            w,
            lambda: gf * state.u + sc.ln() + rho + mu * x.lambda,
        },
        clamped,
    )
}

/// `z = (∇f_λ(s)·v + μw, ∇f_λ(s)·u + log s + ρ + μλ)`.
pub fn ascdro_direction(
    oracle: &mut Oracle,
    state: &EstimatorState,
    x: &Point,
    mu: f64,
) -> Gradient {
    let (z, clamped) = assemble(state, x, oracle.problem.rho(), mu);
    if clamped {
        oracle.s_clamps += 1;
    }
    z
}

/// One ASCDRO iteration: move along the assembled direction, then apply
/// the STORM correction with one sample evaluated at both the new and the
/// previous point. Returns the direction used.
pub fn ascdro_step(
    oracle: &mut Oracle,
    state: &mut EstimatorState,
    x: &mut Point,
    beta: f64,
    eta: f64,
    mu: f64,
) -> Result<Gradient> {
    check_beta(beta)?;
    let z = ascdro_direction(oracle, state, x, mu);
    let x_old = x.clone();
    let dom = oracle.problem.domain();
    projected_step(x, &z, eta, &dom);
    let i = oracle.draw();
    oracle.eval_pair(i, x, &x_old)?;
    let keep = 1.0 - beta;
    let (a, b) = (&oracle.a, &oracle.b);
    state.s = a.g + keep * (state.s - b.g);
    state.u = a.grad_lambda_g + keep * (state.u - b.grad_lambda_g);
    for ((v, new), old) in state.v.iter_mut().zip(&a.grad_w_g).zip(&b.grad_w_g) {
        *v = new + keep * (*v - old);
    }
    check_finite(state, x)?;
    Ok(z)
}

/// The direction the next step of `algo` would take from `state` at `x`, without counting clamps.
pub(crate) fn peek_direction(
    algo: Algorithm,
    state: &EstimatorState,
    x: &Point,
    rho: f64,
    mu: f64,
) -> Gradient {
    match algo {
        Algorithm::Scdro => Gradient {
            w: state.v.clone(),
            lambda: state.u,
        },
        Algorithm::Ascdro => assemble(state, x, rho, mu).0,
    }
}

/// The tracker's estimate of `(g, ∇_w g, ∂_λ g)` at `x`. ASCDRO stores it
/// directly; for SCDRO it is recovered by inverting
/// `v = (λ/s)∇_w g + μw` and `u = (λ/s)∂_λ g + log s + ρ + μλ`.
pub fn implied_inner(
    algo: Algorithm,
    state: &EstimatorState,
    x: &Point,
    rho: f64,
    mu: f64,
) -> InnerExact {
    match algo {
        Algorithm::Ascdro => InnerExact {
            g: state.s,
            grad_w: state.v.clone(),
            grad_lambda: state.u,
        },
        Algorithm::Scdro => {
            let sc = state.s.max(1.0);
            let inv = sc / x.lambda;
            let grad_w = state
                .v
                .iter()
                .zip(&x.w)
                .map(|(v, w)| (v - mu * w) * inv)
                .collect();
            let grad_lambda = (state.u - sc.ln() - rho - mu * x.lambda) * inv;
            InnerExact {
                g: state.s,
                grad_w,
                grad_lambda,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, LabelSet};
    use crate::loss::LossModel;

    // Two 1-d samples (a, y) = (1, +1), (-2, +1); R = 2, ρ = 0.5, λ0 = 0.1.
    fn tiny() -> DroProblem {
        let data = Dataset::new(vec![1.0, -2.0], vec![1, 1], 1, LabelSet::Signed).unwrap();
        DroProblem::new(data, LossModel::Logistic, 0.5, 0.1, 2.0).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn moving_average_arithmetic() {
        let beta = 0.5;
        assert_eq!((1.0 - beta) * 1.0 + beta * 3.0, 2.0);
    }

    #[test]
    fn init_with_zero_losses() {
        // Margin 50: the loss is below 1e-21, so g rounds to 1 exactly.
        let data = Dataset::new(vec![50.0], vec![1], 1, LabelSet::Signed).unwrap();
        let p = DroProblem::new(data, LossModel::Logistic, 0.3, 0.5, 1.0).unwrap();
        let x = Point::new(vec![1.0], 1.0);
        let mut o = Oracle::new(&p, 1);
        let st = scdro_init(&mut o, &x, 3, 0.0).unwrap();
        assert!((st.s - 1.0).abs() < 1e-20);
        let grad_l = p.loss().grad(p.data(), 0, &x.w).unwrap()[0];
        assert!(close(st.v[0], grad_l));
        assert!((st.u - 0.3).abs() < 1e-20);
        assert_eq!(o.calls(), 3);
    }

    #[test]
    fn full_batch_init_is_exact() {
        let p = tiny();
        let x = Point::new(vec![0.3], 0.7);
        // batch = n draws with replacement is not the full sum; check against
        // the mean of the indices actually drawn.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let idx: Vec<usize> = (0..4).map(|_| rng.random_range(0..2)).collect();
        let mean_g = idx.iter().map(|&i| p.g_value(i, &x).unwrap()).sum::<f64>() / 4.0;
        let mut o = Oracle::new(&p, 9);
        let st = ascdro_init(&mut o, &x, 4).unwrap();
        assert!(close(st.s, mean_g));
    }

    // Expected values below were produced by a separate hand computation
    // (closed-form logistic loss, plain floating point) before this code existed.
    #[test]
    fn scdro_hand_trace() {
        let p = tiny();
        let mut x = Point::new(vec![0.5], 1.0);
        let mut st = EstimatorState {
            s: 1.5,
            v: vec![-0.2],
            u: 0.4,
        };
        let mut o = Oracle::new(&p, 3);
        let mut probe = ChaCha8Rng::seed_from_u64(3);
        let i: usize = probe.random_range(0..2);
        let z = scdro_step(&mut o, &mut st, &mut x, 0.25, 0.1, 0.0).unwrap();
        assert_eq!(
            z,
            Gradient {
                w: vec![-0.2],
                lambda: 0.4
            }
        );
        assert!(close(x.w[0], 0.52) && close(x.lambda, 0.96));
        let want = [
            [1.531455542968974, -0.24895674594416556, 0.40256433638517897],
            [2.1373862494038303, 0.5499217729039533, -0.04756178072967998],
        ][i];
        assert!(close(st.s, want[0]), "s {} vs {}", st.s, want[0]);
        assert!(close(st.v[0], want[1]), "v {} vs {}", st.v[0], want[1]);
        assert!(close(st.u, want[2]), "u {} vs {}", st.u, want[2]);
        assert_eq!(o.calls(), 1);
    }

    #[test]
    fn ascdro_hand_trace() {
        let p = tiny();
        let mut x = Point::new(vec![0.5], 1.0);
        let mut st = EstimatorState {
            s: 1.5,
            v: vec![-0.2],
            u: -0.4,
        };
        let mut o = Oracle::new(&p, 5);
        let mut probe = ChaCha8Rng::seed_from_u64(5);
        let i: usize = probe.random_range(0..2);
        let z = ascdro_step(&mut o, &mut st, &mut x, 0.25, 0.1, 0.0).unwrap();
        let zw = -0.2 / 1.5;
        let zl = -0.4 / 1.5 + 1.5f64.ln() + 0.5;
        assert!(close(z.w[0], zw) && close(z.lambda, zl));
        assert!(close(x.w[0], 0.5 - 0.1 * zw) && close(x.lambda, 1.0 - 0.1 * zl));
        let want = [
            [1.5705923161097857, -0.3552353232798206, -0.6122353709216617],
            [2.4890638735404704, 2.304987180218129, -2.9537886919286285],
        ][i];
        assert!(close(st.s, want[0]), "s {} vs {}", st.s, want[0]);
        assert!(close(st.v[0], want[1]), "v {} vs {}", st.v[0], want[1]);
        assert!(close(st.u, want[2]), "u {} vs {}", st.u, want[2]);
        assert_eq!(o.calls(), 2);
    }

    #[test]
    fn beta_one_is_plug_in() {
        let p = tiny();
        let mut x = Point::new(vec![0.1], 0.8);
        let mut st = EstimatorState {
            s: 7.0,
            v: vec![3.0],
            u: 2.0,
        };
        let mut o = Oracle::new(&p, 11);
        let mut probe = ChaCha8Rng::seed_from_u64(11);
        let i: usize = probe.random_range(0..2);
        ascdro_step(&mut o, &mut st, &mut x, 1.0, 0.05, 0.0).unwrap();
        let ev = p.sample_eval(i, &x).unwrap();
        assert_eq!(st.s, ev.g);
        assert_eq!(st.v, ev.grad_w_g);
        assert_eq!(st.u, ev.grad_lambda_g);

        let mut x = Point::new(vec![0.1], 0.8);
        let mut st = EstimatorState {
            s: 7.0,
            v: vec![3.0],
            u: 2.0,
        };
        let mut o = Oracle::new(&p, 11);
        scdro_step(&mut o, &mut st, &mut x, 1.0, 0.05, 0.0).unwrap();
        let ev = p.sample_eval(i, &x).unwrap();
        assert_eq!(st.s, ev.g);
        let gf = x.lambda / ev.g;
        assert!(close(st.v[0], gf * ev.grad_w_g[0]));
        assert!(close(st.u, gf * ev.grad_lambda_g + ev.g.ln() + 0.5));
    }

    #[test]
    fn storm_fixed_point() {
        // η = 0 keeps x in place; with v = ∇g_i for the only sample, v stays.
        let data = Dataset::new(vec![0.7], vec![-1], 1, LabelSet::Signed).unwrap();
        let p = DroProblem::new(data, LossModel::Logistic, 0.5, 0.1, 2.0).unwrap();
        let mut x = Point::new(vec![0.4], 0.9);
        let ev = p.sample_eval(0, &x).unwrap();
        let mut st = EstimatorState {
            s: ev.g,
            v: ev.grad_w_g.clone(),
            u: ev.grad_lambda_g,
        };
        let mut o = Oracle::new(&p, 0);
        ascdro_step(&mut o, &mut st, &mut x, 0.3, 0.0, 0.0).unwrap();
        assert_eq!(st.v, ev.grad_w_g);
        assert_eq!(st.s, ev.g);
    }

    #[test]
    fn implied_inner_inverts_scdro_tracker() {
        let p = tiny();
        let x = Point::new(vec![0.3], 0.6);
        let mut o = Oracle::new(&p, 2);
        let st = scdro_init(&mut o, &x, 50, 0.2).unwrap();
        let mut o2 = Oracle::new(&p, 2);
        let raw = ascdro_init(&mut o2, &x, 50).unwrap();
        let imp = implied_inner(Algorithm::Scdro, &st, &x, 0.5, 0.2);
        assert!(close(imp.g, raw.s));
        assert!(close(imp.grad_w[0], raw.v[0]));
        assert!(close(imp.grad_lambda, raw.u));
    }

    #[test]
    fn rejects_bad_beta() {
        let p = tiny();
        let mut x = Point::new(vec![0.0], 1.0);
        let mut st = EstimatorState {
            s: 1.0,
            v: vec![0.0],
            u: 0.0,
        };
        let mut o = Oracle::new(&p, 0);
        assert!(scdro_step(&mut o, &mut st, &mut x, 0.0, 0.1, 0.0).is_err());
        assert!(ascdro_step(&mut o, &mut st, &mut x, 1.5, 0.1, 0.0).is_err());
    }
}
