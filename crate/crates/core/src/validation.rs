//! Brute-force oracles for the checkable mathematics: the dual identity,
//! the bound on the optimal temperature, exact gradients, the KL inequality
//! of the regularised objective, sampled smoothness and the STORM tracking
//! error.
//!
//! Every check returns a [`CheckReport`]; [`run_suite`] runs the standard set
//! with one RNG stream per check derived from a root seed and the check name.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::data::{Dataset, LabelSet};
use crate::error::{Error, Result};
use crate::geometry::{dist_sq_to_subdifferential, project};
use crate::linalg::log_sum_exp;
use crate::loss::{random_in_ball, random_on_sphere, LossModel};
use crate::objective::{f_from_losses, DroProblem, Gradient, Point};
use crate::optim::reference::{golden_section, reference_optimum};
use crate::optim::{run_tracker, Algorithm, RunOptions, StepRule, TrackingSample};

pub const DUAL_TOL: f64 = 1e-10;
pub const ITERATIVE_TOL: f64 = 1e-6;
pub const LAMBDA_BOUND_TOL: f64 = 1e-6;
pub const GRADIENT_TOL: f64 = 1e-5;
pub const FD_STEP: f64 = 1e-6;
pub const KL_SLACK: f64 = 1e-9;
pub const MIRROR_ITERS: usize = 100_000;
pub const DEFAULT_TRACE_CAP: usize = 5000;

/// Outcome of one check. `worst_error` is compared against `tolerance`;
/// `witness` is the input that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub worst_error: f64,
    pub tolerance: f64,
    pub trials: usize,
    /// Necessary-condition sampling rather than a proof.
    pub sampled: bool,
    pub witness: serde_json::Value,
}

/// One line of the suite output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportLine {
    pub name: String,
    pub passed: bool,
    pub worst_error: f64,
    pub tolerance: f64,
    pub trials: usize,
    pub sampled: bool,
    pub witness_digest: String,
}

impl CheckReport {
    fn new(name: &str, tolerance: f64, sampled: bool) -> Self {
        CheckReport {
            name: name.into(),
            passed: true,
            worst_error: f64::NEG_INFINITY,
            tolerance,
            trials: 0,
            sampled,
            witness: serde_json::Value::Null,
        }
    }

    fn record(&mut self, err: f64, witness: impl FnOnce() -> serde_json::Value) {
        self.trials += 1;
        // NaN counts as the worst possible outcome
        if err.is_nan() || err > self.worst_error {
            self.worst_error = if err.is_nan() { f64::INFINITY } else { err };
            self.witness = witness();
        }
        self.passed = self.worst_error <= self.tolerance;
    }

    /// Combines the reports of the same check run on several problems.
    pub fn merge(mut self, other: CheckReport) -> CheckReport {
        self.trials += other.trials;
        if other.worst_error > self.worst_error {
            self.worst_error = other.worst_error;
            self.witness = other.witness;
        }
        self.passed = self.worst_error <= self.tolerance;
        self
    }

    pub fn witness_digest(&self) -> String {
        let bytes = serde_json::to_vec(&self.witness).expect("JSON values serialise");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn line(&self) -> ReportLine {
        ReportLine {
            name: self.name.clone(),
            passed: self.passed,
            worst_error: self.worst_error,
            tolerance: self.tolerance,
            trials: self.trials,
            sampled: self.sampled,
            witness_digest: self.witness_digest(),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.line()).expect("report lines serialise")
    }
}

fn point_json(x: &Point) -> serde_json::Value {
    json!({ "w": x.w, "lambda": x.lambda })
}

/// Random logistic problem with `2 ≤ n ≤ n_max`, `2 ≤ d ≤ d_max`, Gaussian
/// features, `ρ ∈ [0.1, 1]`, `R ∈ [0.5, 3]` and `λ0 = 1e−3`.
pub fn random_problem<R: Rng + ?Sized>(
    rng: &mut R,
    n_max: usize,
    d_max: usize,
) -> Result<DroProblem> {
    let n = rng.random_range(2..=n_max.max(2));
    let d = rng.random_range(2..=d_max.max(2));
    let features: Vec<f64> = (0..n * d)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    let labels: Vec<i32> = (0..n)
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect();
    let data = Dataset::new(features, labels, d, LabelSet::Signed)?;
    let rho = rng.random_range(0.1..=1.0);
    let radius = rng.random_range(0.5..=3.0);
    DroProblem::new(data, LossModel::Logistic, rho, 1e-3, radius)
}

/// Uniform `w` in the ball; `λ` log-uniform on `[λ0, λ̃]` half the time and
/// uniform otherwise.
pub fn random_feasible<R: Rng + ?Sized>(rng: &mut R, problem: &DroProblem) -> Point {
    let dom = problem.domain();
    let w = random_in_ball(rng, problem.dim_w(), dom.radius);
    let lambda = if rng.random::<bool>() {
        (rng.random_range(dom.lambda0.ln()..=dom.lambda_tilde.ln())).exp()
    } else {
        rng.random_range(dom.lambda0..=dom.lambda_tilde)
    };
    project(&Point::new(w, lambda), &dom)
}

/// `Σ p_i ℓ_i − λ D(p, 1/n)` for `p` given by its logarithms.
fn dual_value(losses: &[f64], log_p: &[f64], lambda: f64) -> f64 {
    let ln_n = (losses.len() as f64).ln();
    losses
        .iter()
        .zip(log_p)
        .map(|(l, lp)| {
            let p = lp.exp();
            if p > 0.0 {
                p * l - lambda * p * (lp + ln_n)
            } else {
                0.0
            }
        })
        .sum()
}

/// Entropic mirror ascent on `Σ p_i ℓ_i − λ D(p, 1/n)` from the uniform
/// distribution with step `0.1/t`, carried out on unnormalised log-weights.
/// Returns the value at the final iterate.
pub fn mirror_ascent_inner(losses: &[f64], lambda: f64, iters: usize) -> f64 {
    let n = losses.len();
    let ln_n = (n as f64).ln();
    let mut a = vec![0.0; n];
    for t in 1..=iters {
        let eta = 0.1 / t as f64;
        // the log-normaliser is a common shift of every entry and cancels in the softmax
        for (ai, l) in a.iter_mut().zip(losses) {
            *ai += eta * (l - lambda * (*ai + ln_n + 1.0));
        }
        if t % 1000 == 0 {
            let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            a.iter_mut().for_each(|v| *v -= m);
        }
    }
    let z = log_sum_exp(&a);
    let log_p: Vec<f64> = a.iter().map(|v| v - z).collect();
    dual_value(losses, &log_p, lambda)
}

/// Closed form against the explicit inner maximum at `p*`, plus the iterative
/// oracle, which may not exceed the closed form. The second report carries the
/// excess `iterative − analytic`.
pub fn check_dual_equivalence<R: Rng + ?Sized>(
    problem: &DroProblem,
    trials: usize,
    rng: &mut R,
    mirror_iters: usize,
) -> Result<(CheckReport, CheckReport)> {
    let mut exact = CheckReport::new("dual_equivalence", DUAL_TOL, false);
    let mut iterative = CheckReport::new("dual_iterative_oracle", ITERATIVE_TOL, false);
    for _ in 0..trials {
        let x = random_feasible(rng, problem);
        let losses = problem.losses(&x.w)?;
        let lhs = f_from_losses(&losses, x.lambda, 0.0);
        let ps = problem.p_star(&x)?;
        let rhs = dual_value(&losses, &ps.log_probs, x.lambda);
        exact.record(
            (lhs - rhs).abs(),
            || json!({ "x": point_json(&x), "lhs": lhs, "rhs": rhs }),
        );
        if mirror_iters > 0 {
            let it = mirror_ascent_inner(&losses, x.lambda, mirror_iters);
            iterative.record(
                it - rhs,
                || json!({ "x": point_json(&x), "iterative": it, "analytic": rhs }),
            );
        }
    }
    Ok((exact, iterative))
}

/// Golden-section minimiser of `λ ↦ F(w, λ)` over `[λ0, 10λ̃]` against `λ̃`.
/// The error is `λ* − λ̃`.
pub fn check_lambda_bound<R: Rng + ?Sized>(
    problem: &DroProblem,
    trials: usize,
    rng: &mut R,
) -> Result<CheckReport> {
    let dom = problem.domain();
    let mut rep = CheckReport::new("lambda_bound", LAMBDA_BOUND_TOL, false);
    for _ in 0..trials {
        let w = random_in_ball(rng, problem.dim_w(), dom.radius);
        let losses = problem.losses(&w)?;
        let (lstar, _) = golden_section(
            |l| Ok(f_from_losses(&losses, l, problem.rho())),
            dom.lambda0,
            10.0 * dom.lambda_tilde,
            1e-10,
        )?;
        rep.record(
            lstar - dom.lambda_tilde,
            || json!({ "w": w, "lambda_star": lstar, "lambda_tilde": dom.lambda_tilde }),
        );
    }
    Ok(rep)
}

/// Central differences of `F` (or `F_μ`) with step `h` at interior points.
pub fn finite_difference_grad(
    problem: &DroProblem,
    x: &Point,
    mu: f64,
    h: f64,
) -> Result<Gradient> {
    let f = |v: &[f64]| -> Result<f64> {
        let p = Point::from_slice(v);
        Ok(problem.f_unconstrained(&p.w, p.lambda)? + 0.5 * mu * p.norm_sq())
    };
    let mut v = x.to_vec();
    let mut out = Vec::with_capacity(v.len());
    for j in 0..v.len() {
        let c = v[j];
        v[j] = c + h;
        let fp = f(&v)?;
        v[j] = c - h;
        let fm = f(&v)?;
        v[j] = c;
        out.push((fp - fm) / (2.0 * h));
    }
    let lambda = out.pop().expect("λ coordinate");
    Ok(Gradient { w: out, lambda })
}

/// `‖fd − g‖ / max(‖g‖, 1)`: relative where the gradient is large, absolute
/// near stationary points.
pub fn gradient_error(fd: &Gradient, exact: &Gradient) -> f64 {
    fd.dist(exact) / exact.norm().max(1.0)
}

/// Exact gradients of `F` and `F_μ` against central differences at random
/// points kept `2h` inside the domain.
pub fn check_gradients<R: Rng + ?Sized>(
    problem: &DroProblem,
    trials: usize,
    rng: &mut R,
) -> Result<CheckReport> {
    let dom = problem.domain();
    let mut rep = CheckReport::new("gradients", GRADIENT_TOL, false);
    for _ in 0..trials {
        let w = random_in_ball(rng, problem.dim_w(), dom.radius - 2.0 * FD_STEP);
        let lambda =
            rng.random_range(dom.lambda0 + 2.0 * FD_STEP..=dom.lambda_tilde - 2.0 * FD_STEP);
        let x = Point::new(w, lambda);
        let mu = if rng.random::<bool>() {
            0.0
        } else {
            rng.random_range(0.0..1.0)
        };
        let exact = problem.grad_f_mu_exact(&x, mu)?;
        let fd = finite_difference_grad(problem, &x, mu, FD_STEP)?;
        let err = gradient_error(&fd, &exact);
        rep.record(
            err,
            || json!({ "x": point_json(&x), "mu": mu, "exact": exact.to_vec(), "fd": fd.to_vec() }),
        );
    }
    Ok(rep)
}

/// Points for the KL check: a third interior, a third with `w` on the sphere,
/// a third with `λ` at one of its bounds.
fn kl_point<R: Rng + ?Sized>(rng: &mut R, problem: &DroProblem) -> Point {
    let dom = problem.domain();
    let mut x = random_feasible(rng, problem);
    match rng.random_range(0..3) {
        0 => {}
        1 => x.w = random_on_sphere(rng, problem.dim_w(), dom.radius),
        _ => {
            x.lambda = if rng.random::<bool>() {
                dom.lambda0
            } else {
                dom.lambda_tilde
            }
        }
    }
    x
}

/// `dist(0, ∂F̄_μ(x))² + slack ≥ 2μ(F_μ(x) − min F_μ)` at random feasible
/// points. The error is `2μ·gap − dist²`; the minimum comes from a projected
/// gradient solve to gradient-mapping norm `1e−10`.
pub fn check_kl_inequality<R: Rng + ?Sized>(
    problem: &DroProblem,
    mu: f64,
    trials: usize,
    rng: &mut R,
) -> Result<CheckReport> {
    if !problem.loss().is_convex() {
        return Err(Error::NonConvexModel);
    }
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "the KL check needs μ > 0, got {mu}"
        )));
    }
    let reference = reference_optimum(problem, mu, 1e-10, 1_000_000)?;
    let dom = problem.domain();
    let mut rep = CheckReport::new("kl_inequality", KL_SLACK, true);
    for _ in 0..trials {
        let x = kl_point(rng, problem);
        let (f, g) = problem.value_and_grad_mu(&x, mu)?;
        let d2 = dist_sq_to_subdifferential(&x, &g, &dom)?;
        let rhs = 2.0 * mu * (f - reference.value);
        rep.record(
            rhs - d2,
            || json!({ "x": point_json(&x), "dist_sq": d2, "two_mu_gap": rhs }),
        );
    }
    Ok(rep)
}

/// Largest sampled `‖∇F(a) − ∇F(b)‖/‖a − b‖` as a fraction of the closed-form
/// `L_F` (tolerance 1). Half the pairs are antipodal on the sphere. When `L_F`
/// overflows the fraction is 0 and only the witness ratio is informative.
pub fn check_smoothness<R: Rng + ?Sized>(
    problem: &DroProblem,
    trials: usize,
    rng: &mut R,
) -> Result<CheckReport> {
    let dom = problem.domain();
    let l_f = problem.smoothness_constants().l_f;
    let mut rep = CheckReport::new("smoothness", 1.0, true);
    let mut best = (f64::NEG_INFINITY, serde_json::Value::Null);
    for _ in 0..trials {
        let (a, b) = if rng.random::<bool>() {
            let w = random_on_sphere(rng, problem.dim_w(), dom.radius);
            let lambda = random_feasible(rng, problem).lambda;
            (
                Point::new(w.clone(), lambda),
                Point::new(w.iter().map(|v| -v).collect(), lambda),
            )
        } else {
            (random_feasible(rng, problem), random_feasible(rng, problem))
        };
        let dx = a.dist(&b);
        let ratio = if dx == 0.0 {
            0.0
        } else {
            problem.grad_f_exact(&a)?.dist(&problem.grad_f_exact(&b)?) / dx
        };
        if ratio > best.0 {
            best = (
                ratio,
                json!({ "a": point_json(&a), "b": point_json(&b), "ratio": ratio, "l_f": l_f }),
            );
        }
        rep.trials += 1;
    }
    rep.worst_error = best.0 / l_f;
    rep.witness = best.1;
    rep.passed = rep.worst_error <= rep.tolerance;
    Ok(rep)
}

/// Per-iteration `‖ϰ_t‖²` of an ASCDRO run with exact full-batch targets.
pub fn storm_error_trace(
    problem: &DroProblem,
    x1: &Point,
    rule: StepRule,
    iters: u64,
    seed: u64,
    cap: usize,
) -> Result<Vec<TrackingSample>> {
    if problem.n() > cap {
        return Err(Error::TooLarge {
            n: problem.n(),
            cap,
        });
    }
    let opts = RunOptions {
        iters,
        eval_every: 0,
        seed,
        track_kappa: true,
        kappa_every: 1,
        ..Default::default()
    };
    Ok(run_tracker(problem, Algorithm::Ascdro, x1, rule, &opts)?
        .diag
        .tracking)
}

fn late_mean(trace: &[TrackingSample]) -> f64 {
    let tail = &trace[trace.len() / 2..];
    tail.iter().map(|s| s.kappa_sq).sum::<f64>() / tail.len() as f64
}

/// Late-run mean tracking error at `(β, η)` and at `(β/4, η/2)`, which keeps
/// `β ∝ η²`; the smaller steps must track better. The error is the ratio.
pub fn check_storm_contraction(
    problem: &DroProblem,
    x1: &Point,
    beta: f64,
    eta: f64,
    iters: u64,
    seeds: &[u64],
) -> Result<CheckReport> {
    let mut rep = CheckReport::new("storm_contraction", 1.0, true);
    let mut ratios = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let big = late_mean(&storm_error_trace(
            problem,
            x1,
            StepRule::Constant { beta, eta },
            iters,
            seed,
            DEFAULT_TRACE_CAP,
        )?);
        let small = late_mean(&storm_error_trace(
            problem,
            x1,
            StepRule::Constant {
                beta: beta / 4.0,
                eta: eta / 2.0,
            },
            iters,
            seed,
            DEFAULT_TRACE_CAP,
        )?);
        ratios.push((seed, small / big));
    }
    ratios.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (seed, med) = ratios[ratios.len() / 2];
    rep.trials = seeds.len();
    rep.worst_error = med;
    rep.witness = json!({ "median_seed": seed, "beta": beta, "eta": eta, "iters": iters });
    rep.passed = med <= 1.0;
    Ok(rep)
}

/// Independent stream for a named check.
pub fn check_rng(root_seed: u64, name: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(root_seed.to_le_bytes());
    h.update(name.as_bytes());
    let d = h.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&d[..32]);
    ChaCha8Rng::from_seed(seed)
}

/// Problem sizes for the suite.
#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub root_seed: u64,
    pub problems: usize,
    pub dual_points_per_problem: usize,
    pub mirror_iters: usize,
    pub lambda_pairs: usize,
    pub gradient_points: usize,
    pub kl_points: usize,
    pub kl_mu: f64,
    pub smoothness_pairs: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            root_seed: 0,
            problems: 20,
            dual_points_per_problem: 50,
            mirror_iters: MIRROR_ITERS,
            lambda_pairs: 100,
            gradient_points: 200,
            kl_points: 1000,
            kl_mu: 0.1,
            smoothness_pairs: 1000,
        }
    }
}

/// The convex logistic task used by the KL check (n = 200, d = 5).
pub fn kl_task(seed: u64) -> Result<DroProblem> {
    let data = crate::data::gen_imbalanced(180, 20, 5, 2.0, 0.0, seed)?;
    DroProblem::new(data, LossModel::Logistic, 0.5, 1e-3, 2.0)
}

fn dual_check(o: &SuiteOptions) -> Result<Vec<CheckReport>> {
    let mut rng = check_rng(o.root_seed, "dual_equivalence");
    let mut acc: Option<(CheckReport, CheckReport)> = None;
    for _ in 0..o.problems {
        let p = random_problem(&mut rng, 50, 6)?;
        let (a, b) =
            check_dual_equivalence(&p, o.dual_points_per_problem, &mut rng, o.mirror_iters)?;
        acc = Some(match acc {
            None => (a, b),
            Some((x, y)) => (x.merge(a), y.merge(b)),
        });
    }
    let (a, b) =
        acc.ok_or_else(|| Error::InvalidParameter("suite needs at least one problem".into()))?;
    Ok(if o.mirror_iters > 0 {
        vec![a, b]
    } else {
        vec![a]
    })
}

fn spread_check<F>(o: &SuiteOptions, name: &str, total: usize, mut f: F) -> Result<CheckReport>
where
    F: FnMut(&DroProblem, usize, &mut ChaCha8Rng) -> Result<CheckReport>,
{
    let mut rng = check_rng(o.root_seed, name);
    let problems = o.problems.max(1);
    let mut acc: Option<CheckReport> = None;
    for k in 0..problems {
        let share = total / problems + usize::from(k < total % problems);
        let p = random_problem(&mut rng, 50, 6)?;
        let r = f(&p, share, &mut rng)?;
        acc = Some(match acc {
            None => r,
            Some(a) => a.merge(r),
        });
    }
    Ok(acc.expect("at least one problem"))
}

/// Runs the standard checks in parallel. Deterministic for a fixed root seed.
pub fn run_suite(o: &SuiteOptions) -> Result<Vec<CheckReport>> {
    let jobs: Vec<&str> = vec![
        "dual_equivalence",
        "lambda_bound",
        "gradients",
        "kl_inequality",
        "smoothness",
        "storm_contraction",
    ];
    let results: Vec<Result<Vec<CheckReport>>> = jobs
        .par_iter()
        .map(|name| -> Result<Vec<CheckReport>> {
            match *name {
                "dual_equivalence" => dual_check(o),
                "lambda_bound" => Ok(vec![spread_check(o, name, o.lambda_pairs, |p, k, r| {
                    check_lambda_bound(p, k, r)
                })?]),
                "gradients" => Ok(vec![spread_check(
                    o,
                    name,
                    o.gradient_points,
                    check_gradients,
                )?]),
                "kl_inequality" => {
                    let mut rng = check_rng(o.root_seed, name);
                    let p = kl_task(o.root_seed)?;
                    Ok(vec![check_kl_inequality(
                        &p,
                        o.kl_mu,
                        o.kl_points,
                        &mut rng,
                    )?])
                }
                "smoothness" => Ok(vec![spread_check(
                    o,
                    name,
                    o.smoothness_pairs,
                    check_smoothness,
                )?]),
                _ => {
                    let p = kl_task(o.root_seed)?;
                    let x1 = Point::new(vec![0.0; p.dim_w()], 1.0);
                    Ok(vec![check_storm_contraction(
                        &p,
                        &x1,
                        0.01,
                        1e-3,
                        4000,
                        &[1, 2, 3, 4, 5],
                    )?])
                }
            }
        })
        .collect();
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::kl_divergence;
    use crate::optim::{ascdro_init, ascdro_step, Oracle};

    fn tiny(features: Vec<f64>, labels: Vec<i32>, d: usize) -> DroProblem {
        let data = Dataset::new(features, labels, d, LabelSet::Signed).unwrap();
        DroProblem::new(data, LossModel::Logistic, 0.5, 1e-3, 2.0).unwrap()
    }

    #[test]
    fn two_point_dual_identity() {
        // ℓ = (0, ln 3), λ = 1: p* = (1/4, 3/4), both sides equal ln 2
        let losses = [0.0, 3f64.ln()];
        let lhs = f_from_losses(&losses, 1.0, 0.0);
        let log_p = [0.25f64.ln(), 0.75f64.ln()];
        let rhs = dual_value(&losses, &log_p, 1.0);
        assert!((lhs - 2f64.ln()).abs() < 1e-15);
        assert!((rhs - 2f64.ln()).abs() < 1e-15);
        let kl = kl_divergence(&[0.25, 0.75]).unwrap();
        assert!((0.75 * 3f64.ln() - kl - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn uniform_losses_give_the_common_value() {
        // identical rows give identical losses
        let p = tiny(vec![0.3, -0.1, 0.3, -0.1, 0.3, -0.1], vec![1, 1, 1], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, b) = check_dual_equivalence(&p, 20, &mut rng, 2000).unwrap();
        assert!(a.passed && a.worst_error < 1e-14, "{}", a.worst_error);
        assert!(b.passed);
        let lr = check_lambda_bound(&p, 10, &mut rng).unwrap();
        // F increases in λ when all losses agree, so the minimiser is λ0
        let lstar = lr.witness["lambda_star"].as_f64().unwrap();
        assert!(lstar < 1e-3 + 1e-8, "{lstar}");
    }

    #[test]
    fn mirror_ascent_approaches_the_maximum_from_below() {
        let losses = [0.2, 1.0, 0.7, 0.05];
        let lambda = 0.8;
        let analytic = f_from_losses(&losses, lambda, 0.0);
        let short = mirror_ascent_inner(&losses, lambda, 100);
        let long = mirror_ascent_inner(&losses, lambda, 100_000);
        assert!(short <= analytic + 1e-12 && long <= analytic + 1e-12);
        assert!(analytic - long < analytic - short);
    }

    #[test]
    fn two_point_lambda_stress() {
        // losses 0 and C at the ball boundary stress the bound
        let p = tiny(vec![4.0, 0.0, -4.0, 0.0], vec![1, 1], 2);
        let dom = p.domain();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = check_lambda_bound(&p, 50, &mut rng).unwrap();
        assert!(r.passed, "{r:?}");
        let losses = p.losses(&[dom.radius, 0.0]).unwrap();
        let (l, _) = golden_section(
            |l| Ok(f_from_losses(&losses, l, 0.5)),
            dom.lambda0,
            10.0 * dom.lambda_tilde,
            1e-10,
        )
        .unwrap();
        assert!(l <= dom.lambda_tilde + 1e-6);
    }

    #[test]
    fn finite_differences_of_a_known_function() {
        // single sample, y = 1, x = (1, 0): F = λ(ℓ/λ) + λρ = ℓ + λρ exactly
        let p = tiny(vec![1.0, 0.0], vec![1], 2);
        let x = Point::new(vec![0.3, -0.2], 0.7);
        let fd = finite_difference_grad(&p, &x, 0.0, 1e-6).unwrap();
        let sig = 1.0 / (1.0 + 0.3f64.exp());
        assert!((fd.w[0] + sig).abs() < 1e-9 && fd.w[1].abs() < 1e-9);
        assert!((fd.lambda - 0.5).abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert!(check_gradients(&p, 20, &mut rng).unwrap().passed);
    }

    #[test]
    fn kl_check_is_tight_at_the_minimiser() {
        let p = kl_task(1).unwrap();
        let r = reference_optimum(&p, 0.1, 1e-10, 1_000_000).unwrap();
        let (f, g) = p.value_and_grad_mu(&r.point, 0.1).unwrap();
        let d2 = dist_sq_to_subdifferential(&r.point, &g, &p.domain()).unwrap();
        assert!(d2 < 1e-16 && (f - r.value).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rep = check_kl_inequality(&p, 0.1, 60, &mut rng).unwrap();
        assert!(rep.passed && rep.sampled, "{rep:?}");
    }

    #[test]
    fn kl_check_refuses_nonconvex_models() {
        let data = crate::data::gen_imbalanced(10, 5, 3, 2.0, 0.0, 1).unwrap();
        let p = DroProblem::new(
            data,
            LossModel::Mlp {
                hidden: 3,
                classes: 2,
            },
            0.5,
            0.1,
            2.0,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            check_kl_inequality(&p, 0.1, 5, &mut rng),
            Err(Error::NonConvexModel)
        ));
    }

    #[test]
    fn smoothness_of_identical_points_is_zero() {
        let p = tiny(vec![0.5, 0.5, -1.0, 0.2], vec![1, -1], 2);
        let x = Point::new(vec![0.1, 0.2], 1.0);
        assert_eq!(
            p.grad_f_exact(&x)
                .unwrap()
                .dist(&p.grad_f_exact(&x).unwrap()),
            0.0
        );
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = check_smoothness(&p, 200, &mut rng).unwrap();
        assert!(r.passed && r.sampled);
    }

    #[test]
    fn one_sample_plug_in_has_no_tracking_error() {
        let data = Dataset::new(vec![0.5, 1.0], vec![-1], 2, LabelSet::Signed).unwrap();
        let p = DroProblem::new(data, LossModel::Logistic, 0.5, 0.1, 1.0).unwrap();
        let x1 = Point::new(vec![0.1, 0.1], 0.5);
        let tr = storm_error_trace(
            &p,
            &x1,
            StepRule::Constant {
                beta: 1.0,
                eta: 0.05,
            },
            100,
            3,
            10,
        )
        .unwrap();
        assert_eq!(tr.len(), 101);
        assert!(tr.iter().all(|s| s.kappa_sq == 0.0));
        assert!(matches!(
            storm_error_trace(
                &p,
                &x1,
                StepRule::Constant {
                    beta: 1.0,
                    eta: 0.05
                },
                1,
                3,
                0
            ),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn frozen_point_error_decays_at_one_minus_beta() {
        // with η = 0 the STORM corrections vanish and s − g follows
        // e_{t+1} = (1−β)e_t + β(g_i − g), so E[e_t] = (1−β)^t e_1
        let p = kl_task(5).unwrap();
        let x = Point::new(vec![0.3, -0.2, 0.1, 0.0, 0.2], 0.8);
        let g = p.inner_exact(&x).unwrap().g;
        let beta = 0.05;
        let steps = 60;
        let runs = 4000;
        let mut mean = vec![0.0; steps + 1];
        for seed in 0..runs {
            let mut o = Oracle::new(&p, seed);
            let mut st = ascdro_init(&mut o, &x, 1).unwrap();
            let mut y = x.clone();
            mean[0] += (st.s - g) / runs as f64;
            for t in 1..=steps {
                ascdro_step(&mut o, &mut st, &mut y, beta, 0.0, 0.0).unwrap();
                mean[t] += (st.s - g) / runs as f64;
            }
        }
        // least-squares slope of log|E e_t| over the first 40 steps
        let pts: Vec<(f64, f64)> = (0..40).map(|t| (t as f64, mean[t].abs().ln())).collect();
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        assert!(
            (slope - (1.0 - beta).ln()).abs() < 0.25 * beta,
            "slope {slope}"
        );
    }

    #[test]
    fn reports_round_trip_and_merge() {
        let mut a = CheckReport::new("x", 1e-3, false);
        a.record(1e-4, || json!({ "w": [1.0, 2.0] }));
        let mut b = CheckReport::new("x", 1e-3, false);
        b.record(5e-3, || json!({ "w": [3.0] }));
        let m = a.clone().merge(b);
        assert!(!m.passed && m.trials == 2 && m.worst_error == 5e-3);
        let s = serde_json::to_string(&m).unwrap();
        let back: CheckReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.witness_digest(), m.witness_digest());
        let line: ReportLine = serde_json::from_str(&m.to_json_line()).unwrap();
        assert_eq!(line.witness_digest.len(), 64);
        assert!(a.passed && a.worst_error <= a.tolerance);
    }

    #[test]
    fn suite_is_deterministic() {
        let o = SuiteOptions {
            root_seed: 7,
            problems: 3,
            dual_points_per_problem: 5,
            mirror_iters: 500,
            lambda_pairs: 6,
            gradient_points: 6,
            kl_points: 20,
            smoothness_pairs: 20,
            ..Default::default()
        };
        let a = run_suite(&o).unwrap();
        let b = run_suite(&o).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 7);
        assert_ne!(
            check_rng(7, "a").random::<u64>(),
            check_rng(7, "b").random::<u64>()
        );
    }
}
