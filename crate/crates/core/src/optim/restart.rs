//! Stagewise restarts on `F_μ = F + μ‖x‖²/2`.

use rand::Rng;

use super::run::{init_state, require_feasible, run_stage, Recorder, StageSpec};
use super::{Algorithm, Oracle, RunResult, StageEnd, StepRule};
use crate::error::{Error, Result};
use crate::objective::{DroProblem, Point};

/// Parameters of one stage; `eps` is the gap target `ε_k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageParams {
    pub eps: f64,
    pub beta: f64,
    pub eta: f64,
    pub iters: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestartOptions {
    pub mu: f64,
    pub init_batch: usize,
    pub eval_every: u64,
    pub seed: u64,
    pub track_kappa: bool,
    pub kappa_every: u64,
}

impl Default for RestartOptions {
    fn default() -> Self {
        RestartOptions {
            mu: 1e-3,
            init_batch: 1,
            eval_every: 1000,
            seed: 0,
            track_kappa: false,
            kappa_every: 1,
        }
    }
}

/// Stage parameters from the convergence lemmas, with `ε_k = ε₁/2^{k−1}`.
///
/// Moving-average inner loop (`c = 384 L²`):
/// `β = min(με/(cσ²), 1/c)`, `η = min(με/(12cL²σ²), 1/(12cL²))`,
/// `T = max(384cL²σ²/(μ²ε), 384cL²/μ)`.
///
/// STORM inner loop (`c = 768 L²`): `β` as above,
/// `η = min(√(με)/(24cLσ²), 1/(24cL²))`,
/// `T = max(192cLσ/(μ^{3/2}√ε), 192cL²σ²/(με), 192cL²/μ)`.
///
/// Fails with [`Error::BudgetExceeded`] at the first stage whose cumulative
/// iteration count passes `budget`.
pub fn theory_plan(
    inner: Algorithm,
    mu: f64,
    eps1: f64,
    stages: usize,
    sigma_sq: f64,
    l_f: f64,
    budget: u64,
) -> Result<Vec<StageParams>> {
    for (name, v) in [("μ", mu), ("ε₁", eps1), ("σ²", sigma_sq), ("L_F", l_f)] {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    if stages == 0 {
        return Err(Error::InvalidParameter("need at least one stage".into()));
    }
    let l2 = l_f * l_f;
    let sigma = sigma_sq.sqrt();
    let mut plan = Vec::with_capacity(stages);
    let mut total = 0.0;
    for k in 0..stages {
        let eps = eps1 / 2f64.powi(k as i32);
        let (beta, eta, t) = match inner {
            Algorithm::Scdro => {
                let c = 384.0 * l2;
                let beta = (mu * eps / (c * sigma_sq)).min(1.0 / c);
                let eta = (mu * eps / (12.0 * c * l2 * sigma_sq)).min(1.0 / (12.0 * c * l2));
                let t = (384.0 * c * l2 * sigma_sq / (mu * mu * eps)).max(384.0 * c * l2 / mu);
                (beta, eta, t)
            }
            Algorithm::Ascdro => {
                let c = 768.0 * l2;
                let beta = (mu * eps / (c * sigma_sq)).min(1.0 / c);
                let eta =
                    ((mu * eps).sqrt() / (24.0 * c * l_f * sigma_sq)).min(1.0 / (24.0 * c * l2));
                let t = (192.0 * c * l_f * sigma / (mu.powf(1.5) * eps.sqrt()))
                    .max(192.0 * c * l2 * sigma_sq / (mu * eps))
                    .max(192.0 * c * l2 / mu);
                (beta, eta, t)
            }
        };
        let t = t.ceil();
        total += t;
        if !(total <= budget as f64) {
            return Err(Error::BudgetExceeded {
                stage: k + 1,
                required: t,
                budget,
            });
        }
        plan.push(StageParams {
            eps,
            beta: beta.min(1.0),
            eta,
            iters: t as u64,
        });
    }
    Ok(plan)
}

/// Same halving structure with user constants: `β_k = β₁/2^{k−1}`,
/// `T_k = T₁·2^{k−1}`, and `η_k = η₁/2^{k−1}` for the moving-average loop or
/// `η₁/2^{(k−1)/2}` for the STORM loop.
pub fn practical_plan(
    inner: Algorithm,
    eps1: f64,
    beta1: f64,
    eta1: f64,
    iters1: u64,
    stages: usize,
) -> Result<Vec<StageParams>> {
    if !(beta1 > 0.0 && beta1 <= 1.0) || !(eta1 > 0.0) || iters1 == 0 || stages == 0 {
        return Err(Error::InvalidParameter(format!(
            "practical schedule needs β₁ ∈ (0,1], η₁ > 0, T₁ ≥ 1 and K ≥ 1 (got {beta1}, {eta1}, {iters1}, {stages})"
        )));
    }
    Ok((0..stages)
        .map(|k| {
            let h = 2f64.powi(k as i32);
            let eta = match inner {
                Algorithm::Scdro => eta1 / h,
                Algorithm::Ascdro => eta1 / h.sqrt(),
            };
            StageParams {
                eps: eps1 / h,
                beta: beta1 / h,
                eta,
                iters: iters1 << k,
            }
        })
        .collect())
}

/// Initial batch `⌈4/(με₁)⌉` capped at `n`.
pub fn theory_init_batch(mu: f64, eps1: f64, n: usize) -> usize {
    let b = (4.0 / (mu * eps1)).ceil();
    if b.is_finite() && b < n as f64 {
        (b as usize).max(1)
    } else {
        n
    }
}

/// Runs the stages of `plan` back to back on `F_μ`. Each stage starts from
/// the previous stage's final iterate and tracker state.
pub fn restart_run(
    problem: &DroProblem,
    x1: &Point,
    inner: Algorithm,
    plan: &[StageParams],
    opts: &RestartOptions,
) -> Result<RunResult> {
    require_feasible(problem, x1)?;
    if !(opts.mu > 0.0) || !opts.mu.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "restarts need μ > 0, got {}",
            opts.mu
        )));
    }
    let Some(last) = plan.last() else {
        return Err(Error::InvalidParameter("empty stage plan".into()));
    };
    for st in plan {
        StepRule::Constant {
            beta: st.beta,
            eta: st.eta,
        }
        .validate()?;
        if st.iters == 0 {
            return Err(Error::InvalidParameter("stage with zero iterations".into()));
        }
    }
    let mut oracle = Oracle::new(problem, opts.seed);
    let tau = oracle.rng().random_range(1..=last.iters);
    let mut rec = Recorder::new(problem, opts.mu, opts.eval_every);
    let mut x = x1.clone();
    let mut state = init_state(inner, &mut oracle, &x, opts.init_batch, opts.mu)?;
    rec.log(&x, oracle.calls(), 0, None)?;
    let mut ends = Vec::with_capacity(plan.len());
    let mut sampled = x.clone();
    for (k, st) in plan.iter().enumerate() {
        let spec = StageSpec {
            algo: inner,
            rule: StepRule::Constant {
                beta: st.beta,
                eta: st.eta,
            },
            iters: st.iters,
            stage: k + 1,
            tau: if k + 1 == plan.len() { tau } else { 0 },
            kappa_every: opts.kappa_every,
            track_kappa: opts.track_kappa,
        };
        let s = run_stage(&spec, &mut oracle, &mut rec, &mut state, &mut x)?;
        if k + 1 == plan.len() {
            sampled = s;
        }
        let row = rec.metrics.last().expect("stage end is always logged");
        ends.push(StageEnd {
            stage: k + 1,
            iter: rec.iter,
            oracle_calls: oracle.calls(),
            f: row.f,
            f_mu: row.f_mu.expect("μ > 0"),
            point: x.clone(),
        });
    }
    super::run::finish(oracle, rec, x, sampled, tau, Some(state), ends)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_imbalanced;
    use crate::loss::LossModel;
    use crate::optim::reference::reference_optimum;

    #[test]
    fn practical_halving() {
        let p = practical_plan(Algorithm::Ascdro, 1.0, 0.4, 0.2, 100, 3).unwrap();
        assert_eq!(
            p.iter().map(|s| s.eps).collect::<Vec<_>>(),
            vec![1.0, 0.5, 0.25]
        );
        assert_eq!(
            p.iter().map(|s| s.iters).collect::<Vec<_>>(),
            vec![100, 200, 400]
        );
        assert!((p[2].eta - 0.1).abs() < 1e-15 && (p[2].beta - 0.1).abs() < 1e-15);
        let q = practical_plan(Algorithm::Scdro, 1.0, 0.4, 0.2, 100, 3).unwrap();
        assert!((q[2].eta - 0.05).abs() < 1e-15);
    }

    #[test]
    fn theory_constants_plug_in() {
        // μ = 1, ε₁ = 1, σ² = 1, L = 1: c = 384, β = 1/384, η = 1/4608, T = 147456
        let p = theory_plan(Algorithm::Scdro, 1.0, 1.0, 1, 1.0, 1.0, u64::MAX).unwrap();
        assert_eq!(p[0].iters, 147_456);
        assert!((p[0].beta - 1.0 / 384.0).abs() < 1e-18);
        assert!((p[0].eta - 1.0 / 4608.0).abs() < 1e-18);
        // c = 768: η = 1/18432, T = 147456
        let q = theory_plan(Algorithm::Ascdro, 1.0, 1.0, 1, 1.0, 1.0, u64::MAX).unwrap();
        assert_eq!(q[0].iters, 147_456);
        assert!((q[0].eta - 1.0 / 18432.0).abs() < 1e-18);
    }

    #[test]
    fn theory_plan_reports_budget() {
        let e = theory_plan(Algorithm::Scdro, 1e-3, 0.1, 3, 2.0, 50.0, 1_000_000).unwrap_err();
        match e {
            Error::BudgetExceeded {
                stage,
                required,
                budget,
            } => {
                assert_eq!(stage, 1);
                assert!(required > 1e6);
                assert_eq!(budget, 1_000_000);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn init_batch_rule() {
        assert_eq!(theory_init_batch(0.1, 10.0, 100), 4);
        assert_eq!(theory_init_batch(1e-4, 1.0, 100), 100);
    }

    #[test]
    fn one_practical_stage_halves_the_gap() {
        let data = gen_imbalanced(150, 50, 5, 2.0, 0.0, 8).unwrap();
        let p = DroProblem::new(data, LossModel::Logistic, 0.5, 1e-3, 3.0).unwrap();
        let mu = 1e-2;
        let reference = reference_optimum(&p, mu, 1e-10, 200_000).unwrap();
        let x1 = Point::new(vec![0.0; 5], 1.0);
        let gap0 = p.f_mu_exact(&x1, mu).unwrap() - reference.value;
        let plan = practical_plan(Algorithm::Scdro, gap0, 0.01, 0.001, 20_000, 1).unwrap();
        let opts = RestartOptions {
            mu,
            eval_every: 1000,
            seed: 1,
            ..Default::default()
        };
        let r = restart_run(&p, &x1, Algorithm::Scdro, &plan, &opts).unwrap();
        let gap1 = r.stage_ends[0].f_mu - reference.value;
        assert!(gap1 <= 0.5 * gap0, "gap {gap0} -> {gap1}");
    }
}
