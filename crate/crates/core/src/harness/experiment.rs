//! Building a problem from a config, running it, and writing the metrics CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{AlgoKind, ExperimentConfig, LossKind, ScheduleKind};
use crate::data::{gen_imbalanced, load_dataset, DataFormat, Dataset};
use crate::error::{Error, Result};
use crate::geometry::project;
use crate::loss::LossModel;
use crate::objective::{DroProblem, Point};
use crate::optim::baselines::{
    baseline_plugin_minibatch_run, baseline_primal_dual_run, baseline_projected_sgd_run,
    BaselineOptions,
};
use crate::optim::schedule::{default_mu, estimate_local_smoothness, estimate_sigma_sq};
use crate::optim::{
    practical_plan, restart_run, run_tracker, theory_init_batch, theory_plan, Algorithm,
    MetricsRow, RestartOptions, RunOptions, RunResult, StepRule, Theorem2Params,
};

pub const CSV_HEADER: &str =
    "iter,oracle_calls,F,F_mu,dist_sq,step_residual,train_acc,stage,wall_ms";

/// A finished run plus the quantities the harness derived on the way.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub result: RunResult,
    pub test_accuracy: Option<f64>,
    pub sigma_sq: Option<f64>,
    pub smoothness: Option<f64>,
    pub mu: f64,
}

impl RunOutcome {
    pub fn summary_line(&self, algo: AlgoKind) -> String {
        let last = self
            .result
            .metrics
            .last()
            .expect("runs log at least one row");
        let mut s = format!(
            "{algo}: iters {} oracle_calls {} F {:.6} dist_sq {:.3e} train_acc {:.4}",
            self.result.iterations, self.result.oracle_calls, last.f, last.dist_sq, last.train_acc
        );
        if let Some(t) = self.test_accuracy {
            let _ = write!(s, " test_acc {t:.4}");
        }
        s
    }
}

fn load_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.data {
        Some(path) => load_dataset(
            path,
            cfg.format.unwrap_or_else(|| DataFormat::from_path(path)),
        ),
        None => {
            let s = &cfg.synthetic;
            gen_imbalanced(
                s.n_major,
                s.n_minor,
                s.dim,
                s.separation,
                s.label_noise,
                s.seed,
            )
        }
    }
}

/// Training problem and, when `holdout > 0`, the held-out rows.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<(DroProblem, Option<Dataset>)> {
    let data = load_data(cfg)?;
    let (train, test) = if cfg.holdout > 0.0 {
        let (a, b) = data.split(cfg.holdout, cfg.synthetic.seed)?;
        (a, Some(b))
    } else {
        (data, None)
    };
    let loss = match cfg.loss {
        LossKind::Logistic => LossModel::Logistic,
        LossKind::Mlp => LossModel::Mlp {
            hidden: cfg.hidden,
            classes: train.label_set().num_classes(),
        },
    };
    Ok((
        DroProblem::new(train, loss, cfg.rho, cfg.lambda0, cfg.radius)?,
        test,
    ))
}

/// `w = 0` for the linear model; small Gaussian weights for the network,
/// whose origin is a symmetric saddle. `λ` starts at `lambda1`, clamped.
pub fn start_point(cfg: &ExperimentConfig, problem: &DroProblem) -> Point {
    let d = problem.dim_w();
    let w = match cfg.loss {
        LossKind::Logistic => vec![0.0; d],
        LossKind::Mlp => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
            (0..d)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    0.1 * z
                })
                .collect()
        }
    };
    project(&Point::new(w, cfg.lambda1), &problem.domain())
}

fn sigma_sq(cfg: &ExperimentConfig, p: &DroProblem, x1: &Point) -> Result<f64> {
    match cfg.sigma_sq {
        Some(s) => Ok(s),
        None => estimate_sigma_sq(p, x1, 256, cfg.seed),
    }
}

/// Executes the configured algorithm. Writes the metrics CSV when `out` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let (problem, test) = build_problem(cfg)?;
    let x1 = start_point(cfg, &problem);
    let dom = problem.domain();
    let base = BaselineOptions {
        iters: cfg.iters,
        eval_every: cfg.eval_every,
        seed: cfg.seed,
    };
    let mut used_sigma = None;
    let mut used_l = None;
    let mut mu = 0.0;
    let result = match cfg.algo {
        AlgoKind::Scdro | AlgoKind::Ascdro => {
            let algo = if cfg.algo == AlgoKind::Scdro {
                Algorithm::Scdro
            } else {
                Algorithm::Ascdro
            };
            let rule = match cfg.schedule() {
                ScheduleKind::Theorem2 => {
                    let s = sigma_sq(cfg, &problem, &x1)?;
                    let l = match cfg.smoothness {
                        Some(l) => l,
                        None => estimate_local_smoothness(
                            &problem,
                            &x1,
                            0.5 * dom.radius,
                            200,
                            cfg.seed,
                        )?,
                    };
                    used_sigma = Some(s);
                    used_l = Some(l);
                    StepRule::Decay(Theorem2Params::new(cfg.alpha, s, l)?)
                }
                _ => StepRule::Constant {
                    beta: cfg.beta,
                    eta: cfg.eta,
                },
            };
            mu = cfg.mu.unwrap_or(0.0);
            let opts = RunOptions {
                iters: cfg.iters,
                eval_every: cfg.eval_every,
                init_batch: cfg.init_batch.unwrap_or(1),
                mu,
                seed: cfg.seed,
                ..Default::default()
            };
            run_tracker(&problem, algo, &x1, rule, &opts)?
        }
        AlgoKind::Rscdro | AlgoKind::Rascdro => {
            let inner = if cfg.algo == AlgoKind::Rscdro {
                Algorithm::Scdro
            } else {
                Algorithm::Ascdro
            };
            let target = cfg.eps1 / 2f64.powi(cfg.stages as i32);
            mu = cfg
                .mu
                .unwrap_or_else(|| default_mu(target, dom.radius, dom.lambda_tilde));
            let (plan, init_batch) = match cfg.schedule() {
                ScheduleKind::Theory => {
                    let s = sigma_sq(cfg, &problem, &x1)?;
                    let l = cfg.smoothness.unwrap_or(problem.smoothness_constants().l_f);
                    used_sigma = Some(s);
                    used_l = Some(l);
                    let plan = theory_plan(inner, mu, cfg.eps1, cfg.stages, s, l, cfg.budget)?;
                    (
                        plan,
                        cfg.init_batch
                            .unwrap_or_else(|| theory_init_batch(mu, cfg.eps1, problem.n())),
                    )
                }
                _ => (
                    practical_plan(inner, cfg.eps1, cfg.beta, cfg.eta, cfg.iters, cfg.stages)?,
                    cfg.init_batch.unwrap_or(1),
                ),
            };
            let opts = RestartOptions {
                mu,
                init_batch,
                eval_every: cfg.eval_every,
                seed: cfg.seed,
                ..Default::default()
            };
            restart_run(&problem, &x1, inner, &plan, &opts)?
        }
        AlgoKind::Sgd => baseline_projected_sgd_run(&problem, &x1, cfg.eta, &base)?,
        AlgoKind::Minibatch => {
            baseline_plugin_minibatch_run(&problem, &x1, cfg.batch, cfg.eta, &base)?
        }
        AlgoKind::PrimalDual => {
            baseline_primal_dual_run(&problem, &x1, cfg.batch, cfg.eta, cfg.eta_p, &base)?
        }
    };
    if let Some(out) = &cfg.out {
        write_metrics_csv(out, &result.metrics)?;
    }
    let test_accuracy = test.map(|t| problem.loss().accuracy(&t, &result.final_point.w));
    Ok(RunOutcome {
        result,
        test_accuracy,
        sigma_sq: used_sigma,
        smoothness: used_l,
        mu,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV text with [`CSV_HEADER`]. Floats use the shortest round-trip form, so
/// reruns of a config reproduce every column except `wall_ms` byte for byte.
pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{:.3}",
            r.iter,
            r.oracle_calls,
            r.f,
            opt(r.f_mu),
            r.dist_sq,
            opt(r.step_residual),
            r.train_acc,
            r.stage,
            r.wall_ms
        );
    }
    s
}

pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, metrics_csv(rows)).map_err(Error::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        for (k, v) in [
            ("n_major", "180"),
            ("n_minor", "20"),
            ("dim", "5"),
            ("iters", "1000"),
            ("eval_every", "100"),
        ] {
            cfg.set(k, v).unwrap();
        }
        cfg
    }

    #[test]
    fn smoke_run_writes_one_row_per_evaluation() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small();
        cfg.out = Some(dir.path().join("m.csv"));
        let o = run_experiment(&cfg).unwrap();
        let text = fs::read_to_string(dir.path().join("m.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 1 + 1 + 1000 / 100);
        assert_eq!(o.result.metrics.len(), 11);
        assert!(lines[1].split(',').nth(5).unwrap().is_empty());
    }

    #[test]
    fn every_algorithm_dispatches() {
        for algo in [
            "scdro",
            "ascdro",
            "rscdro",
            "rascdro",
            "sgd",
            "minibatch",
            "primal-dual",
        ] {
            let mut cfg = small();
            cfg.set("algo", algo).unwrap();
            cfg.set("stages", "2").unwrap();
            cfg.set("batch", "4").unwrap();
            cfg.set("iters", "200").unwrap();
            let o = run_experiment(&cfg).unwrap_or_else(|e| panic!("{algo}: {e}"));
            assert!(o.result.oracle_calls > 0, "{algo}");
        }
    }

    #[test]
    fn theorem2_uses_estimates_and_theory_reports_the_budget() {
        let mut cfg = small();
        cfg.set("algo", "ascdro").unwrap();
        cfg.set("schedule", "theorem2").unwrap();
        cfg.set("iters", "50").unwrap();
        let o = run_experiment(&cfg).unwrap();
        assert!(o.sigma_sq.unwrap() > 0.0 && o.smoothness.unwrap() > 0.0);
        let mut cfg = small();
        cfg.set("algo", "rscdro").unwrap();
        cfg.set("schedule", "theory").unwrap();
        assert!(matches!(
            run_experiment(&cfg),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn holdout_reports_test_accuracy() {
        let mut cfg = small();
        cfg.set("holdout", "0.25").unwrap();
        let o = run_experiment(&cfg).unwrap();
        let t = o.test_accuracy.unwrap();
        assert!((0.0..=1.0).contains(&t));
        let (p, test) = build_problem(&cfg).unwrap();
        assert_eq!(p.n() + test.unwrap().n(), 200);
    }

    #[test]
    fn csv_fields_round_trip() {
        let row = MetricsRow {
            iter: 3,
            oracle_calls: 7,
            f: 0.1 + 0.2,
            f_mu: Some(1.0 / 3.0),
            dist_sq: 1e-300,
            step_residual: None,
            train_acc: 0.5,
            stage: 2,
            wall_ms: 1.23456,
        };
        let text = metrics_csv(std::slice::from_ref(&row));
        let fields: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(fields[2].parse::<f64>().unwrap(), row.f);
        assert_eq!(fields[3].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(fields[4].parse::<f64>().unwrap(), 1e-300);
        assert_eq!(fields[5], "");
        assert_eq!(fields[8], "1.235");
    }
}
