//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # convex acceptance task
//! algo = ascdro
//! rho = 0.5
//! beta = 3e-4
//! eta = 2e-4
//! iters = 50000
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::DataFormat;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlgoKind {
    Scdro,
    Ascdro,
    Rscdro,
    Rascdro,
    Sgd,
    Minibatch,
    PrimalDual,
}

impl FromStr for AlgoKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "scdro" => AlgoKind::Scdro,
            "ascdro" => AlgoKind::Ascdro,
            "rscdro" => AlgoKind::Rscdro,
            "rascdro" => AlgoKind::Rascdro,
            "sgd" => AlgoKind::Sgd,
            "minibatch" => AlgoKind::Minibatch,
            "primal-dual" => AlgoKind::PrimalDual,
            other => return Err(Error::Config(format!("unknown algorithm {other:?}"))),
        })
    }
}

impl fmt::Display for AlgoKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlgoKind::Scdro => "scdro",
            AlgoKind::Ascdro => "ascdro",
            AlgoKind::Rscdro => "rscdro",
            AlgoKind::Rascdro => "rascdro",
            AlgoKind::Sgd => "sgd",
            AlgoKind::Minibatch => "minibatch",
            AlgoKind::PrimalDual => "primal-dual",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleKind {
    Constant,
    Theorem2,
    Theory,
    Practical,
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "constant" => ScheduleKind::Constant,
            "theorem2" => ScheduleKind::Theorem2,
            "theory" => ScheduleKind::Theory,
            "practical" => ScheduleKind::Practical,
            other => return Err(Error::Config(format!("unknown schedule {other:?}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    Logistic,
    Mlp,
}

/// Parameters of [`crate::data::gen_imbalanced`].
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub n_major: usize,
    pub n_minor: usize,
    pub dim: usize,
    pub separation: f64,
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_major: 900,
            n_minor: 100,
            dim: 20,
            separation: 2.0,
            label_noise: 0.0,
            seed: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Dataset file; the synthetic generator is used when absent.
    pub data: Option<PathBuf>,
    pub format: Option<DataFormat>,
    pub synthetic: SyntheticSpec,
    /// Fraction held out for test accuracy, 0 for none.
    pub holdout: f64,
    pub loss: LossKind,
    pub hidden: usize,
    pub rho: f64,
    pub lambda0: f64,
    pub radius: f64,
    /// Initial `λ`; `w` starts at 0.
    pub lambda1: f64,
    pub algo: AlgoKind,
    /// Defaults to `constant` for single runs and baselines, `practical` for restarts.
    pub schedule: Option<ScheduleKind>,
    pub beta: f64,
    pub eta: f64,
    /// Dual step of the primal–dual baseline.
    pub eta_p: f64,
    /// Restart regulariser; defaults to `ε/(2(R² + λ̃²))` at the final stage target.
    pub mu: Option<f64>,
    /// Iterations (first-stage iterations for restarts).
    pub iters: u64,
    pub stages: usize,
    /// Minibatch size for the baselines.
    pub batch: usize,
    pub init_batch: Option<usize>,
    pub seed: u64,
    pub eval_every: u64,
    pub sigma_sq: Option<f64>,
    /// Smoothness used by the theorem2 and theory schedules.
    pub smoothness: Option<f64>,
    pub alpha: f64,
    pub eps1: f64,
    /// Iteration budget for the theory schedule.
    pub budget: u64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: None,
            format: None,
            synthetic: SyntheticSpec::default(),
            holdout: 0.0,
            loss: LossKind::Logistic,
            hidden: 8,
            rho: 0.5,
            lambda0: 1e-3,
            radius: 2.0,
            lambda1: 1.0,
            algo: AlgoKind::Scdro,
            schedule: None,
            beta: 5e-3,
            eta: 1e-4,
            eta_p: 0.05,
            mu: None,
            iters: 10_000,
            stages: 4,
            batch: 1,
            init_batch: None,
            seed: 0,
            eval_every: 1000,
            sigma_sq: None,
            smoothness: None,
            alpha: 2.0,
            eps1: 1.0,
            budget: 100_000_000,
            out: None,
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected `key = value`, got {line:?}"),
                });
            };
            cfg.set(k.trim(), v.trim()).map_err(|e| Error::Parse {
                line: lineno + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets one field by its config key. Used by the file parser, command-line
    /// overrides and sweep axes alike.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "data" => self.data = Some(PathBuf::from(value)),
            "format" => self.format = Some(value.parse()?),
            "n_major" => self.synthetic.n_major = num(key, value)?,
            "n_minor" => self.synthetic.n_minor = num(key, value)?,
            "dim" => self.synthetic.dim = num(key, value)?,
            "separation" => self.synthetic.separation = num(key, value)?,
            "label_noise" => self.synthetic.label_noise = num(key, value)?,
            "data_seed" => self.synthetic.seed = num(key, value)?,
            "holdout" => self.holdout = num(key, value)?,
            "loss" => {
                self.loss = match value {
                    "logistic" => LossKind::Logistic,
                    "mlp" => LossKind::Mlp,
                    other => return Err(Error::Config(format!("unknown loss {other:?}"))),
                }
            }
            "hidden" => self.hidden = num(key, value)?,
            "rho" => self.rho = num(key, value)?,
            "lambda0" => self.lambda0 = num(key, value)?,
            "radius" => self.radius = num(key, value)?,
            "lambda1" => self.lambda1 = num(key, value)?,
            "algo" => self.algo = value.parse()?,
            "schedule" => self.schedule = Some(value.parse()?),
            "beta" => self.beta = num(key, value)?,
            "eta" => self.eta = num(key, value)?,
            "eta_p" => self.eta_p = num(key, value)?,
            "mu" => self.mu = Some(num(key, value)?),
            "iters" => self.iters = num(key, value)?,
            "stages" => self.stages = num(key, value)?,
            "batch" => self.batch = num(key, value)?,
            "init_batch" => self.init_batch = Some(num(key, value)?),
            "seed" => self.seed = num(key, value)?,
            "eval_every" => self.eval_every = num(key, value)?,
            "sigma_sq" => self.sigma_sq = Some(num(key, value)?),
            "smoothness" => self.smoothness = Some(num(key, value)?),
            "alpha" => self.alpha = num(key, value)?,
            "eps1" => self.eps1 = num(key, value)?,
            "budget" => self.budget = num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn schedule(&self) -> ScheduleKind {
        self.schedule.unwrap_or(match self.algo {
            AlgoKind::Rscdro | AlgoKind::Rascdro => ScheduleKind::Practical,
            _ => ScheduleKind::Constant,
        })
    }

    /// Range checks and file existence. Called before every run.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if let Some(p) = &self.data {
            if !p.is_file() {
                return bad(format!("data file {} does not exist", p.display()));
            }
        }
        if !(self.rho > 0.0) || !(self.lambda0 > 0.0) || !(self.radius > 0.0) {
            return bad("rho, lambda0 and radius must be positive".into());
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad(format!("beta must lie in (0, 1], got {}", self.beta));
        }
        if !(self.eta > 0.0) || !(self.eta_p > 0.0) {
            return bad("step sizes must be positive".into());
        }
        if self.iters == 0 || self.stages == 0 || self.batch == 0 {
            return bad("iters, stages and batch must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.holdout) {
            return bad(format!("holdout must lie in [0, 1), got {}", self.holdout));
        }
        if let Some(mu) = self.mu {
            if !(mu >= 0.0) {
                return bad(format!("mu must be nonnegative, got {mu}"));
            }
        }
        let sched = self.schedule();
        let ok = match self.algo {
            AlgoKind::Scdro => sched == ScheduleKind::Constant,
            AlgoKind::Ascdro => matches!(sched, ScheduleKind::Constant | ScheduleKind::Theorem2),
            AlgoKind::Rscdro | AlgoKind::Rascdro => {
                matches!(sched, ScheduleKind::Theory | ScheduleKind::Practical)
            }
            _ => sched == ScheduleKind::Constant,
        };
        if !ok {
            return bad(format!(
                "schedule {sched:?} does not apply to {}",
                self.algo
            ));
        }
        Ok(())
    }
}
