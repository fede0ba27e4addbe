//! One run per value of a single config key, plus a summary table.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::experiment::run_experiment;
use crate::error::{Error, Result};

/// Final metrics of one sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: String,
    pub metrics_file: PathBuf,
    pub iterations: u64,
    pub oracle_calls: u64,
    pub f: f64,
    pub f_mu: Option<f64>,
    pub dist_sq: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SweepSummary {
    pub axis: String,
    pub points: Vec<SweepPoint>,
    pub summary_file: PathBuf,
}

fn sanitize(v: &str) -> String {
    v.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn median_iqr(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut v: Vec<f64> = xs.collect();
    v.sort_by(f64::total_cmp);
    (quantile(&v, 0.5), quantile(&v, 0.75) - quantile(&v, 0.25))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Runs `template` with `axis` set to each of `values`, at most `jobs` at a
/// time. Metrics go to `out_dir/<axis>_<value>.csv` and the final row of each
/// run to `out_dir/summary.csv`. A seed sweep appends median and IQR rows.
pub fn sweep(
    template: &ExperimentConfig,
    axis: &str,
    values: &[String],
    out_dir: impl AsRef<Path>,
    jobs: usize,
) -> Result<SweepSummary> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let out_dir = out_dir.as_ref();
    let configs = values
        .iter()
        .map(|v| {
            let mut cfg = template.clone();
            cfg.set(axis, v)?;
            cfg.out = Some(out_dir.join(format!("{}_{}.csv", sanitize(axis), sanitize(v))));
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes = pool.install(|| configs.par_iter().map(run_experiment).collect::<Vec<_>>());
    let mut points = Vec::with_capacity(values.len());
    for ((v, cfg), outcome) in values.iter().zip(&configs).zip(outcomes) {
        let o = outcome?;
        let last = o.result.metrics.last().expect("runs log at least one row");
        points.push(SweepPoint {
            value: v.clone(),
            metrics_file: cfg.out.clone().expect("set above"),
            iterations: o.result.iterations,
            oracle_calls: o.result.oracle_calls,
            f: last.f,
            f_mu: last.f_mu,
            dist_sq: last.dist_sq,
            train_acc: last.train_acc,
            test_acc: o.test_accuracy,
        });
    }
    let summary_file = out_dir.join("summary.csv");
    fs::write(&summary_file, summary_csv(axis, &points))?;
    Ok(SweepSummary {
        axis: axis.to_string(),
        points,
        summary_file,
    })
}

fn summary_csv(axis: &str, points: &[SweepPoint]) -> String {
    let mut s = format!("{axis},iterations,oracle_calls,F,F_mu,dist_sq,train_acc,test_acc\n");
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            p.value,
            p.iterations,
            p.oracle_calls,
            p.f,
            opt(p.f_mu),
            p.dist_sq,
            p.train_acc,
            opt(p.test_acc)
        );
    }
    if axis == "seed" {
        let cols: [(f64, f64); 6] = [
            median_iqr(points.iter().map(|p| p.iterations as f64)),
            median_iqr(points.iter().map(|p| p.oracle_calls as f64)),
            median_iqr(points.iter().map(|p| p.f)),
            median_iqr(points.iter().map(|p| p.f_mu.unwrap_or(f64::NAN))),
            median_iqr(points.iter().map(|p| p.dist_sq)),
            median_iqr(points.iter().map(|p| p.train_acc)),
        ];
        let test = points
            .iter()
            .map(|p| p.test_acc)
            .collect::<Option<Vec<f64>>>()
            .map(|t| median_iqr(t.into_iter()));
        for (label, pick) in [("median", 0usize), ("iqr", 1)] {
            let get = |c: (f64, f64)| if pick == 0 { c.0 } else { c.1 };
            let f_mu = if points.iter().all(|p| p.f_mu.is_some()) {
                get(cols[3]).to_string()
            } else {
                String::new()
            };
            let _ = writeln!(
                s,
                "{label},{},{},{},{},{},{},{}",
                get(cols[0]),
                get(cols[1]),
                get(cols[2]),
                f_mu,
                get(cols[4]),
                get(cols[5]),
                test.map(|t| get(t).to_string()).unwrap_or_default()
            );
        }
    }
    s
}
