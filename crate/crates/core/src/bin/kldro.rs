use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kldro::data::{gen_imbalanced, write_dataset, DataFormat};
use kldro::harness::{run_experiment, sweep, ExperimentConfig};
use kldro::validation::{run_suite, SuiteOptions};
use kldro::{Error, Result};

#[derive(Parser)]
#[command(
    name = "kldro",
    version,
    about = "KL-constrained DRO solvers and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic imbalanced two-class dataset.
    GenData(GenData),
    /// Run one configuration and write its metrics CSV.
    Run(RunArgs),
    /// Run a configuration once per value of one key.
    Sweep(SweepArgs),
    /// Run the oracle checks and print one JSON line per check.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct GenData {
    #[arg(long, default_value_t = 900)]
    n_major: usize,
    #[arg(long, default_value_t = 100)]
    n_minor: usize,
    #[arg(long, default_value_t = 20)]
    dim: usize,
    #[arg(long, default_value_t = 2.0)]
    separation: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// libsvm or csv; inferred from the extension when omitted.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    lambda0: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    iters: Option<String>,
    #[arg(long)]
    stages: Option<String>,
    #[arg(long)]
    batch: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    eval_every: Option<String>,
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    sigma_sq: Option<String>,
    /// Any other config key, as key=value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Overrides {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let named = [
            ("algo", &self.algo),
            ("rho", &self.rho),
            ("lambda0", &self.lambda0),
            ("radius", &self.radius),
            ("eta", &self.eta),
            ("beta", &self.beta),
            ("mu", &self.mu),
            ("iters", &self.iters),
            ("stages", &self.stages),
            ("batch", &self.batch),
            ("seed", &self.seed),
            ("eval_every", &self.eval_every),
            ("data", &self.data),
            ("schedule", &self.schedule),
            ("sigma_sq", &self.sigma_sq),
        ];
        for (k, v) in named {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    cfg: Overrides,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    cfg: Overrides,
    /// Config key to vary.
    #[arg(long)]
    axis: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    values: Vec<String>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the full reports, witnesses included, as JSON lines.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Smaller sample counts for a quick check.
    #[arg(long)]
    quick: bool,
}

fn gen_data(a: &GenData) -> Result<()> {
    let data = gen_imbalanced(a.n_major, a.n_minor, a.dim, a.separation, a.noise, a.seed)?;
    let format = match &a.format {
        Some(f) => f.parse()?,
        None => DataFormat::from_path(&a.out),
    };
    write_dataset(&data, &a.out, format)
}

fn run(a: &RunArgs) -> Result<()> {
    let mut cfg = a.cfg.build()?;
    if let Some(out) = &a.out {
        cfg.out = Some(out.clone());
    }
    let o = run_experiment(&cfg)?;
    println!("{}", o.summary_line(cfg.algo));
    Ok(())
}

fn run_sweep(a: &SweepArgs) -> Result<()> {
    let cfg = a.cfg.build()?;
    let s = sweep(&cfg, &a.axis, &a.values, &a.out_dir, a.jobs)?;
    for p in &s.points {
        println!(
            "{}={}: F {:.6} dist_sq {:.3e} train_acc {:.4}",
            s.axis, p.value, p.f, p.dist_sq, p.train_acc
        );
    }
    println!("summary: {}", s.summary_file.display());
    Ok(())
}

/// Exit status 1 when any check fails.
fn validate(a: &ValidateArgs) -> Result<bool> {
    let mut opts = SuiteOptions {
        root_seed: a.seed,
        ..Default::default()
    };
    if a.quick {
        opts.problems = 5;
        opts.dual_points_per_problem = 10;
        opts.mirror_iters = 20_000;
        opts.kl_points = 100;
        opts.smoothness_pairs = 200;
    }
    let reports = run_suite(&opts)?;
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    for r in &reports {
        writeln!(lock, "{}", r.to_json_line())?;
    }
    if let Some(path) = &a.out {
        let mut w = BufWriter::new(File::create(path)?);
        for r in &reports {
            serde_json::to_writer(&mut w, r).map_err(io::Error::other)?;
            writeln!(w)?;
        }
        w.flush()?;
    }
    Ok(reports.iter().all(|r| r.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::GenData(a) => gen_data(a).map(|_| true),
        Cmd::Run(a) => run(a).map(|_| true),
        Cmd::Sweep(a) => run_sweep(a).map(|_| true),
        Cmd::Validate(a) => validate(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
