//! Sensitivity to the KL radius: one run per ρ, then the summary table.
//!
//!     cargo run --release --example rho_sweep

use kldro::harness::{sweep, ExperimentConfig};

fn main() -> kldro::Result<()> {
    let mut cfg = ExperimentConfig::default();
    for (k, v) in [
        ("iters", "50000"),
        ("eval_every", "10000"),
        ("holdout", "0.2"),
    ] {
        cfg.set(k, v)?;
    }
    let values: Vec<String> = ["0.01", "0.05", "0.1", "0.5", "1"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let out = std::env::temp_dir().join("kldro-rho-sweep");
    let s = sweep(&cfg, "rho", &values, &out, 4)?;
    print!("{}", std::fs::read_to_string(&s.summary_file)?);
    println!("per-run metrics in {}", out.display());
    Ok(())
}
