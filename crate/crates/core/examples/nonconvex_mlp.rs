//! SCDRO and ASCDRO on a one-hidden-layer network, where only stationarity
//! (not optimality) is meaningful.
//!
//!     cargo run --release --example nonconvex_mlp

use kldro::harness::{run_experiment, ExperimentConfig};

fn main() -> kldro::Result<()> {
    let mut cfg = ExperimentConfig::default();
    for (k, v) in [
        ("loss", "mlp"),
        ("hidden", "8"),
        ("n_major", "450"),
        ("n_minor", "50"),
        ("dim", "10"),
        ("lambda0", "0.05"),
        ("radius", "3"),
        ("holdout", "0.2"),
    ] {
        cfg.set(k, v)?;
    }
    // equal oracle budgets: the STORM update costs two calls per iteration
    for (algo, iters, beta, eta) in [
        ("scdro", "40000", "0.01", "1e-3"),
        ("ascdro", "20000", "1e-3", "5e-4"),
    ] {
        for (k, v) in [
            ("algo", algo),
            ("iters", iters),
            ("eval_every", "5000"),
            ("beta", beta),
            ("eta", eta),
        ] {
            cfg.set(k, v)?;
        }
        let out = run_experiment(&cfg)?;
        for row in &out.result.metrics {
            println!(
                "{algo}: calls {:>6}  F {:.5}  dist² {:.3e}",
                row.oracle_calls, row.f, row.dist_sq
            );
        }
        println!("{}", out.summary_line(cfg.algo));
    }
    Ok(())
}
