//! ASCDRO with the decaying `η_t, β_t` schedule. The noise level and the
//! smoothness constant are estimated at the starting point.
//!
//! The schedule's first step is `1/(16 L²)` with `β ≈ 1/2`, which is only
//! stable when the `λ` direction is mild, hence the large `λ0` here. At
//! `λ0 = 1e-3` the same schedule trips the overflow guard.
//!
//!     cargo run --release --example decaying_steps

use kldro::data::gen_imbalanced;
use kldro::loss::LossModel;
use kldro::objective::{DroProblem, Point};
use kldro::optim::schedule::{estimate_local_smoothness, estimate_sigma_sq};
use kldro::optim::{run_tracker, Algorithm, RunOptions, StepRule, Theorem2Params};

fn main() -> kldro::Result<()> {
    let data = gen_imbalanced(450, 50, 10, 2.0, 0.0, 1)?;
    let problem = DroProblem::new(data, LossModel::Logistic, 0.5, 0.5, 2.0)?;
    let x1 = Point::new(vec![0.0; 10], 1.0);

    let sigma_sq = estimate_sigma_sq(&problem, &x1, 256, 0)?;
    let l_hat = estimate_local_smoothness(&problem, &x1, 1.0, 200, 0)?;
    // the closed form is astronomically large at small λ0
    println!(
        "σ² ≈ {sigma_sq:.3}, L̂ ≈ {l_hat:.3}, closed-form L_F = {:.3e}",
        problem.smoothness_constants().l_f
    );

    let params = Theorem2Params::new(2.0, sigma_sq, l_hat)?;
    for t in [1, 100, 10_000] {
        println!(
            "t = {t:>5}: η = {:.3e}, β = {:.3e}",
            params.eta(t),
            params.beta(t)
        );
    }
    let opts = RunOptions {
        iters: 20_000,
        eval_every: 5_000,
        ..Default::default()
    };
    let run = run_tracker(
        &problem,
        Algorithm::Ascdro,
        &x1,
        StepRule::Decay(params),
        &opts,
    )?;
    for row in &run.metrics {
        println!(
            "calls {:>6}  F {:.6}  dist² {:.3e}",
            row.oracle_calls, row.f, row.dist_sq
        );
    }
    println!(
        "sampled iterate τ = {}: dist² {:.3e}",
        run.sampled_iter, run.sampled_dist_sq
    );
    Ok(())
}
