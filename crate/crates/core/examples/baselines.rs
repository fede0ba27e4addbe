//! The three comparison methods next to SCDRO at a matched oracle budget.
//!
//!     cargo run --release --example baselines

use kldro::data::gen_imbalanced;
use kldro::loss::LossModel;
use kldro::objective::{kl_divergence, DroProblem, Point};
use kldro::optim::baselines::{
    baseline_plugin_minibatch_run, baseline_primal_dual_run, baseline_projected_sgd_run,
    BaselineOptions,
};
use kldro::optim::reference::reference_optimum;
use kldro::optim::{run_tracker, Algorithm, RunOptions, RunResult, StepRule};

fn report(name: &str, run: &RunResult, f_star: f64) {
    let last = run.metrics.last().unwrap();
    println!(
        "{name:<22} calls {:>7}  F − F* {:.3e}  dist² {:.3e}  acc {:.3}",
        run.oracle_calls,
        last.f - f_star,
        last.dist_sq,
        last.train_acc
    );
}

fn main() -> kldro::Result<()> {
    let data = gen_imbalanced(450, 50, 10, 2.0, 0.0, 2)?;
    let problem = DroProblem::new(data, LossModel::Logistic, 0.5, 1e-2, 2.0)?;
    let x1 = Point::new(vec![0.0; 10], 1.0);
    let f_star = reference_optimum(&problem, 0.0, 1e-10, 1_000_000)?.value;
    let budget = 60_000;

    let opts = RunOptions {
        iters: budget,
        eval_every: 0,
        ..Default::default()
    };
    let scdro = run_tracker(
        &problem,
        Algorithm::Scdro,
        &x1,
        StepRule::Constant {
            beta: 5e-3,
            eta: 1e-4,
        },
        &opts,
    )?;
    report("SCDRO", &scdro, f_star);

    let b = |iters| BaselineOptions {
        iters,
        eval_every: 0,
        seed: 0,
    };
    report(
        "projected SGD",
        &baseline_projected_sgd_run(&problem, &x1, 1e-4, &b(budget / 3))?,
        f_star,
    );
    report(
        "plug-in minibatch (32)",
        &baseline_plugin_minibatch_run(&problem, &x1, 32, 1e-3, &b(budget / 32))?,
        f_star,
    );
    let pd = baseline_primal_dual_run(&problem, &x1, 32, 1e-2, 0.05, &b(budget / 64))?;
    report("primal-dual (32)", &pd, f_star);
    if let Some(p) = &pd.dual_weights {
        println!(
            "primal-dual weights: KL(p‖uniform) = {:.4} (ρ = {})",
            kl_divergence(p)?,
            problem.rho()
        );
    }
    Ok(())
}
