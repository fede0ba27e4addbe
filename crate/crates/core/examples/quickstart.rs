//! SCDRO on an imbalanced synthetic task, compared with the exact optimum.
//!
//!     cargo run --release --example quickstart

use kldro::data::gen_imbalanced;
use kldro::loss::LossModel;
use kldro::objective::{DroProblem, Point};
use kldro::optim::reference::reference_optimum;
use kldro::optim::{run_tracker, Algorithm, RunOptions, StepRule};

fn main() -> kldro::Result<()> {
    let data = gen_imbalanced(900, 100, 20, 2.0, 0.0, 4)?;
    let problem = DroProblem::new(data, LossModel::Logistic, 0.5, 1e-3, 2.0)?;
    let dom = problem.domain();
    println!("n = {}, λ̃ = {:.3}", problem.n(), dom.lambda_tilde);

    let x1 = Point::new(vec![0.0; 20], 1.0);
    let opts = RunOptions {
        iters: 100_000,
        eval_every: 20_000,
        seed: 0,
        ..Default::default()
    };
    let run = run_tracker(
        &problem,
        Algorithm::Scdro,
        &x1,
        StepRule::Constant {
            beta: 5e-3,
            eta: 1e-4,
        },
        &opts,
    )?;
    for row in &run.metrics {
        println!(
            "iter {:>6}  calls {:>6}  F {:.6}  dist² {:.3e}  acc {:.3}",
            row.iter, row.oracle_calls, row.f, row.dist_sq, row.train_acc
        );
    }

    let opt = reference_optimum(&problem, 0.0, 1e-10, 1_000_000)?;
    println!(
        "reference: F* = {:.6} at λ* = {:.4}",
        opt.value, opt.point.lambda
    );
    println!(
        "SCDRO gap: {:.3e}",
        run.metrics.last().unwrap().f - opt.value
    );
    Ok(())
}
