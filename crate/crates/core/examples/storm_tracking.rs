//! Exact tracking error of the moving-average and STORM estimators on a
//! small task where the full-batch inner function is cheap.
//!
//!     cargo run --release --example storm_tracking

use kldro::data::gen_imbalanced;
use kldro::loss::LossModel;
use kldro::objective::{DroProblem, Point};
use kldro::optim::{run_tracker, Algorithm, RunOptions, StepRule};

fn main() -> kldro::Result<()> {
    let data = gen_imbalanced(180, 20, 20, 2.0, 0.0, 4)?;
    let problem = DroProblem::new(data, LossModel::Logistic, 0.5, 1e-3, 2.0)?;
    let x1 = Point::new(vec![0.0; 20], 1.0);
    let rule = StepRule::Constant {
        beta: 3e-4,
        eta: 3e-4,
    };
    let budget = 100_000;
    for algo in [Algorithm::Scdro, Algorithm::Ascdro] {
        let opts = RunOptions {
            iters: budget / algo.oracle_per_step(),
            eval_every: 0,
            seed: 1,
            track_kappa: true,
            kappa_every: 10,
            ..Default::default()
        };
        let run = run_tracker(&problem, algo, &x1, rule, &opts)?;
        let late = run.late_mean_kappa_sq().unwrap();
        let z_err: f64 = {
            let t = &run.diag.tracking;
            let half = &t[t.len() / 2..];
            half.iter().map(|s| s.z_err_sq).sum::<f64>() / half.len() as f64
        };
        println!(
            "{algo:?}: {} calls, late mean ‖ϰ‖² {late:.3e}, late mean ‖z − ∇F‖² {z_err:.3e}, final dist² {:.3e}",
            run.oracle_calls, run.final_dist_sq
        );
    }
    Ok(())
}
