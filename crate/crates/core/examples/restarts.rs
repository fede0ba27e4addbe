//! Stagewise restarts on the regularised objective `F + μ‖x‖²/2`, with the
//! stage-end gap against the exact optimum.
//!
//!     cargo run --release --example restarts

use kldro::data::gen_imbalanced;
use kldro::loss::LossModel;
use kldro::objective::{DroProblem, Point};
use kldro::optim::reference::reference_optimum;
use kldro::optim::{practical_plan, restart_run, Algorithm, RestartOptions};

fn main() -> kldro::Result<()> {
    let data = gen_imbalanced(900, 100, 20, 2.0, 0.0, 4)?;
    let problem = DroProblem::new(data, LossModel::Logistic, 0.5, 1e-3, 2.0)?;
    let x1 = Point::new(vec![0.0; 20], 1.0);
    let mu = 1e-6;
    let opt = reference_optimum(&problem, mu, 1e-12, 1_000_000)?;
    let gap0 = problem.f_mu_exact(&x1, mu)? - opt.value;
    println!("initial gap {gap0:.4}");

    for (algo, beta1, eta1, t1) in [
        (Algorithm::Scdro, 3e-3, 1e-3, 10_000),
        (Algorithm::Ascdro, 3e-4, 3e-4, 20_000),
    ] {
        let plan = practical_plan(algo, gap0, beta1, eta1, t1, 4)?;
        let opts = RestartOptions {
            mu,
            eval_every: 0,
            seed: 0,
            ..Default::default()
        };
        let run = restart_run(&problem, &x1, algo, &plan, &opts)?;
        println!("{algo:?}:");
        for (st, end) in plan.iter().zip(&run.stage_ends) {
            println!(
                "  stage {} (T = {:>6}, β = {:.1e}, η = {:.1e}): calls {:>7}, gap {:.3e}, target {:.3e}",
                end.stage,
                st.iters,
                st.beta,
                st.eta,
                end.oracle_calls,
                end.f_mu - opt.value,
                st.eps / 2.0
            );
        }
    }
    Ok(())
}
