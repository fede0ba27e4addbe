//! The exact inner maximiser: worst-case sample weights at the robust
//! optimum, their KL radius, and the tilt toward the minority class.
//!
//!     cargo run --release --example worst_case_weights

use kldro::data::gen_imbalanced;
use kldro::loss::LossModel;
use kldro::objective::{kl_divergence, DroProblem};
use kldro::optim::reference::reference_optimum;

fn main() -> kldro::Result<()> {
    let data = gen_imbalanced(900, 100, 20, 2.0, 0.0, 4)?;
    let problem = DroProblem::new(data, LossModel::Logistic, 0.5, 1e-3, 2.0)?;
    let opt = reference_optimum(&problem, 0.0, 1e-12, 1_000_000)?;
    println!(
        "F* = {:.6}, λ* = {:.4}, gradient mapping {:.1e} after {} iterations",
        opt.value, opt.point.lambda, opt.grad_map, opt.iters
    );

    let p = problem.p_star(&opt.point)?;
    println!(
        "KL(p*‖uniform) = {:.6} against ρ = {}",
        kl_divergence(&p.probs)?,
        problem.rho()
    );
    let data = problem.data();
    let minority: f64 = (0..data.n())
        .filter(|&i| data.label(i) == -1)
        .map(|i| p.probs[i])
        .sum();
    let share = data
        .label_counts()
        .iter()
        .find(|(l, _)| *l == -1)
        .map(|(_, c)| *c)
        .unwrap_or(0) as f64
        / data.n() as f64;
    println!(
        "minority class: {:.1}% of samples, {:.1}% of worst-case weight",
        100.0 * share,
        100.0 * minority
    );

    let losses = problem.losses(&opt.point.w)?;
    let mean = losses.iter().sum::<f64>() / losses.len() as f64;
    println!("average loss {mean:.4}, robust objective {:.4}", opt.value);
    Ok(())
}
