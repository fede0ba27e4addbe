//! Deterministic full-batch solvers used as references by tests and metrics.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::geometry::{dist_to_subdifferential, gradient_mapping_norm, project};
use crate::linalg::{dist_sq, dot};
use crate::objective::{DroProblem, Gradient, Point};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the minimiser of a unimodal `f` on `[a, b]`,
/// stopping once the bracket is narrower than `tol`.
pub fn golden_section<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(a <= b) || !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bad bracket [{a}, {b}] or tolerance {tol}"
        )));
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    // The endpoints can beat the interior probes when the minimum sits on the boundary.
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for e in [a, b] {
        let fe = f(e)?;
        if fe < best.1 {
            best = (e, fe);
        }
    }
    Ok(best)
}

/// `argmin_{λ ∈ [lo, hi]} F(w, λ)`; `F(w, ·)` is convex in `λ`.
pub fn minimize_lambda(
    problem: &DroProblem,
    w: &[f64],
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let losses = problem.losses(w)?;
    let rho = problem.rho();
    golden_section(
        |l| Ok(crate::objective::f_from_losses(&losses, l, rho)),
        lo,
        hi,
        tol,
    )
}

#[derive(Clone, Debug)]
pub struct Reference {
    pub point: Point,
    /// `F_μ` at `point`.
    pub value: f64,
    /// `‖x − Π_X(x − ∇F_μ(x))‖` at `point`.
    pub grad_map: f64,
    pub dist: f64,
    pub iters: usize,
}

/// Minimises `F_μ` over `X` with spectral projected gradient (Barzilai–Borwein
/// steps, nonmonotone Armijo backtracking) until the unit-step gradient
/// mapping is at most `tol`. Starts from `w = 0`, `λ = clamp(1)`.
pub fn reference_optimum(
    problem: &DroProblem,
    mu: f64,
    tol: f64,
    max_iters: usize,
) -> Result<Reference> {
    let dom = problem.domain();
    let x0 = project(&Point::new(vec![0.0; problem.dim_w()], 1.0), &dom);
    reference_optimum_from(problem, mu, &x0, tol, max_iters)
}

pub fn reference_optimum_from(
    problem: &DroProblem,
    mu: f64,
    x0: &Point,
    tol: f64,
    max_iters: usize,
) -> Result<Reference> {
    let dom = problem.domain();
    let mut x = project(x0, &dom);
    let (mut f, mut g) = problem.value_and_grad_mu(&x, mu)?;
    let mut history: VecDeque<f64> = VecDeque::from([f]);
    let mut alpha = 1.0;
    for it in 0..max_iters {
        let gm = gradient_mapping_norm(&x, &g, 1.0, &dom);
        if gm <= tol {
            return finish(problem, x, f, g, gm, it);
        }
        let trial = step_point(&x, &g, alpha, &dom);
        let d: Vec<f64> = trial
            .to_vec()
            .iter()
            .zip(x.to_vec())
            .map(|(a, b)| a - b)
            .collect();
        let slope = dot(&d, &g.to_vec());
        let f_ref = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut t = 1.0;
        let (x_new, f_new, g_new) = loop {
            let cand = Point::from_slice(
                &x.to_vec()
                    .iter()
                    .zip(&d)
                    .map(|(a, b)| a + t * b)
                    .collect::<Vec<_>>(),
            );
            let cand = project(&cand, &dom);
            let (fc, gc) = problem.value_and_grad_mu(&cand, mu)?;
            if fc <= f_ref + 1e-4 * t * slope || t < 1e-20 {
                break (cand, fc, gc);
            }
            t *= 0.5;
        };
        let s = dist_sq(&x_new.to_vec(), &x.to_vec());
        let sy: f64 = x_new
            .to_vec()
            .iter()
            .zip(x.to_vec())
            .zip(g_new.to_vec().iter().zip(g.to_vec()))
            .map(|((a, b), (c, e))| (a - b) * (c - e))
            .sum();
        alpha = if sy > 0.0 {
            (s / sy).clamp(1e-12, 1e12)
        } else {
            1e3
        };
        if s == 0.0 {
            // No movement possible in floating point; report what we have.
            let gm = gradient_mapping_norm(&x_new, &g_new, 1.0, &dom);
            return finish(problem, x_new, f_new, g_new, gm, it + 1);
        }
        x = x_new;
        f = f_new;
        g = g_new;
        history.push_back(f);
        if history.len() > 10 {
            history.pop_front();
        }
    }
    let gm = gradient_mapping_norm(&x, &g, 1.0, &dom);
    finish(problem, x, f, g, gm, max_iters)
}

fn step_point(x: &Point, g: &Gradient, alpha: f64, dom: &crate::objective::Domain) -> Point {
    let mut y = x.clone();
    crate::geometry::projected_step(&mut y, g, alpha, dom);
    y
}

fn finish(
    problem: &DroProblem,
    x: Point,
    f: f64,
    g: Gradient,
    gm: f64,
    iters: usize,
) -> Result<Reference> {
    let dist = dist_to_subdifferential(&x, &g, &problem.domain())?;
    Ok(Reference {
        point: x,
        value: f,
        grad_map: gm,
        dist,
        iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_imbalanced;
    use crate::loss::LossModel;

    #[test]
    fn golden_section_on_parabola() {
        let (x, fx) = golden_section(|x| Ok((x - 0.3f64).powi(2)), -1.0, 2.0, 1e-10).unwrap();
        assert!((x - 0.3).abs() < 1e-9 && fx < 1e-18);
        let (x, _) = golden_section(Ok, 1.0, 2.0, 1e-10).unwrap();
        assert_eq!(x, 1.0);
    }

    #[test]
    fn reference_is_stationary_and_optimal() {
        let data = gen_imbalanced(60, 20, 4, 1.0, 0.1, 3).unwrap();
        let p = DroProblem::new(data, LossModel::Logistic, 0.5, 1e-3, 2.0).unwrap();
        let r = reference_optimum(&p, 0.0, 1e-10, 100_000).unwrap();
        assert!(r.grad_map <= 1e-10, "gm {}", r.grad_map);
        // No random feasible point does better.
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let dom = p.domain();
        for _ in 0..200 {
            let w = crate::loss::random_in_ball(&mut rng, 4, 2.0);
            let l = rand::Rng::random_range(&mut rng, dom.lambda0..dom.lambda_tilde);
            assert!(p.f_exact(&Point::new(w, l)).unwrap() >= r.value - 1e-12);
        }
        // λ at the optimum is the golden-section minimiser for that w.
        let (l, fl) =
            minimize_lambda(&p, &r.point.w, dom.lambda0, dom.lambda_tilde, 1e-12).unwrap();
        assert!((l - r.point.lambda).abs() < 1e-5 && (fl - r.value).abs() < 1e-12);
    }
}
