//! Euclidean projection onto `X = ball(R) × [λ0, λ̃]` and the two
//! stationarity diagnostics: the exact distance from the origin to
//! `∇F(x) + N_X(x)`, and the residual of a projected step, which is an
//! element of that set at the new point.

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, norm_sq};
use crate::objective::{Domain, Gradient, Point, ACTIVE_TOL};

/// Rescaling onto the sphere can land a few ulps outside it; points that
/// close are left alone so projection is idempotent.
const BALL_SLACK: f64 = 1e-14;

/// `Π_X(x)`: radial scaling of `w` onto the ball and clamping of `λ`.
pub fn project(x: &Point, domain: &Domain) -> Point {
    let nw = norm(&x.w);
    let w = if nw > domain.radius * (1.0 + BALL_SLACK) {
        let s = domain.radius / nw;
        x.w.iter().map(|v| v * s).collect()
    } else {
        x.w.clone()
    };
    Point {
        w,
        lambda: x.lambda.clamp(domain.lambda0, domain.lambda_tilde),
    }
}

/// In-place `x ← Π_X(x − η·z)`.
pub fn projected_step(x: &mut Point, z: &Gradient, eta: f64, domain: &Domain) {
    axpy(-eta, &z.w, &mut x.w);
    x.lambda -= eta * z.lambda;
    let nw = norm(&x.w);
    if nw > domain.radius * (1.0 + BALL_SLACK) {
        let s = domain.radius / nw;
        x.w.iter_mut().for_each(|v| *v *= s);
    }
    x.lambda = x.lambda.clamp(domain.lambda0, domain.lambda_tilde);
}

fn ball_active(w: &[f64], domain: &Domain) -> bool {
    norm(w) >= domain.radius * (1.0 - ACTIVE_TOL)
}

/// `dist(0, ∇F(x) + N_X(x))` in closed form.
///
/// At `λ = λ0` the normal cone in `λ` is `(−∞, 0]`, which cancels a
/// positive `λ`-gradient and leaves a negative one; at `λ = λ̃` the cone is
/// `[0, ∞)` and the roles swap. On the sphere
/// `‖w‖ = R` the cone is `{t·w : t ≥ 0}` with minimiser
/// `t* = max(0, −⟨∇_w F, w⟩/‖w‖²)`.
pub fn dist_to_subdifferential(x: &Point, grad: &Gradient, domain: &Domain) -> Result<f64> {
    if !domain.contains(x) {
        return Err(Error::Infeasible(format!(
            "λ = {}, ‖w‖ = {}",
            x.lambda,
            norm(&x.w)
        )));
    }
    Ok(residual_sq(x, grad, domain).sqrt())
}

fn residual_sq(x: &Point, grad: &Gradient, domain: &Domain) -> f64 {
    let lo = x.lambda <= domain.lambda0 * (1.0 + ACTIVE_TOL);
    let hi = x.lambda >= domain.lambda_tilde * (1.0 - ACTIVE_TOL);
    let mut r_lambda = grad.lambda;
    if lo && r_lambda > 0.0 {
        r_lambda = 0.0;
    }
    if hi && r_lambda < 0.0 {
        r_lambda = 0.0;
    }
    let rw_sq = if ball_active(&x.w, domain) {
        let ww = norm_sq(&x.w);
        let t = (-dot(&grad.w, &x.w) / ww).max(0.0);
        grad.w
            .iter()
            .zip(&x.w)
            .map(|(g, w)| (g + t * w).powi(2))
            .sum()
    } else {
        norm_sq(&grad.w)
    };
    rw_sq + r_lambda * r_lambda
}

/// Squared stationarity measure; the quantity logged as `dist_sq`.
pub fn dist_sq_to_subdifferential(x: &Point, grad: &Gradient, domain: &Domain) -> Result<f64> {
    dist_to_subdifferential(x, grad, domain).map(|d| d * d)
}

/// `‖∇F(x⁺) − z − (x⁺ − x)/η‖` for `x⁺ = Π_X(x − ηz)`. This vector lies in
/// the regular subdifferential at `x⁺`, so the norm bounds the distance above.
pub fn subgradient_residual_from_step(
    x_t: &Point,
    x_next: &Point,
    z_t: &Gradient,
    grad_next: &Gradient,
    eta: f64,
) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive, got {eta}"
        )));
    }
    let mut s = 0.0;
    for j in 0..x_t.w.len() {
        let r = grad_next.w[j] - z_t.w[j] - (x_next.w[j] - x_t.w[j]) / eta;
        s += r * r;
    }
    let rl = grad_next.lambda - z_t.lambda - (x_next.lambda - x_t.lambda) / eta;
    Ok((s + rl * rl).sqrt())
}

/// Norm of the gradient mapping `(x − Π_X(x − η∇))/η`.
pub fn gradient_mapping_norm(x: &Point, grad: &Gradient, eta: f64, domain: &Domain) -> f64 {
    let mut y = x.clone();
    projected_step(&mut y, grad, eta, domain);
    x.dist(&y) / eta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::random_in_ball;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dom() -> Domain {
        Domain::new(1.0, 0.001, 3.0).unwrap()
    }

    #[test]
    fn radial_scaling_and_clamp() {
        let p = project(&Point::new(vec![3.0, 4.0], 0.0005), &dom());
        assert!((p.w[0] - 0.6).abs() < 1e-15 && (p.w[1] - 0.8).abs() < 1e-15);
        assert_eq!(p.lambda, 0.001);
        let p = project(&Point::new(vec![0.0, 0.0], 7.0), &dom());
        assert_eq!(p.lambda, 3.0);
    }

    #[test]
    fn feasible_points_are_fixed_bit_exact() {
        let x = Point::new(vec![0.3, -0.2], 1.234567);
        let p = project(&x, &dom());
        assert_eq!(p, x);
    }

    #[test]
    fn projection_idempotent_and_nonexpansive() {
        let d = Domain::new(2.0, 0.1, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let a = Point::new(
                random_in_ball(&mut rng, 4, 6.0),
                rng.random_range(-2.0..9.0),
            );
            let b = Point::new(
                random_in_ball(&mut rng, 4, 6.0),
                rng.random_range(-2.0..9.0),
            );
            let pa = project(&a, &d);
            assert_eq!(project(&pa, &d), pa);
            let pb = project(&b, &d);
            assert!(pa.dist(&pb) <= a.dist(&b) + 1e-12);
        }
    }

    #[test]
    fn interior_distance_is_gradient_norm() {
        let x = Point::new(vec![0.1, 0.2], 1.0);
        let g = Gradient {
            w: vec![3.0, -1.0],
            lambda: 2.0,
        };
        let dist = dist_to_subdifferential(&x, &g, &dom()).unwrap();
        assert!((dist - g.norm()).abs() < 1e-15);
    }

    #[test]
    fn active_lambda_bounds_absorb_outward_gradient() {
        // at λ0 a positive ∂_λF pushes against the bound and is absorbed
        let x = Point::new(vec![0.1, 0.2], 0.001);
        let g = Gradient {
            w: vec![0.0, 0.0],
            lambda: 5.0,
        };
        assert_eq!(dist_to_subdifferential(&x, &g, &dom()).unwrap(), 0.0);
        let g = Gradient {
            w: vec![0.0, 0.0],
            lambda: -5.0,
        };
        assert_eq!(dist_to_subdifferential(&x, &g, &dom()).unwrap(), 5.0);
        let x = Point::new(vec![0.1, 0.2], 3.0);
        let g = Gradient {
            w: vec![0.0, 0.0],
            lambda: -5.0,
        };
        assert_eq!(dist_to_subdifferential(&x, &g, &dom()).unwrap(), 0.0);
        let g = Gradient {
            w: vec![0.0, 0.0],
            lambda: 5.0,
        };
        assert_eq!(dist_to_subdifferential(&x, &g, &dom()).unwrap(), 5.0);
    }

    #[test]
    fn sphere_distance_matches_grid_search() {
        let d = dom();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let w = crate::loss::random_on_sphere(&mut rng, 3, 1.0);
            let x = Point::new(w.clone(), 1.0);
            let gw: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let g = Gradient {
                w: gw.clone(),
                lambda: 0.0,
            };
            let closed = dist_to_subdifferential(&x, &g, &d).unwrap();
            let f = |t: f64| {
                gw.iter()
                    .zip(&w)
                    .map(|(a, b)| (a + t * b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            };
            // coarse grid over [0, 1e6], then golden-section refinement around the best cell
            let steps = 10_000_000usize;
            let h = 1e6 / steps as f64;
            let mut best = (0usize, f(0.0));
            for k in 1..=steps {
                let v = f(k as f64 * h);
                if v < best.1 {
                    best = (k, v);
                }
            }
            let (mut a, mut b) = (
                ((best.0 as f64) - 1.0).max(0.0) * h,
                (best.0 as f64 + 1.0) * h,
            );
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..200 {
                let c = b - phi * (b - a);
                let e = a + phi * (b - a);
                if f(c) < f(e) {
                    b = e;
                } else {
                    a = c;
                }
            }
            let brute = f(0.5 * (a + b)).min(best.1);
            assert!((closed - brute).abs() <= 1e-8, "{closed} vs {brute}");
        }
    }

    #[test]
    fn step_residual_cases() {
        let d = dom();
        // interior step under a constant gradient: the residual is the gradient itself
        let x = Point::new(vec![0.1, 0.0], 1.0);
        let z = Gradient {
            w: vec![0.5, -0.5],
            lambda: 0.2,
        };
        let mut y = x.clone();
        projected_step(&mut y, &z, 0.1, &d);
        let r = subgradient_residual_from_step(&x, &y, &z, &z, 0.1).unwrap();
        assert!((r - z.norm()).abs() < 1e-13, "{r}");
        // constrained fixed point of an exact gradient step: residual vanishes
        let x = Point::new(vec![0.6, 0.8], d.lambda0);
        let z = Gradient {
            w: vec![-1.2, -1.6],
            lambda: 0.7,
        };
        let mut y = x.clone();
        projected_step(&mut y, &z, 0.1, &d);
        assert!(subgradient_residual_from_step(&x, &y, &z, &z, 0.1).unwrap() < 1e-13);
        // z = 0: no movement, residual is ‖∇F(x)‖
        let x = Point::new(vec![0.1, 0.0], 1.0);
        let zero = Gradient::zeros(2);
        let gn = Gradient {
            w: vec![1.0, 2.0],
            lambda: 2.0,
        };
        assert!(
            (subgradient_residual_from_step(&x, &x, &zero, &gn, 0.1).unwrap() - 3.0).abs() < 1e-15
        );
        assert!(subgradient_residual_from_step(&x, &x, &zero, &gn, 0.0).is_err());
    }

    #[test]
    fn step_residual_dominates_distance() {
        let d = Domain::new(1.0, 0.1, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let x = project(
                &Point::new(random_in_ball(&mut rng, 3, 1.3), rng.random_range(0.0..2.5)),
                &d,
            );
            let z = Gradient {
                w: (0..3).map(|_| rng.random_range(-4.0..4.0)).collect(),
                lambda: rng.random_range(-4.0..4.0),
            };
            let eta = rng.random_range(0.01..1.0);
            let mut y = x.clone();
            projected_step(&mut y, &z, eta, &d);
            let gn = Gradient {
                w: (0..3).map(|_| rng.random_range(-4.0..4.0)).collect(),
                lambda: rng.random_range(-4.0..4.0),
            };
            let r = subgradient_residual_from_step(&x, &y, &z, &gn, eta).unwrap();
            let dd = dist_to_subdifferential(&y, &gn, &d).unwrap();
            assert!(r >= dd - 1e-10, "{r} < {dd}");
        }
    }
}
