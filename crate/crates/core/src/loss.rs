//! Per-sample losses `ℓ_i(w) ≥ 0` with exact gradients and certified
//! bounds over the ball `‖w‖ ≤ R`.
//!
//! Two models are provided:
//!
//! * `Logistic`: `log(1 + exp(−y·wᵀa))`, convex in `w`.
//! * `Mlp`: one tanh hidden layer followed by softmax cross-entropy,
//!   smooth and non-convex. Parameters are packed as
//!   `[W1 (h×d, row-major), b1 (h), W2 (k×h, row-major), b2 (k)]`.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

/// Sup of |tanh''| over the real line, 4/(3√3).
const TANH_SECOND_DERIV_MAX: f64 = 0.769_800_358_919_501;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossModel {
    /// Binary logistic loss on ±1 labels, no intercept.
    Logistic,
    /// Two-layer tanh network with `hidden` units and `classes` outputs.
    Mlp { hidden: usize, classes: usize },
}

/// Value, gradient-norm and smoothness bounds over the feasible ball.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBounds {
    /// `sup_i sup_{‖w‖≤R} |ℓ_i(w)|`
    pub c: f64,
    /// `sup_i sup_{‖w‖≤R} ‖∇ℓ_i(w)‖`
    pub g: f64,
    /// Spectral bound on `∇²ℓ_i` over the ball.
    pub l: f64,
}

#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `1 / (1 + exp(x))` without overflow.
#[inline]
fn sigmoid_neg(x: f64) -> f64 {
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

impl LossModel {
    pub fn is_convex(&self) -> bool {
        matches!(self, LossModel::Logistic)
    }

    /// Number of trainable parameters for feature dimension `d`.
    pub fn num_params(&self, d: usize) -> usize {
        match *self {
            LossModel::Logistic => d,
            LossModel::Mlp { hidden, classes } => hidden * d + hidden + classes * hidden + classes,
        }
    }

    fn check(&self, data: &Dataset, i: usize, w: &[f64]) -> Result<()> {
        if i >= data.n() {
            return Err(Error::IndexOutOfRange {
                index: i,
                n: data.n(),
            });
        }
        let p = self.num_params(data.d());
        if w.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: w.len(),
            });
        }
        if let LossModel::Mlp { classes, .. } = *self {
            if data.label_set().num_classes() > classes {
                return Err(Error::InvalidParameter(format!(
                    "dataset has {} classes, model has {classes} outputs",
                    data.label_set().num_classes()
                )));
            }
        }
        Ok(())
    }

    pub fn value(&self, data: &Dataset, i: usize, w: &[f64]) -> Result<f64> {
        self.check(data, i, w)?;
        Ok(match *self {
            LossModel::Logistic => softplus(-data.signed_label(i) * dot(w, data.row(i))),
            LossModel::Mlp { hidden, classes } => {
                mlp_forward(hidden, classes, data.row(i), data.class_index(i), w).loss
            }
        })
    }

    pub fn grad(&self, data: &Dataset, i: usize, w: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; w.len()];
        self.value_and_grad_into(data, i, w, &mut g)?;
        Ok(g)
    }

    /// Writes `∇ℓ_i(w)` into `grad` (overwriting it) and returns `ℓ_i(w)`.
    pub fn value_and_grad_into(
        &self,
        data: &Dataset,
        i: usize,
        w: &[f64],
        grad: &mut [f64],
    ) -> Result<f64> {
        self.check(data, i, w)?;
        if grad.len() != w.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                got: grad.len(),
            });
        }
        Ok(match *self {
            LossModel::Logistic => {
                let a = data.row(i);
                let y = data.signed_label(i);
                let m = y * dot(w, a);
                let coef = -y * sigmoid_neg(m);
                for (gj, aj) in grad.iter_mut().zip(a) {
                    *gj = coef * aj;
                }
                softplus(-m)
            }
            LossModel::Mlp { hidden, classes } => {
                mlp_backward(hidden, classes, data.row(i), data.class_index(i), w, grad)
            }
        })
    }

    /// Predicted label in the dataset's own alphabet.
    pub fn predict(&self, data: &Dataset, i: usize, w: &[f64]) -> i32 {
        match *self {
            LossModel::Logistic => {
                let score = dot(w, data.row(i));
                let positive = score > 0.0;
                match data.label_set() {
                    crate::data::LabelSet::Signed => {
                        if positive {
                            1
                        } else {
                            -1
                        }
                    }
                    crate::data::LabelSet::Classes(_) => i32::from(positive),
                }
            }
            LossModel::Mlp { hidden, classes } => {
                let f = mlp_forward(hidden, classes, data.row(i), 0, w);
                let k = f
                    .logits
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (k, &z)| {
                        if z > best.1 {
                            (k, z)
                        } else {
                            best
                        }
                    })
                    .0;
                match data.label_set() {
                    crate::data::LabelSet::Signed => {
                        if k > 0 {
                            1
                        } else {
                            -1
                        }
                    }
                    crate::data::LabelSet::Classes(_) => k as i32,
                }
            }
        }
    }

    /// Fraction of rows classified correctly.
    pub fn accuracy(&self, data: &Dataset, w: &[f64]) -> f64 {
        let hits = (0..data.n())
            .filter(|&i| self.predict(data, i, w) == data.label(i))
            .count();
        hits as f64 / data.n() as f64
    }

    /// Closed-form bounds over `‖w‖ ≤ radius`.
    pub fn bounds(&self, data: &Dataset, radius: f64) -> Result<LossBounds> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        let a_max = data.max_row_norm();
        Ok(match *self {
            LossModel::Logistic => LossBounds {
                c: softplus(radius * a_max),
                g: a_max,
                l: a_max * a_max / 4.0,
            },
            LossModel::Mlp { hidden, classes } => {
                let h = hidden as f64;
                let r = radius;
                let a1 = (a_max * a_max + 1.0).sqrt();
                // logits satisfy ‖z‖ ≤ R·sqrt(h+1); CE ≤ log k + (max z − z_y) ≤ log k + √2‖z‖
                let c = (classes as f64).ln() + std::f64::consts::SQRT_2 * r * (h + 1.0).sqrt();
                // ‖softmax − e_y‖ ≤ √2
                let g = std::f64::consts::SQRT_2 * (h + 1.0 + r * r * a1 * a1).sqrt();
                // Gauss-Newton part uses ‖J‖ ≤ sqrt(h+1) + R·‖(a,1)‖ and ‖∇²CE‖ ≤ 1/2;
                // curvature of the logits is at most ‖(a,1)‖ + R·max|tanh''|·‖(a,1)‖².
                let jac = (h + 1.0).sqrt() + r * a1;
                let curv = a1 + r * TANH_SECOND_DERIV_MAX * a1 * a1;
                let l = 0.5 * jac * jac + std::f64::consts::SQRT_2 * curv;
                LossBounds { c, g, l }
            }
        })
    }
}

pub fn loss_value(model: &LossModel, data: &Dataset, i: usize, w: &[f64]) -> Result<f64> {
    model.value(data, i, w)
}

pub fn loss_grad(model: &LossModel, data: &Dataset, i: usize, w: &[f64]) -> Result<Vec<f64>> {
    model.grad(data, i, w)
}

pub fn loss_bounds(model: &LossModel, data: &Dataset, radius: f64) -> Result<LossBounds> {
    model.bounds(data, radius)
}

struct MlpForward {
    hidden_act: Vec<f64>,
    logits: Vec<f64>,
    probs: Vec<f64>,
    loss: f64,
}

fn mlp_forward(hidden: usize, classes: usize, a: &[f64], y: usize, w: &[f64]) -> MlpForward {
    let d = a.len();
    let (w1, rest) = w.split_at(hidden * d);
    let (b1, rest) = rest.split_at(hidden);
    let (w2, b2) = rest.split_at(classes * hidden);
    let hidden_act: Vec<f64> = (0..hidden)
        .map(|j| (dot(&w1[j * d..(j + 1) * d], a) + b1[j]).tanh())
        .collect();
    let logits: Vec<f64> = (0..classes)
        .map(|k| dot(&w2[k * hidden..(k + 1) * hidden], &hidden_act) + b2[k])
        .collect();
    let (probs, logs) = crate::linalg::softmax_with_logs(&logits);
    let loss = (-logs[y]).max(0.0);
    MlpForward {
        hidden_act,
        logits,
        probs,
        loss,
    }
}

fn mlp_backward(
    hidden: usize,
    classes: usize,
    a: &[f64],
    y: usize,
    w: &[f64],
    grad: &mut [f64],
) -> f64 {
    let d = a.len();
    let fwd = mlp_forward(hidden, classes, a, y, w);
    let w2 = &w[hidden * d + hidden..hidden * d + hidden + classes * hidden];

    let mut delta = fwd.probs.clone();
    delta[y] -= 1.0;

    let (g1, rest) = grad.split_at_mut(hidden * d);
    let (gb1, rest) = rest.split_at_mut(hidden);
    let (g2, gb2) = rest.split_at_mut(classes * hidden);

    for k in 0..classes {
        for j in 0..hidden {
            g2[k * hidden + j] = delta[k] * fwd.hidden_act[j];
        }
        gb2[k] = delta[k];
    }
    for j in 0..hidden {
        let back: f64 = (0..classes).map(|k| w2[k * hidden + j] * delta[k]).sum();
        let gpre = back * (1.0 - fwd.hidden_act[j] * fwd.hidden_act[j]);
        gb1[j] = gpre;
        for (g, aj) in g1[j * d..(j + 1) * d].iter_mut().zip(a) {
            *g = gpre * aj;
        }
    }
    fwd.loss
}

/// Uniform random point on the sphere `‖w‖ = radius`.
pub fn random_on_sphere<R: rand::Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let nv = norm(&v);
        if nv > 1e-12 {
            return v.into_iter().map(|x| x * radius / nv).collect();
        }
    }
}

/// Uniform random point in the ball `‖w‖ ≤ radius`.
pub fn random_in_ball<R: rand::Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    random_on_sphere(rng, dim, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_imbalanced, LabelSet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_sample(a: Vec<f64>, y: i32) -> Dataset {
        let d = a.len();
        Dataset::new(a, vec![y], d, LabelSet::Signed).unwrap()
    }

    fn fd_grad(model: &LossModel, data: &Dataset, i: usize, w: &[f64], h: f64) -> Vec<f64> {
        let mut wp = w.to_vec();
        (0..w.len())
            .map(|j| {
                wp[j] = w[j] + h;
                let fp = model.value(data, i, &wp).unwrap();
                wp[j] = w[j] - h;
                let fm = model.value(data, i, &wp).unwrap();
                wp[j] = w[j];
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn logistic_at_zero_margin_is_log2() {
        let ds = one_sample(vec![0.3, -1.2], 1);
        let v = LossModel::Logistic.value(&ds, 0, &[0.0, 0.0]).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
        let g = LossModel::Logistic.grad(&ds, 0, &[0.0, 0.0]).unwrap();
        assert!((g[0] + 0.5 * 0.3).abs() < 1e-15 && (g[1] - 0.5 * 1.2).abs() < 1e-15);
    }

    #[test]
    fn logistic_saturates() {
        let ds = one_sample(vec![1.0, 0.0], 1);
        let w = [50.0, 0.0];
        assert!(LossModel::Logistic.value(&ds, 0, &w).unwrap() <= 2e-22);
        let g = LossModel::Logistic.grad(&ds, 0, &w).unwrap();
        assert!(norm(&g) <= 2e-22 * 1.0);
    }

    #[test]
    fn logistic_fd_relative_error() {
        let ds = gen_imbalanced(30, 10, 4, 1.0, 0.1, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let i = rand::Rng::random_range(&mut rng, 0..ds.n());
            let w = random_in_ball(&mut rng, 4, 2.0);
            let g = LossModel::Logistic.grad(&ds, i, &w).unwrap();
            let fd = fd_grad(&LossModel::Logistic, &ds, i, &w, 1e-6);
            let err = norm(&g.iter().zip(&fd).map(|(a, b)| a - b).collect::<Vec<_>>());
            assert!(err <= 1e-6 * norm(&g).max(1e-3), "err {err}");
        }
    }

    #[test]
    fn gradient_consistency_both_models() {
        let ds = gen_imbalanced(20, 8, 3, 1.0, 0.0, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for model in [
            LossModel::Logistic,
            LossModel::Mlp {
                hidden: 4,
                classes: 2,
            },
        ] {
            let p = model.num_params(ds.d());
            for _ in 0..100 {
                let i = rand::Rng::random_range(&mut rng, 0..ds.n());
                let w = random_in_ball(&mut rng, p, 1.5);
                let g = model.grad(&ds, i, &w).unwrap();
                let fd = fd_grad(&model, &ds, i, &w, 1e-6);
                let err = norm(&g.iter().zip(&fd).map(|(a, b)| a - b).collect::<Vec<_>>());
                assert!(err / (1.0 + norm(&g)) <= 1e-5, "{model:?}: {err}");
            }
        }
    }

    #[test]
    fn logistic_bounds_closed_form() {
        let ds = one_sample(vec![0.6, 0.8], 1);
        let b = LossModel::Logistic.bounds(&ds, 1.0).unwrap();
        assert!((b.c - (1.0 + std::f64::consts::E).ln()).abs() < 1e-12);
        assert!((b.g - 1.0).abs() < 1e-15);
        assert!((b.l - 0.25).abs() < 1e-15);

        let zero = one_sample(vec![0.0, 0.0], -1);
        let b = LossModel::Logistic.bounds(&zero, 3.0).unwrap();
        assert!((b.c - 2f64.ln()).abs() < 1e-15);
        assert_eq!((b.g, b.l), (0.0, 0.0));
        assert!(LossModel::Logistic.bounds(&zero, 0.0).is_err());
        assert!(LossModel::Logistic.bounds(&zero, -1.0).is_err());
    }

    #[test]
    fn errors_on_bad_index_and_dimension() {
        let ds = one_sample(vec![1.0, 2.0], 1);
        assert!(matches!(
            LossModel::Logistic.value(&ds, 1, &[0.0, 0.0]),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            LossModel::Logistic.grad(&ds, 0, &[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    /// Straight-line reimplementation of the network forward pass.
    fn reference_mlp_loss(h: usize, k: usize, a: &[f64], y: usize, w: &[f64]) -> f64 {
        let d = a.len();
        let mut hid = vec![0.0; h];
        for j in 0..h {
            let mut s = w[h * d + j];
            for t in 0..d {
                s += w[j * d + t] * a[t];
            }
            hid[j] = s.tanh();
        }
        let off = h * d + h;
        let mut z = vec![0.0; k];
        for c in 0..k {
            let mut s = w[off + k * h + c];
            for j in 0..h {
                s += w[off + c * h + j] * hid[j];
            }
            z[c] = s;
        }
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        lse - z[y]
    }

    #[test]
    fn mlp_matches_reference_forward() {
        let ds = gen_imbalanced(10, 5, 3, 1.0, 0.0, 9).unwrap();
        let model = LossModel::Mlp {
            hidden: 5,
            classes: 2,
        };
        let p = model.num_params(3);
        let zero = vec![0.0; p];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..ds.n() {
            let v = model.value(&ds, i, &zero).unwrap();
            assert!((v - 2f64.ln()).abs() < 1e-15);
            assert!(
                (v - reference_mlp_loss(5, 2, ds.row(i), ds.class_index(i), &zero)).abs() < 1e-15
            );
            let w = random_in_ball(&mut rng, p, 2.0);
            let v = model.value(&ds, i, &w).unwrap();
            assert!((v - reference_mlp_loss(5, 2, ds.row(i), ds.class_index(i), &w)).abs() < 1e-12);
        }
    }

    #[test]
    fn mlp_bounds_dominate_sampled_values() {
        let ds = gen_imbalanced(20, 10, 3, 2.0, 0.1, 3).unwrap();
        let model = LossModel::Mlp {
            hidden: 4,
            classes: 2,
        };
        let r = 2.0;
        let b = model.bounds(&ds, r).unwrap();
        let p = model.num_params(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut g = vec![0.0; p];
        for _ in 0..10_000 {
            let w = random_on_sphere(&mut rng, p, r);
            let i = rand::Rng::random_range(&mut rng, 0..ds.n());
            let v = model.value_and_grad_into(&ds, i, &w, &mut g).unwrap();
            assert!(v >= 0.0 && v <= b.c, "value {v} > C {}", b.c);
            assert!(norm(&g) <= b.g, "grad {} > G {}", norm(&g), b.g);
        }
    }

    #[test]
    fn logistic_bounds_dominate_sampled_values() {
        let ds = gen_imbalanced(20, 10, 3, 2.0, 0.1, 3).unwrap();
        let b = LossModel::Logistic.bounds(&ds, 1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut g = vec![0.0; 3];
        for _ in 0..10_000 {
            let w = random_in_ball(&mut rng, 3, 1.5);
            let i = rand::Rng::random_range(&mut rng, 0..ds.n());
            let v = LossModel::Logistic
                .value_and_grad_into(&ds, i, &w, &mut g)
                .unwrap();
            assert!(v <= b.c + 1e-12 && norm(&g) <= b.g + 1e-12);
        }
    }

    #[test]
    fn logistic_is_convex_along_segments() {
        let ds = gen_imbalanced(20, 10, 3, 1.0, 0.1, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let w1 = random_in_ball(&mut rng, 3, 2.0);
            let w2 = random_in_ball(&mut rng, 3, 2.0);
            let t: f64 = rand::Rng::random(&mut rng);
            let i = rand::Rng::random_range(&mut rng, 0..ds.n());
            let wt: Vec<f64> = w1
                .iter()
                .zip(&w2)
                .map(|(a, b)| t * a + (1.0 - t) * b)
                .collect();
            let lhs = LossModel::Logistic.value(&ds, i, &wt).unwrap();
            let rhs = t * LossModel::Logistic.value(&ds, i, &w1).unwrap()
                + (1.0 - t) * LossModel::Logistic.value(&ds, i, &w2).unwrap();
            assert!(lhs <= rhs + 1e-12);
        }
    }

    #[test]
    fn accuracy_of_separating_direction() {
        let ds = gen_imbalanced(90, 10, 3, 10.0, 0.0, 1).unwrap();
        assert_eq!(LossModel::Logistic.accuracy(&ds, &[1.0, 0.0, 0.0]), 1.0);
    }
}
