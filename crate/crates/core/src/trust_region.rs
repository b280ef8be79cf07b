//! A small trust-region minimiser for low-dimensional smooth objectives.
//!
//! The gradient comes from forward differences, the model Hessian from
//! central second differences, and each subproblem is solved exactly through
//! an eigendecomposition of the model Hessian (the parameter vectors here have
//! one or two entries).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub(crate) const GRADIENT_STEP: f64 = 1e-6;
const HESSIAN_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug)]
pub(crate) struct TrustRegionConfig {
    pub iterations: usize,
    pub initial_radius: f64,
    pub expand: f64,
    pub shrink: f64,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        TrustRegionConfig {
            iterations: 10,
            initial_radius: 1.0,
            expand: 2.0,
            shrink: 0.25,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Minimises `f` from `x0`. Non-finite evaluations count as `+∞`; the initial
/// value must be finite.
pub(crate) fn minimize<F>(f: F, x0: &[f64], config: TrustRegionConfig) -> Option<Minimum>
where
    F: Fn(&[f64]) -> f64,
{
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut x = x0.to_vec();
    let mut fx = eval(&x);
    if !fx.is_finite() {
        return None;
    }
    let mut radius = config.initial_radius;

    for _ in 0..config.iterations {
        let g = gradient(&eval, &x, fx);
        let h = hessian(&eval, &x, fx);
        let step = solve_subproblem(&g, &h, radius);
        let predicted = -(g.dot(&step) + 0.5 * step.dot(&(&h * &step)));
        if !(predicted > 0.0) {
            radius *= config.shrink;
            continue;
        }
        let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let f_trial = eval(&trial);
        let ratio = (fx - f_trial) / predicted;
        if ratio < 0.25 {
            radius *= config.shrink;
        } else if ratio > 0.75 {
            radius *= config.expand;
        }
        if f_trial < fx {
            x = trial;
            fx = f_trial;
        }
    }
    Some(Minimum { x, value: fx })
}

fn gradient(f: &impl Fn(&[f64]) -> f64, x: &[f64], fx: f64) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + GRADIENT_STEP;
        let fwd = f(&probe);
        g[i] = if fwd.is_finite() {
            (fwd - fx) / GRADIENT_STEP
        } else {
            probe[i] = x[i] - GRADIENT_STEP;
            let back = f(&probe);
            if back.is_finite() {
                (fx - back) / GRADIENT_STEP
            } else {
                0.0
            }
        };
        probe[i] = x[i];
    }
    g
}

fn hessian(f: &impl Fn(&[f64]) -> f64, x: &[f64], fx: f64) -> DMatrix<f64> {
    let n = x.len();
    let e = HESSIAN_STEP;
    let at = |offsets: &[(usize, f64)]| {
        let mut p = x.to_vec();
        for &(i, d) in offsets {
            p[i] += d;
        }
        f(&p)
    };
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = (at(&[(i, e)]) - 2.0 * fx + at(&[(i, -e)])) / (e * e);
        for j in 0..i {
            let v = (at(&[(i, e), (j, e)]) - at(&[(i, e), (j, -e)]) - at(&[(i, -e), (j, e)]) + at(&[(i, -e), (j, -e)]))
                / (4.0 * e * e);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    if h.iter().any(|v| !v.is_finite()) {
        // Fall back to a steepest-descent model near an infeasible region.
        return DMatrix::zeros(n, n);
    }
    h
}

/// Exact minimiser of `gᵀp + ½pᵀHp` over `‖p‖ ≤ radius`.
fn solve_subproblem(g: &DVector<f64>, h: &DMatrix<f64>, radius: f64) -> DVector<f64> {
    let eig = SymmetricEigen::new(h.clone());
    let lambda = &eig.eigenvalues;
    let q = &eig.eigenvectors;
    let gq = q.transpose() * g;
    let lmin = lambda.min();
    let scale = lambda.amax().max(1.0);
    let tiny = 1e-12 * scale;

    let step_for = |mu: f64| -> DVector<f64> {
        let coeffs = DVector::from_iterator(gq.len(), gq.iter().zip(lambda.iter()).map(|(gi, li)| -gi / (li + mu)));
        q * coeffs
    };

    if lmin > tiny {
        let newton = step_for(0.0);
        if newton.norm() <= radius {
            return newton;
        }
    }

    // Find μ > max(0, −λ_min) with ‖p(μ)‖ = radius.
    let lower = (-lmin).max(0.0) + tiny;
    let mut lo = lower;
    if step_for(lo).norm() < radius {
        // Hard case: the gradient has (almost) no component along the
        // lowest eigenvector. Fill up the boundary along it.
        let p = step_for(lo);
        let v = q.column(lambda.imin()).into_owned();
        let extra = (radius * radius - p.norm_squared()).max(0.0).sqrt();
        let candidate_a = &p + &v * extra;
        let candidate_b = &p - &v * extra;
        let model = |s: &DVector<f64>| g.dot(s) + 0.5 * s.dot(&(h * s));
        return if model(&candidate_a) <= model(&candidate_b) {
            candidate_a
        } else {
            candidate_b
        };
    }
    let mut hi = lower.max(1.0);
    while step_for(hi).norm() > radius {
        hi *= 2.0;
        if !hi.is_finite() {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if step_for(mid).norm() > radius {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-15 * hi {
            break;
        }
    }
    step_for(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2);
        let m = minimize(f, &[0.0, 0.0], TrustRegionConfig::default()).unwrap();
        assert!((m.x[0] - 3.0).abs() < 1e-4, "{:?}", m.x);
        assert!((m.x[1] + 1.0).abs() < 1e-4, "{:?}", m.x);
        assert!(m.value <= f(&[0.0, 0.0]));
    }

    #[test]
    fn far_minimum_is_reached_by_radius_growth() {
        // linear far from the optimum, like the LOO criterion in log-amplitude
        let f = |x: &[f64]| 2.0 * x[0] + (-x[0] - 20.0).exp();
        let m = minimize(f, &[1.0], TrustRegionConfig::default()).unwrap();
        let optimum = -20.0 - 2f64.ln();
        assert!((m.x[0] - optimum).abs() < 0.1, "{:?}", m.x);
    }

    #[test]
    fn infeasible_start() {
        let f = |_: &[f64]| f64::NAN;
        assert!(minimize(f, &[0.0], TrustRegionConfig::default()).is_none());
    }

    #[test]
    fn rosenbrock_descends() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = minimize(f, &[-1.2, 1.0], TrustRegionConfig::default()).unwrap();
        assert!(m.value < f(&[-1.2, 1.0]));
    }

    #[test]
    fn subproblem_negative_curvature_hits_boundary() {
        let g = DVector::from_vec(vec![1.0, 0.0]);
        let h = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let p = solve_subproblem(&g, &h, 0.5);
        assert!((p.norm() - 0.5).abs() < 1e-9);
        let h0 = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 2.0]);
        let p0 = solve_subproblem(&DVector::zeros(2), &h0, 0.5);
        assert!((p0.norm() - 0.5).abs() < 1e-9);
    }
}
