use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Result, SpreError};
use crate::index_poly::check_dim;

const WIDTH_TOL: f64 = 1e-9;

fn q(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn half() -> BigRational {
    BigRational::new(BigInt::from(1), BigInt::from(2))
}

fn horner_exact(coeffs: &[BigRational], u: &BigRational) -> BigRational {
    coeffs.iter().rev().fold(BigRational::zero(), |acc, c| acc * u + c)
}

fn antiderivative(coeffs: &[BigRational]) -> Vec<BigRational> {
    let mut out = Vec::with_capacity(coeffs.len() + 1);
    out.push(BigRational::zero());
    for (k, c) in coeffs.iter().enumerate() {
        out.push(c / q(k as i64 + 1));
    }
    out
}

/// A function on `[0,1]` that is polynomial on each side of `z = 1/2`.
///
/// Coefficients are exact and stored in powers of `u = z − 1/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewisePoly {
    left: Vec<BigRational>,
    right: Vec<BigRational>,
    left_f64: Vec<f64>,
    right_f64: Vec<f64>,
}

impl PiecewisePoly {
    fn from_exact(left: Vec<BigRational>, right: Vec<BigRational>) -> Self {
        let to_f64 = |v: &[BigRational]| v.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect();
        PiecewisePoly {
            left_f64: to_f64(&left),
            right_f64: to_f64(&right),
            left,
            right,
        }
    }

    /// `|z − 1/2|`.
    pub fn abs_kink() -> Self {
        PiecewisePoly::from_exact(vec![q(0), q(-1)], vec![q(0), q(1)])
    }

    /// The running integral `∫₀^z`, which vanishes at `z = 0`.
    pub fn integrate(&self) -> Self {
        let pl = antiderivative(&self.left);
        let pr = antiderivative(&self.right);
        let offset = horner_exact(&pl, &-half());
        let mut left = pl;
        left[0] -= &offset;
        let mut right = pr;
        right[0] -= &offset;
        PiecewisePoly::from_exact(left, right)
    }

    /// `φ_i`, the `i`-fold running integral of `|z − 1/2|`.
    pub fn phi(i: usize) -> Self {
        (0..i).fold(PiecewisePoly::abs_kink(), |p, _| p.integrate())
    }

    pub fn degree(&self) -> usize {
        self.left.len().max(self.right.len()) - 1
    }

    pub fn eval_exact(&self, z: &BigRational) -> BigRational {
        let u = z - half();
        if u.is_negative() {
            horner_exact(&self.left, &u)
        } else {
            horner_exact(&self.right, &u)
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        let u = z - 0.5;
        let coeffs = if u < 0.0 { &self.left_f64 } else { &self.right_f64 };
        coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    /// `k`-th derivative from the left and right of the breakpoint.
    pub fn one_sided_derivatives_at_kink(&self, k: usize) -> (f64, f64) {
        let d = |c: &[f64]| {
            c.get(k)
                .map(|v| v * (1..=k).map(|j| j as f64).product::<f64>())
                .unwrap_or(0.0)
        };
        (d(&self.left_f64), d(&self.right_f64))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Integrand {
    Kinked {
        phi: PiecewisePoly,
        norm_inf: BigRational,
        norm_inf_f64: f64,
    },
    Constant(f64),
}

/// Midpoint-rule integration of `g(t) = 1 + φ_{2s+2}(mean t) / ‖φ_{2s+2}‖∞`
/// over `[0,1]^d`, with cell widths as the tolerance parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct CubatureProblem {
    dim: usize,
    smoothness: u32,
    integrand: Integrand,
}

impl CubatureProblem {
    pub fn new(dim: usize, smoothness: u32) -> Result<Self> {
        if dim == 0 {
            return Err(SpreError::invalid("cubature dimension must be positive"));
        }
        let phi = PiecewisePoly::phi(2 * smoothness as usize + 2);
        // φ_i ≥ 0 is non-decreasing for i ≥ 1, so the sup-norm sits at z = 1.
        let norm_inf = phi.eval_exact(&q(1));
        let norm_inf_f64 = norm_inf.to_f64().unwrap_or(f64::NAN);
        Ok(CubatureProblem {
            dim,
            smoothness,
            integrand: Integrand::Kinked {
                phi,
                norm_inf,
                norm_inf_f64,
            },
        })
    }

    /// `g ≡ c`, for checking the quadrature itself.
    pub fn constant(dim: usize, c: f64) -> Result<Self> {
        if dim == 0 {
            return Err(SpreError::invalid("cubature dimension must be positive"));
        }
        Ok(CubatureProblem {
            dim,
            smoothness: 0,
            integrand: Integrand::Constant(c),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn smoothness(&self) -> u32 {
        self.smoothness
    }

    pub fn phi(&self) -> Option<&PiecewisePoly> {
        match &self.integrand {
            Integrand::Kinked { phi, .. } => Some(phi),
            Integrand::Constant(_) => None,
        }
    }

    pub fn norm_inf(&self) -> Option<f64> {
        match &self.integrand {
            Integrand::Kinked { norm_inf_f64, .. } => Some(*norm_inf_f64),
            Integrand::Constant(_) => None,
        }
    }

    /// The integrand at a point of the unit cube.
    pub fn integrand(&self, t: &[f64]) -> f64 {
        match &self.integrand {
            Integrand::Constant(c) => *c,
            Integrand::Kinked { phi, norm_inf_f64, .. } => {
                let mean = t.iter().sum::<f64>() / t.len() as f64;
                1.0 + phi.eval(mean) / norm_inf_f64
            }
        }
    }

    pub fn eval(&self, widths: &[f64]) -> Result<f64> {
        cubature_eval(self, widths)
    }

    pub fn truth(&self) -> f64 {
        cubature_truth(self)
    }
}

/// Validates a width as `1/N` and returns `N`.
fn cells_for_width(x: f64) -> Result<usize> {
    if !(x > 0.0 && x <= 1.0 + WIDTH_TOL) {
        return Err(SpreError::invalid(format!(
            "width {x} is not the reciprocal of a positive integer"
        )));
    }
    let inv = 1.0 / x;
    let n = inv.round();
    if (inv - n).abs() > WIDTH_TOL * inv || n < 1.0 {
        return Err(SpreError::invalid(format!(
            "width {x} is not the reciprocal of a positive integer"
        )));
    }
    Ok(n as usize)
}

#[derive(Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

/// Midpoint rule on the `N₁ × … × N_d` grid with `Nⱼ = 1/xⱼ`.
pub fn cubature_eval(prob: &CubatureProblem, widths: &[f64]) -> Result<f64> {
    check_dim(prob.dim, widths.len())?;
    let cells: Vec<usize> = widths.iter().map(|&x| cells_for_width(x)).collect::<Result<_>>()?;
    let (phi, norm) = match &prob.integrand {
        Integrand::Constant(c) => return Ok(*c),
        Integrand::Kinked { phi, norm_inf_f64, .. } => (phi, *norm_inf_f64),
    };
    let d = prob.dim;
    let inv_d = 1.0 / d as f64;
    let mids: Vec<Vec<f64>> = cells
        .iter()
        .map(|&n| (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect())
        .collect();

    let rows: Vec<f64> = mids[0]
        .par_iter()
        .map(|&t0| {
            let mut acc = Neumaier::default();
            let mut idx = vec![0usize; d];
            loop {
                let s = t0 + (1..d).map(|j| mids[j][idx[j]]).sum::<f64>();
                acc.add(phi.eval(s * inv_d));
                let mut j = d;
                loop {
                    j -= 1;
                    if j == 0 {
                        return acc.value();
                    }
                    idx[j] += 1;
                    if idx[j] < cells[j] {
                        break;
                    }
                    idx[j] = 0;
                }
            }
        })
        .collect();
    let mut total = Neumaier::default();
    for r in rows {
        total.add(r);
    }
    let count: f64 = cells.iter().map(|&n| n as f64).product();
    Ok(1.0 + total.value() / count / norm)
}

/// Exact `∫ g` over the unit cube.
///
/// With `Φ = φ_{2s+2+d}` the `d`-fold running integral of `φ_{2s+2}`, the
/// integral of `φ_{2s+2}((t₁+…+t_d)/d)` is the `d`-th forward difference
/// `dᵈ Σₖ (−1)^{d−k} C(d,k) Φ(k/d)`.
pub fn cubature_truth(prob: &CubatureProblem) -> f64 {
    let (phi, norm) = match &prob.integrand {
        Integrand::Constant(c) => return *c,
        Integrand::Kinked { phi, norm_inf, .. } => (phi, norm_inf),
    };
    let d = prob.dim;
    let big_phi = (0..d).fold(phi.clone(), |p, _| p.integrate());
    let mut acc = BigRational::zero();
    let mut binom = BigInt::one();
    for k in 0..=d {
        if k > 0 {
            binom = binom * BigInt::from(d - k + 1) / BigInt::from(k);
        }
        let z = BigRational::new(BigInt::from(k), BigInt::from(d));
        let term = big_phi.eval_exact(&z) * BigRational::from_integer(binom.clone());
        if (d - k).is_multiple_of(2) {
            acc += term;
        } else {
            acc -= term;
        }
    }
    let scale = BigRational::from_integer(BigInt::from(d).pow(d as u32));
    let integral = acc * scale / norm;
    1.0 + integral.to_f64().unwrap_or(f64::NAN)
}
