//! Shared helpers for the integration tests: random instances and a
//! straightforward dense-LU GP oracle that shares no code with the
//! library's factorised path.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spre::index_poly::{is_unisolvent, DEFAULT_RANK_TOL};
use spre::{Dataset, Design, IndexSet, KernelFamily, KernelSpec, MultiIndex};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `{0}` plus up to `max_extra` distinct monomials of order 1 to 3.
pub fn random_index_set(rng: &mut ChaCha8Rng, dim: usize, max_extra: usize) -> IndexSet {
    let mut pool: Vec<MultiIndex> = (1..=3).flat_map(|o| MultiIndex::all_of_order(dim, o)).collect();
    let k = rng.random_range(0..=max_extra.min(pool.len()));
    let mut chosen = vec![MultiIndex::zero(dim)];
    for _ in 0..k {
        let i = rng.random_range(0..pool.len());
        chosen.push(pool.swap_remove(i));
    }
    IndexSet::new(chosen).unwrap()
}

pub fn random_design(rng: &mut ChaCha8Rng, dim: usize, n: usize, lo: f64) -> Design {
    let points = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(lo..1.0)).collect())
        .collect();
    Design::with_points(dim, points).unwrap()
}

/// A design of size `n` on which `a` is unisolvent.
pub fn unisolvent_design(rng: &mut ChaCha8Rng, a: &IndexSet, n: usize) -> Design {
    loop {
        let d = random_design(rng, a.dim(), n, 0.05);
        if is_unisolvent(a, &d, DEFAULT_RANK_TOL) {
            return d;
        }
    }
}

pub fn random_kernel(rng: &mut ChaCha8Rng, family: KernelFamily) -> KernelSpec {
    let sigma2 = rng.random_range(0.1..5.0);
    let ell = match family {
        KernelFamily::Gaussian => rng.random_range(0.1..0.6),
        _ => rng.random_range(0.2..2.0),
    };
    KernelSpec::from_params(family, sigma2, ell).unwrap()
}

pub fn random_family(rng: &mut ChaCha8Rng) -> KernelFamily {
    KernelFamily::ALL[rng.random_range(0..4)]
}

/// Random coefficients for each monomial of `a`.
pub fn random_poly(rng: &mut ChaCha8Rng, a: &IndexSet) -> Vec<f64> {
    (0..a.len()).map(|_| rng.random_range(-2.0..2.0)).collect()
}

pub fn poly_eval(a: &IndexSet, coeffs: &[f64], x: &[f64]) -> f64 {
    a.iter()
        .zip(coeffs)
        .map(|(alpha, c)| {
            c * alpha
                .exponents()
                .iter()
                .zip(x)
                .map(|(&e, &v)| v.powi(e as i32))
                .product::<f64>()
        })
        .sum()
}

/// Independent kernel formulas.
pub fn kernel_value(k: &KernelSpec, x: &[f64], y: &[f64]) -> f64 {
    let s2 = k.sigma2();
    let r = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    match k.family() {
        KernelFamily::WhiteNoise => {
            if x == y {
                s2
            } else {
                0.0
            }
        }
        KernelFamily::Matern12 => s2 * (-r / k.length_scale().unwrap()).exp(),
        KernelFamily::Matern32 => {
            let z = 3f64.sqrt() * r / k.length_scale().unwrap();
            s2 * (1.0 + z) * (-z).exp()
        }
        KernelFamily::Gaussian => {
            let l = k.length_scale().unwrap();
            s2 * (-(r * r) / (l * l)).exp()
        }
    }
}

fn monomials(a: &IndexSet, x: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        a.len(),
        a.iter().map(|alpha| {
            alpha
                .exponents()
                .iter()
                .zip(x)
                .map(|(&e, &v)| v.powi(e as i32))
                .product::<f64>()
        }),
    )
}

/// Posterior mean and variance by dense LU solves. Monomial columns are
/// equilibrated to unit max-norm first; the posterior does not depend on the
/// basis of `P_A`, and unscaled high powers would otherwise cost digits.
pub fn naive_posterior(a: &IndexSet, k: &KernelSpec, points: &[Vec<f64>], f: &[f64], x: &[f64]) -> (f64, f64) {
    let n = points.len();
    let kmat = DMatrix::from_fn(n, n, |i, j| kernel_value(k, &points[i], &points[j]));
    let mut v = DMatrix::from_fn(n, a.len(), |i, j| monomials(a, &points[i])[j]);
    let mut vx = monomials(a, x);
    for j in 0..a.len() {
        let s = v.column(j).amax();
        v.column_mut(j).scale_mut(1.0 / s);
        vx[j] /= s;
    }
    let klu = kmat.clone().lu();
    let fv = DVector::from_column_slice(f);
    let kinv_f = klu.solve(&fv).expect("invertible Gram matrix");
    let kinv_v = klu.solve(&v).expect("invertible Gram matrix");
    let m = v.transpose() * &kinv_v;
    let mlu = m.lu();
    let beta = mlu.solve(&(v.transpose() * &kinv_f)).expect("invertible normal matrix");
    let kx = DVector::from_fn(n, |i, _| kernel_value(k, &points[i], x));
    let kinv_kx = klu.solve(&kx).expect("invertible Gram matrix");
    let r = vx - v.transpose() * &kinv_kx;
    let mean = kx.dot(&kinv_f) + r.dot(&beta);
    let var = kernel_value(k, x, x) - kx.dot(&kinv_kx) + r.dot(&mlu.solve(&r).expect("invertible normal matrix"));
    (mean, var)
}

/// `Σ −log N(fᵢ; μᵢ, σᵢ²)` by refitting on every fold with the naive oracle.
pub fn naive_loocv(a: &IndexSet, k: &KernelSpec, data: &Dataset) -> f64 {
    let pts = data.design().points();
    let f = data.values();
    (0..data.len())
        .map(|i| {
            let rest: Vec<Vec<f64>> = pts
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, p)| p.clone())
                .collect();
            let fr: Vec<f64> = f.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
            let (mu, var) = naive_posterior(a, k, &rest, &fr, &pts[i]);
            0.5 * (2.0 * std::f64::consts::PI * var).ln() + 0.5 * (f[i] - mu).powi(2) / var
        })
        .sum()
}

/// Lagrange weights at 0 on a 1-D node set from the product formula.
pub fn lagrange_product_at_zero(nodes: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|i| {
            nodes
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, &xj)| (0.0 - xj) / (nodes[i] - xj))
                .product()
        })
        .collect()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Condition number of the Gram matrix; used to keep random instances within
/// what double precision can resolve to the tolerances under test.
pub fn gram_condition(k: &KernelSpec, design: &Design) -> f64 {
    let p = design.points();
    let n = p.len();
    let g = DMatrix::from_fn(n, n, |i, j| kernel_value(k, &p[i], &p[j]));
    let ev = g.symmetric_eigenvalues();
    ev.max() / ev.min()
}

pub const MAX_GRAM_CONDITION: f64 = 1e8;

/// A kernel of the given family whose Gram matrix on `design` has condition
/// number at most `MAX_GRAM_CONDITION`.
pub fn conditioned_kernel(rng: &mut ChaCha8Rng, family: KernelFamily, design: &Design) -> Option<KernelSpec> {
    (0..100)
        .map(|_| random_kernel(rng, family))
        .find(|k| gram_condition(k, design) <= MAX_GRAM_CONDITION)
}
