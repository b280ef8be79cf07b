//! The extrapolation engines.
//!
//! SPRE models `f` as a GP whose mean is a flat-prior combination of the
//! monomials in `A`. Conditioning on data gives closed-form posterior moments:
//!
//! ```text
//! mean(x*) = k(x*)ᵀK⁻¹f + r_A(x*)ᵀβ̂
//! var(x*)  = k(x*,x*) − k(x*)ᵀK⁻¹k(x*) + r_A(x*)ᵀ(V_AᵀK⁻¹V_A)⁻¹r_A(x*)
//! r_A(x*)  = v_A(x*) − V_AᵀK⁻¹k(x*),   β̂ = (V_AᵀK⁻¹V_A)⁻¹V_AᵀK⁻¹f
//! ```
//!
//! Internally the design is divided by its largest coordinate `ρ` before the
//! Vandermonde matrix is built. Column `α` then changes by `ρ^{|α|}`, which the
//! posterior is invariant to, and `β̂` is mapped back on output. Without this,
//! designs at `h ~ 1e-13` produce columns spanning dozens of orders of magnitude.

use nalgebra::linalg::{Cholesky, QR};
use nalgebra::{DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpreError};
use crate::index_poly::{
    check_dim, is_unisolvent, lagrange_at_zero, vandermonde_unchecked, Design, IndexSet, DEFAULT_RANK_TOL,
};
use crate::kernels::{Covariance, KernelFamily, KernelSpec, LeadScaling};

/// Variances in `[-VARIANCE_CLAMP · scale, 0)` are rounded up to zero.
pub const VARIANCE_CLAMP: f64 = 1e-12;

/// Paired simulator evaluations `{(xᵢ, f(xᵢ))}`, optionally with run costs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    design: Design,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    costs: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(design: Design, values: Vec<f64>) -> Result<Self> {
        if values.len() != design.len() {
            return Err(SpreError::SizeMismatch {
                expected: design.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SpreError::invalid("simulator outputs must be finite"));
        }
        Ok(Dataset {
            design,
            values,
            costs: None,
        })
    }

    pub fn with_costs(mut self, costs: Vec<f64>) -> Result<Self> {
        if costs.len() != self.values.len() {
            return Err(SpreError::SizeMismatch {
                expected: self.values.len(),
                found: costs.len(),
            });
        }
        self.costs = Some(costs);
        Ok(self)
    }

    /// Evaluates `f` on every design point.
    pub fn from_fn(design: Design, mut f: impl FnMut(&[f64]) -> Result<f64>) -> Result<Self> {
        let values = design.points().iter().map(|p| f(p)).collect::<Result<Vec<_>>>()?;
        Self::new(design, values)
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn costs(&self) -> Option<&[f64]> {
        self.costs.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.design.dim()
    }

    /// The dataset with observation `i` removed.
    pub fn without(&self, i: usize) -> Dataset {
        let mut values = self.values.clone();
        values.remove(i);
        let costs = self.costs.as_ref().map(|c| {
            let mut c = c.clone();
            c.remove(i);
            c
        });
        Dataset {
            design: self.design.without(i),
            values,
            costs,
        }
    }

    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            design: self.design.select(rows),
            values: rows.iter().map(|&i| self.values[i]).collect(),
            costs: self.costs.as_ref().map(|c| rows.iter().map(|&i| c[i]).collect()),
        }
    }

    /// Appends observations; costs are dropped unless both sides carry them.
    pub fn extend(&mut self, other: &Dataset) -> Result<()> {
        self.design = self.design.concat(&other.design)?;
        self.values.extend_from_slice(&other.values);
        self.costs = match (self.costs.take(), other.costs.as_ref()) {
            (Some(mut a), Some(b)) => {
                a.extend_from_slice(b);
                Some(a)
            }
            _ => None,
        };
        Ok(())
    }
}

/// Posterior moments of `f(x*)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub mean: f64,
    pub variance: f64,
}

impl Posterior {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Shared linear algebra for a fitted GP with polynomial mean. Only design
/// locations enter here, so the same structure serves variance-only queries.
#[derive(Clone, Debug)]
struct Factorization {
    index_set: IndexSet,
    covariance: Covariance,
    points: Vec<Vec<f64>>,
    /// Design rescaling `ρ`.
    scale: f64,
    chol: Cholesky<f64, Dyn>,
    /// `L⁻¹V`, where `K = LLᵀ` and `V` is built on `X / ρ`.
    whitened_v: DMatrix<f64>,
    /// Upper-triangular `R` with `RᵀR = VᵀK⁻¹V`.
    r: DMatrix<f64>,
    q: DMatrix<f64>,
}

impl Factorization {
    fn new(index_set: &IndexSet, covariance: &Covariance, design: &Design) -> Result<Self> {
        check_dim(index_set.dim(), design.dim())?;
        if !is_unisolvent(index_set, design, DEFAULT_RANK_TOL) {
            return Err(SpreError::NotUnisolvent);
        }
        let max = design.max_coordinate();
        let scale = if max > 0.0 { max } else { 1.0 };
        let points = design.points().to_vec();
        let scaled = design.scaled(1.0 / scale);
        let v = vandermonde_unchecked(index_set, scaled.points());

        let k = covariance.gram(&points);
        if k.iter().any(|x| !x.is_finite()) {
            return Err(SpreError::GramNotPositiveDefinite);
        }
        let chol = Cholesky::new(k).ok_or(SpreError::GramNotPositiveDefinite)?;
        let l_diag = chol.l_dirty().diagonal();
        if l_diag.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(SpreError::GramNotPositiveDefinite);
        }
        let whitened_v = chol
            .l_dirty()
            .solve_lower_triangular(&v)
            .ok_or(SpreError::GramNotPositiveDefinite)?;
        let qr = QR::new(whitened_v.clone());
        let r = qr.r();
        let q = qr.q();
        let rd = r.diagonal().map(f64::abs);
        let (rmin, rmax) = (rd.min(), rd.max());
        if !(rmax > 0.0) || !(rmin / rmax > 1e-14) || !rmin.is_finite() {
            return Err(SpreError::NotUnisolvent);
        }
        Ok(Factorization {
            index_set: index_set.clone(),
            covariance: covariance.clone(),
            points,
            scale,
            chol,
            whitened_v,
            r,
            q,
        })
    }

    fn n(&self) -> usize {
        self.points.len()
    }

    fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol
            .l_dirty()
            .solve_lower_triangular(b)
            .expect("Cholesky factor has a positive diagonal")
    }

    fn scaled_monomials(&self, x: &[f64]) -> DVector<f64> {
        let xs: Vec<f64> = x.iter().map(|c| c / self.scale).collect();
        self.index_set.monomials(&xs).expect("dimension checked")
    }

    fn cross_cov(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.points.iter().map(|p| self.covariance.eval(p, x)))
    }

    /// Returns `(L⁻¹k(x*), r_A(x*))` with `r_A` in the scaled basis.
    fn query_terms(&self, x: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let w = self.solve_lower(&self.cross_cov(x));
        // V_AᵀK⁻¹k = (L⁻¹V)ᵀ(L⁻¹k)
        let r = self.scaled_monomials(x) - self.whitened_v.transpose() * &w;
        (w, r)
    }

    /// `R⁻ᵀ r`, so that `rᵀ(VᵀK⁻¹V)⁻¹r = ‖R⁻ᵀr‖²`.
    fn solve_rt(&self, r: &DVector<f64>) -> DVector<f64> {
        self.r
            .transpose()
            .solve_lower_triangular(r)
            .expect("R has a non-zero diagonal")
    }

    fn variance(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.index_set.dim(), x.len())?;
        let (w, r) = self.query_terms(x);
        let prior = self.covariance.eval(x, x);
        let explained = w.norm_squared();
        let trend = self.solve_rt(&r).norm_squared();
        clamp_variance(prior - explained + trend, prior.abs() + explained + trend)
    }
}

fn clamp_variance(v: f64, scale: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -VARIANCE_CLAMP * scale {
        Ok(0.0)
    } else {
        Err(SpreError::NumericalBreakdown(format!(
            "negative posterior variance {v:e} (scale {scale:e})"
        )))
    }
}

/// A fitted SPRE model.
#[derive(Clone, Debug)]
pub struct Extrapolant {
    fact: Factorization,
    data: Dataset,
    /// `L⁻¹f`.
    whitened_f: DVector<f64>,
    /// `β̂` in the scaled basis.
    beta_scaled: DVector<f64>,
}

impl Extrapolant {
    /// Fits the GP with polynomial mean over `A` and an arbitrary covariance.
    pub fn fit(index_set: &IndexSet, covariance: &Covariance, data: &Dataset) -> Result<Self> {
        if data.len() < index_set.len() {
            return Err(SpreError::NotUnisolvent);
        }
        let fact = Factorization::new(index_set, covariance, data.design())?;
        let f = DVector::from_column_slice(data.values());
        let whitened_f = fact.solve_lower(&f);
        // GLS via the whitened least-squares problem min ‖L⁻¹f − L⁻¹Vβ‖.
        let qtf = fact.q.transpose() * &whitened_f;
        let beta_scaled = fact.r.solve_upper_triangular(&qtf).ok_or(SpreError::NotUnisolvent)?;
        Ok(Extrapolant {
            fact,
            data: data.clone(),
            whitened_f,
            beta_scaled,
        })
    }

    pub fn index_set(&self) -> &IndexSet {
        &self.fact.index_set
    }

    pub fn covariance(&self) -> &Covariance {
        &self.fact.covariance
    }

    /// The base kernel (for GRE models, the white-noise kernel inside the
    /// scaled covariance).
    pub fn kernel(&self) -> &KernelSpec {
        self.fact.covariance.base()
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// `β̂` in the original coordinates, ordered as the index set.
    pub fn beta_hat(&self) -> DVector<f64> {
        let rho = self.fact.scale;
        DVector::from_iterator(
            self.beta_scaled.len(),
            self.fact
                .index_set
                .iter()
                .zip(self.beta_scaled.iter())
                .map(|(alpha, b)| b / rho.powi(alpha.order() as i32)),
        )
    }

    pub fn predict(&self, x_star: &[f64]) -> Result<Posterior> {
        check_dim(self.fact.index_set.dim(), x_star.len())?;
        let (w, r) = self.fact.query_terms(x_star);
        let mean = w.dot(&self.whitened_f) + r.dot(&self.beta_scaled);
        let variance = self.fact.variance(x_star)?;
        Ok(Posterior { mean, variance })
    }

    pub fn predict_at_zero(&self) -> Result<Posterior> {
        self.predict(&vec![0.0; self.fact.index_set.dim()])
    }

    /// Posterior variance at the origin after adding `extra` design points.
    /// The outputs at `extra` do not enter.
    pub fn augmented_variance_at_zero(&self, extra: &Design) -> Result<f64> {
        if extra.is_empty() {
            return self.fact.variance(&vec![0.0; self.fact.index_set.dim()]);
        }
        let design = self.data.design().concat(extra)?;
        posterior_variance(
            &self.fact.index_set,
            &self.fact.covariance,
            &design,
            &vec![0.0; design.dim()],
        )
    }
}

/// Posterior variance at `x_star` for a design, without needing outputs.
pub fn posterior_variance(
    index_set: &IndexSet,
    covariance: &Covariance,
    design: &Design,
    x_star: &[f64],
) -> Result<f64> {
    if design.len() < index_set.len() {
        return Err(SpreError::NotUnisolvent);
    }
    Factorization::new(index_set, covariance, design)?.variance(x_star)
}

/// Fits SPRE with a plain kernel.
pub fn spre_fit(index_set: &IndexSet, kernel: &KernelSpec, data: &Dataset) -> Result<Extrapolant> {
    Extrapolant::fit(index_set, &Covariance::Kernel(kernel.clone()), data)
}

pub fn spre_predict(model: &Extrapolant, x_star: &[f64]) -> Result<Posterior> {
    model.predict(x_star)
}

/// Multivariate Richardson extrapolation: the value at `0` of the unique
/// `P_A` interpolant. Requires `n = dim(A)`.
pub fn mre_extrapolate(index_set: &IndexSet, data: &Dataset) -> Result<f64> {
    let w = lagrange_at_zero(index_set, data.design())?;
    Ok(w.iter().zip(data.values()).map(|(w, f)| w * f).sum())
}

/// The `dim(A)` observations closest to the origin in Euclidean norm; ties keep
/// the earlier observation.
pub fn mre_select_subset(index_set: &IndexSet, data: &Dataset) -> Result<Dataset> {
    let m = index_set.len();
    if data.len() < m {
        return Err(SpreError::InsufficientData {
            needed: m,
            available: data.len(),
        });
    }
    let norms: Vec<f64> = data
        .design()
        .points()
        .iter()
        .map(|p| p.iter().map(|c| c * c).sum::<f64>())
        .collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]));
    let mut rows = order[..m].to_vec();
    rows.sort_unstable();
    Ok(data.select(&rows))
}

/// Gauss–Richardson extrapolation: constant flat-prior mean and covariance
/// `σ² ε(x) ε(x′) δ_{x,x′}`.
pub fn gre_fit_predict(lead: &LeadScaling, sigma2_theta: f64, data: &Dataset, x_star: &[f64]) -> Result<Posterior> {
    gre_fit(lead, sigma2_theta, data)?.predict(x_star)
}

pub fn gre_fit(lead: &LeadScaling, sigma2_theta: f64, data: &Dataset) -> Result<Extrapolant> {
    check_dim(lead.dim(), data.dim())?;
    if let Some(index) = data.design().points().iter().position(|p| lead.eps(p) == 0.0) {
        return Err(SpreError::DegenerateScaling { index });
    }
    let base = KernelSpec::new(KernelFamily::WhiteNoise, vec![sigma2_theta])?;
    let cov = Covariance::scaled(base, lead.clone())?;
    Extrapolant::fit(&IndexSet::constant(data.dim()), &cov, data)
}

/// Assembles `[[K, V], [Vᵀ, 0]]` with `V` built on the rescaled design.
fn saddle_matrix(index_set: &IndexSet, cov: &Covariance, design: &Design) -> (DMatrix<f64>, f64) {
    let n = design.len();
    let m = index_set.len();
    let max = design.max_coordinate();
    let scale = if max > 0.0 { max } else { 1.0 };
    let v = vandermonde_unchecked(index_set, design.scaled(1.0 / scale).points());
    let k = cov.gram(design.points());
    let mut block = DMatrix::zeros(n + m, n + m);
    block.view_mut((0, 0), (n, n)).copy_from(&k);
    block.view_mut((0, n), (n, m)).copy_from(&v);
    block.view_mut((n, 0), (m, n)).copy_from(&v.transpose());
    (block, scale)
}

fn check_saddle_inputs(index_set: &IndexSet, design: &Design) -> Result<()> {
    check_dim(index_set.dim(), design.dim())?;
    if !is_unisolvent(index_set, design, DEFAULT_RANK_TOL) {
        return Err(SpreError::NotUnisolvent);
    }
    Ok(())
}

/// The minimal semi-norm interpolant `s(x*) = v_A(x*)ᵀb + k(x*)ᵀc` from the
/// saddle-point system `[[K, V],[Vᵀ, 0]][c; b] = [f; 0]`, solved by LU.
pub fn spre_mean_via_block_system(
    index_set: &IndexSet,
    kernel: &KernelSpec,
    data: &Dataset,
    x_star: &[f64],
) -> Result<f64> {
    block_system_mean(index_set, &Covariance::Kernel(kernel.clone()), data, x_star)
}

pub fn block_system_mean(index_set: &IndexSet, cov: &Covariance, data: &Dataset, x_star: &[f64]) -> Result<f64> {
    let (coeffs, scale) = block_system_coefficients(index_set, cov, data)?;
    check_dim(index_set.dim(), x_star.len())?;
    let n = data.len();
    let xs: Vec<f64> = x_star.iter().map(|c| c / scale).collect();
    let v = index_set.monomials(&xs)?;
    let k: f64 = data
        .design()
        .points()
        .iter()
        .zip(coeffs.iter())
        .map(|(p, c)| cov.eval(p, x_star) * c)
        .sum();
    Ok(v.dot(&coeffs.rows(n, index_set.len())) + k)
}

/// Solution `[c; b]` of the interpolation saddle-point system, with `b` in the
/// rescaled basis; also returns the rescaling factor `ρ`.
pub fn block_system_coefficients(
    index_set: &IndexSet,
    cov: &Covariance,
    data: &Dataset,
) -> Result<(DVector<f64>, f64)> {
    check_saddle_inputs(index_set, data.design())?;
    let (block, scale) = saddle_matrix(index_set, cov, data.design());
    let mut rhs = DVector::zeros(block.nrows());
    rhs.rows_mut(0, data.len()).copy_from_slice(data.values());
    let sol = block.lu().solve(&rhs).ok_or(SpreError::NotUnisolvent)?;
    if sol.iter().any(|x| !x.is_finite()) {
        return Err(SpreError::NotUnisolvent);
    }
    Ok((sol, scale))
}

/// `P²(0) = k(0,0) − 2 u*ᵀk(0) + u*ᵀK u*`, where `u*` solves the constrained
/// minimisation `[[K, V],[Vᵀ, 0]][u; λ] = [k(0); v_A(0)]`.
pub fn power_function_sq_at_zero(index_set: &IndexSet, kernel: &KernelSpec, design: &Design) -> Result<f64> {
    power_function_sq(
        index_set,
        &Covariance::Kernel(kernel.clone()),
        design,
        &vec![0.0; design.dim()],
    )
}

pub fn power_function_sq(index_set: &IndexSet, cov: &Covariance, design: &Design, x: &[f64]) -> Result<f64> {
    check_saddle_inputs(index_set, design)?;
    check_dim(design.dim(), x.len())?;
    let n = design.len();
    let (block, scale) = saddle_matrix(index_set, cov, design);
    // Validate the kernel part the same way the posterior path does.
    let k = block.view((0, 0), (n, n)).into_owned();
    if Cholesky::new(k.clone()).is_none() {
        return Err(SpreError::GramNotPositiveDefinite);
    }
    let kx = DVector::from_iterator(n, design.points().iter().map(|p| cov.eval(p, x)));
    let xs: Vec<f64> = x.iter().map(|c| c / scale).collect();
    let mut rhs = DVector::zeros(block.nrows());
    rhs.rows_mut(0, n).copy_from(&kx);
    rhs.rows_mut(n, index_set.len()).copy_from(&index_set.monomials(&xs)?);
    let sol = block.lu().solve(&rhs).ok_or(SpreError::NotUnisolvent)?;
    let u = sol.rows(0, n);
    let kxx = cov.eval(x, x);
    let quad = (u.transpose() * &k * u)[(0, 0)];
    let value = kxx - 2.0 * u.dot(&kx) + quad;
    clamp_variance(value, kxx.abs() + 2.0 * u.dot(&kx).abs() + quad.abs())
}

/// `|truth − estimate|`.
pub fn abs_error(estimate: f64, truth: f64) -> f64 {
    (truth - estimate).abs()
}

/// `(truth − mean) / sd`; undefined for a degenerate posterior.
pub fn rel_error(post: &Posterior, truth: f64) -> Result<f64> {
    if !(post.variance > 0.0) {
        return Err(SpreError::ZeroVariance);
    }
    Ok((truth - post.mean) / post.variance.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn d1(points: &[f64], values: &[f64]) -> Dataset {
        Dataset::new(
            Design::new(points.iter().map(|&p| vec![p]).collect()).unwrap(),
            values.to_vec(),
        )
        .unwrap()
    }

    fn white(sigma2: f64) -> KernelSpec {
        KernelSpec::from_params(KernelFamily::WhiteNoise, sigma2, 1.0).unwrap()
    }

    fn linear_1d() -> IndexSet {
        IndexSet::from_tuples(&[&[0], &[1]]).unwrap()
    }

    #[test]
    fn two_point_gls_is_interpolation() {
        let model = spre_fit(&linear_1d(), &white(1.0), &d1(&[1.0, 0.5], &[2.0, 1.0])).unwrap();
        let beta = model.beta_hat();
        assert!(beta[0].abs() < 1e-14);
        assert_relative_eq!(beta[1], 2.0, max_relative = 1e-14);
    }

    #[test]
    fn quadratic_data_two_points_matches_mre() {
        let data = d1(&[1.0, 0.5], &[1.0, 0.25]);
        let post = spre_fit(&linear_1d(), &white(1.0), &data)
            .unwrap()
            .predict(&[0.0])
            .unwrap();
        assert_relative_eq!(post.mean, -0.5, max_relative = 1e-13);
        assert_relative_eq!(
            mre_extrapolate(&linear_1d(), &data).unwrap(),
            -0.5,
            max_relative = 1e-13
        );
    }

    #[test]
    fn too_few_points_is_not_unisolvent() {
        let a = IndexSet::from_tuples(&[&[0], &[1], &[2]]).unwrap();
        let err = spre_fit(&a, &white(1.0), &d1(&[1.0, 0.5], &[1.0, 2.0])).unwrap_err();
        assert_eq!(err, SpreError::NotUnisolvent);
    }

    #[test]
    fn gram_not_pd_is_distinguished() {
        // duplicate points under a stationary kernel give a singular Gram matrix
        let k = KernelSpec::from_params(KernelFamily::Gaussian, 1.0, 1.0).unwrap();
        let data = d1(&[1.0, 1.0, 0.5], &[1.0, 1.0, 2.0]);
        let err = spre_fit(&IndexSet::constant(1), &k, &data).unwrap_err();
        assert_eq!(err, SpreError::GramNotPositiveDefinite);
    }

    #[test]
    fn predicting_a_training_point_interpolates() {
        let data = d1(&[1.0, 0.5, 0.25, 0.125], &[3.0, -1.0, 0.5, 2.0]);
        let model = spre_fit(&linear_1d(), &white(0.7), &data).unwrap();
        for (x, f) in data.design().points().iter().zip(data.values()) {
            let post = model.predict(x).unwrap();
            assert!((post.mean - f).abs() <= 1e-8 * (1.0 + f.abs()));
            assert!(post.variance <= 1e-10 * 0.7);
        }
    }

    #[test]
    fn mre_examples() {
        let a = linear_1d();
        assert_relative_eq!(
            mre_extrapolate(&a, &d1(&[1.0, 0.5], &[5.0, 3.5])).unwrap(),
            2.0,
            max_relative = 1e-14
        );
        let q = IndexSet::from_tuples(&[&[0], &[1], &[2]]).unwrap();
        assert_relative_eq!(
            mre_extrapolate(&q, &d1(&[0.9, 0.4, 0.2], &[7.0, 7.0, 7.0])).unwrap(),
            7.0,
            max_relative = 1e-12
        );
        assert!(mre_extrapolate(&a, &d1(&[0.9, 0.4, 0.2], &[1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn subset_selection() {
        let a = IndexSet::from_tuples(&[&[0, 0], &[1, 0], &[0, 1], &[1, 1]]).unwrap();
        let pts = vec![
            vec![1.0, 1.0],
            vec![0.1, 0.2],
            vec![0.5, 0.5],
            vec![0.2, 0.1],
            vec![0.9, 0.1],
            vec![0.05, 0.05],
            vec![0.3, 0.3],
            vec![0.7, 0.7],
        ];
        let values: Vec<f64> = (0..8).map(f64::from).collect();
        let data = Dataset::new(Design::new(pts).unwrap(), values).unwrap();
        let sub = mre_select_subset(&a, &data).unwrap();
        assert_eq!(sub.values(), &[1.0, 3.0, 5.0, 6.0]);

        // tie at the cut keeps the earlier index
        let tie = d1(&[0.5, 0.1, 0.5], &[0.0, 1.0, 2.0]);
        let sub = mre_select_subset(&linear_1d(), &tie).unwrap();
        assert_eq!(sub.values(), &[0.0, 1.0]);

        let exact = d1(&[0.5, 0.1], &[0.0, 1.0]);
        assert_eq!(mre_select_subset(&linear_1d(), &exact).unwrap(), exact);
        assert!(matches!(
            mre_select_subset(&linear_1d(), &d1(&[0.5], &[1.0])),
            Err(SpreError::InsufficientData { .. })
        ));
    }

    #[test]
    fn gre_examples() {
        let lead = LeadScaling::new(vec![crate::MultiIndex::new(vec![2])]).unwrap();
        let post = gre_fit_predict(&lead, 0.3, &d1(&[1.0, 0.5, 0.25], &[4.0, 4.0, 4.0]), &[0.0]).unwrap();
        assert_relative_eq!(post.mean, 4.0, max_relative = 1e-13);

        // single observation: mean is the observation, variance is the GLS
        // variance of the constant, σ² ε(x₁)²
        let sigma2 = crate::kernels::softplus(0.3);
        let post = gre_fit_predict(&lead, 0.3, &d1(&[0.5], &[2.5]), &[0.0]).unwrap();
        assert_relative_eq!(post.mean, 2.5, max_relative = 1e-14);
        assert_relative_eq!(post.variance, sigma2 * 0.0625, max_relative = 1e-12);

        let err = gre_fit_predict(&lead, 0.3, &d1(&[0.5, 0.0], &[2.5, 1.0]), &[0.0]).unwrap_err();
        assert_eq!(err, SpreError::DegenerateScaling { index: 1 });
    }

    #[test]
    fn power_function_white_noise_closed_form() {
        let a = IndexSet::from_tuples(&[&[0], &[1], &[2]]).unwrap();
        let x = Design::new(vec![vec![1.0], vec![0.5], vec![0.25]]).unwrap();
        let w = lagrange_at_zero(&a, &x).unwrap();
        let expected = 2.0 * (1.0 + w.norm_squared());
        let p2 = power_function_sq_at_zero(&a, &white(2.0), &x).unwrap();
        assert_relative_eq!(p2, expected, max_relative = 1e-10);
        let p4 = power_function_sq_at_zero(&a, &white(6.0), &x).unwrap();
        assert_relative_eq!(p4, 3.0 * p2, max_relative = 1e-10);
    }

    #[test]
    fn rel_and_abs_error() {
        assert_eq!(abs_error(1.5, 1.5), 0.0);
        let post = Posterior {
            mean: 0.9,
            variance: 0.01,
        };
        assert_relative_eq!(rel_error(&post, 1.0).unwrap(), 1.0, max_relative = 1e-12);
        assert_eq!(
            rel_error(
                &Posterior {
                    mean: 1.0,
                    variance: 0.2
                },
                1.0
            )
            .unwrap(),
            0.0
        );
        assert_eq!(
            rel_error(
                &Posterior {
                    mean: 1.0,
                    variance: 0.0
                },
                1.0
            ),
            Err(SpreError::ZeroVariance)
        );
    }

    #[test]
    fn clamping() {
        assert_eq!(clamp_variance(-1e-13, 1.0).unwrap(), 0.0);
        assert!(clamp_variance(-1e-6, 1.0).is_err());
    }
}
