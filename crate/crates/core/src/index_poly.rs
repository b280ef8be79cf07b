//! Multi-indices, sparse polynomial spaces and the Vandermonde machinery that
//! goes with them.
//!
//! An [`IndexSet`] `A` spans the polynomial space `P_A = span{x^α : α ∈ A}`.
//! The zero index is always present and always comes first, so the constant
//! monomial is column 0 of every Vandermonde matrix and `v_A(0) = e₁`.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpreError};

/// Relative singular-value threshold used by [`is_unisolvent`] when callers
/// have no better idea.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// A multi-index `α ∈ ℕ₀^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// `power · e_axis`.
    pub fn axis(dim: usize, axis: usize, power: u32) -> Self {
        let mut e = vec![0; dim];
        e[axis] = power;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    /// Total order `|α|`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// Graded order: by total degree, then exponents compared position by
    /// position with larger leading exponents first, so `(1,0)` precedes
    /// `(0,1)`.
    pub fn graded_cmp(&self, other: &Self) -> Ordering {
        self.order().cmp(&other.order()).then_with(|| other.0.cmp(&self.0))
    }

    /// All multi-indices of dimension `dim` and total order exactly `order`,
    /// in graded order.
    pub fn all_of_order(dim: usize, order: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut current = vec![0u32; dim];
        fill_compositions(&mut current, 0, order, &mut out);
        out.sort_by(|a, b| a.graded_cmp(b));
        out
    }
}

fn fill_compositions(current: &mut Vec<u32>, pos: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if current.is_empty() {
        if remaining == 0 {
            out.push(MultiIndex(Vec::new()));
        }
        return;
    }
    if pos == current.len() - 1 {
        current[pos] = remaining;
        out.push(MultiIndex(current.clone()));
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k;
        fill_compositions(current, pos + 1, remaining - k, out);
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// The index set `A` defining the polynomial mean space.
///
/// Serialises as a plain list of exponent tuples, e.g. `[[0,0],[1,0],[0,1]]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<MultiIndex>", into = "Vec<MultiIndex>")]
pub struct IndexSet {
    dim: usize,
    indices: Vec<MultiIndex>,
}

impl IndexSet {
    /// Builds an index set, sorting it into graded order (zero index first).
    pub fn new(indices: Vec<MultiIndex>) -> Result<Self> {
        let Some(first) = indices.first() else {
            return Err(SpreError::invalid("index set must not be empty"));
        };
        let dim = first.dim();
        if dim == 0 {
            return Err(SpreError::invalid("index set dimension must be positive"));
        }
        if let Some(bad) = indices.iter().find(|a| a.dim() != dim) {
            return Err(SpreError::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        let mut indices = indices;
        indices.sort_by(|a, b| a.graded_cmp(b));
        if !indices[0].is_zero() {
            return Err(SpreError::invalid("index set must contain the zero index"));
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(SpreError::invalid("index set contains duplicate indices"));
        }
        Ok(IndexSet { dim, indices })
    }

    pub fn from_tuples(tuples: &[&[u32]]) -> Result<Self> {
        Self::new(tuples.iter().map(|t| MultiIndex(t.to_vec())).collect())
    }

    /// `{0}`.
    pub fn constant(dim: usize) -> Self {
        IndexSet {
            dim,
            indices: vec![MultiIndex::zero(dim)],
        }
    }

    /// `{α : |α| ≤ degree}`.
    pub fn total_degree(dim: usize, degree: u32) -> Self {
        let indices = (0..=degree).flat_map(|k| MultiIndex::all_of_order(dim, k)).collect();
        IndexSet { dim, indices }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `dim(A)`, the number of monomials.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> {
        self.indices.iter()
    }

    pub fn contains(&self, alpha: &MultiIndex) -> bool {
        self.indices.contains(alpha)
    }

    /// `A ∪ extra`.
    pub fn union<'a>(&self, extra: impl IntoIterator<Item = &'a MultiIndex>) -> Result<Self> {
        let mut indices = self.indices.clone();
        for alpha in extra {
            if alpha.dim() != self.dim {
                return Err(SpreError::DimensionMismatch {
                    expected: self.dim,
                    found: alpha.dim(),
                });
            }
            if !indices.contains(alpha) {
                indices.push(alpha.clone());
            }
        }
        Self::new(indices)
    }

    /// The leading-order indices `Lead(A)`: the non-zero indices of minimal
    /// total order. Empty for `A = {0}`.
    pub fn lead(&self) -> Vec<MultiIndex> {
        let min_order = self
            .indices
            .iter()
            .filter(|a| !a.is_zero())
            .map(MultiIndex::order)
            .min();
        match min_order {
            Some(m) => self
                .indices
                .iter()
                .filter(|a| !a.is_zero() && a.order() == m)
                .cloned()
                .collect(),
            None => Vec::new(),
        }
    }

    /// `v_A(x) = [x^α]_{α ∈ A}`.
    pub fn monomials(&self, x: &[f64]) -> Result<DVector<f64>> {
        check_dim(self.dim, x.len())?;
        Ok(DVector::from_iterator(
            self.len(),
            self.indices.iter().map(|a| monomial_unchecked(x, a)),
        ))
    }
}

impl TryFrom<Vec<MultiIndex>> for IndexSet {
    type Error = SpreError;

    fn try_from(value: Vec<MultiIndex>) -> Result<Self> {
        IndexSet::new(value)
    }
}

impl From<IndexSet> for Vec<MultiIndex> {
    fn from(value: IndexSet) -> Self {
        value.indices
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, a) in self.indices.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "}}")
    }
}

/// An ordered list of tolerance configurations `X_n ⊂ [0,∞)^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DesignRepr", into = "DesignRepr")]
pub struct Design {
    dim: usize,
    points: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct DesignRepr {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl TryFrom<DesignRepr> for Design {
    type Error = SpreError;

    fn try_from(value: DesignRepr) -> Result<Self> {
        Design::with_points(value.dim, value.points)
    }
}

impl From<Design> for DesignRepr {
    fn from(value: Design) -> Self {
        DesignRepr {
            dim: value.dim,
            points: value.points,
        }
    }
}

impl Design {
    pub fn empty(dim: usize) -> Self {
        Design {
            dim,
            points: Vec::new(),
        }
    }

    /// Builds a design from a non-empty list of points.
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| SpreError::invalid("design must contain at least one point"))?;
        Self::with_points(dim, points)
    }

    pub fn with_points(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(SpreError::invalid("design dimension must be positive"));
        }
        let mut design = Design::empty(dim);
        for p in points {
            design.push(p)?;
        }
        Ok(design)
    }

    pub fn push(&mut self, point: Vec<f64>) -> Result<()> {
        check_dim(self.dim, point.len())?;
        if point.iter().any(|&c| !c.is_finite() || c < 0.0) {
            return Err(SpreError::invalid(format!(
                "design coordinates must be finite and non-negative, got {point:?}"
            )));
        }
        self.points.push(point);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    /// `hX = {h x : x ∈ X}`.
    pub fn scaled(&self, h: f64) -> Design {
        Design {
            dim: self.dim,
            points: self.points.iter().map(|p| p.iter().map(|c| c * h).collect()).collect(),
        }
    }

    /// `X \ {x_i}`.
    pub fn without(&self, i: usize) -> Design {
        let mut points = self.points.clone();
        points.remove(i);
        Design { dim: self.dim, points }
    }

    /// Concatenation, keeping the order of `self` then `other`.
    pub fn concat(&self, other: &Design) -> Result<Design> {
        check_dim(self.dim, other.dim)?;
        let mut points = self.points.clone();
        points.extend(other.points.iter().cloned());
        Ok(Design { dim: self.dim, points })
    }

    /// Largest coordinate over the whole design, `0` for an empty design.
    pub fn max_coordinate(&self) -> f64 {
        self.points.iter().flatten().fold(0.0_f64, |acc, &c| acc.max(c))
    }

    pub fn select(&self, rows: &[usize]) -> Design {
        Design {
            dim: self.dim,
            points: rows.iter().map(|&i| self.points[i].clone()).collect(),
        }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(SpreError::DimensionMismatch { expected, found })
    }
}

fn monomial_unchecked(x: &[f64], alpha: &MultiIndex) -> f64 {
    x.iter()
        .zip(alpha.exponents())
        .map(|(&xj, &aj)| xj.powi(aj as i32))
        .product()
}

/// `x^α = ∏ x_j^{α_j}` with `0⁰ = 1`.
pub fn monomial_eval(x: &[f64], alpha: &MultiIndex) -> Result<f64> {
    check_dim(alpha.dim(), x.len())?;
    Ok(monomial_unchecked(x, alpha))
}

/// `V_A(X)` with rows indexed by design points and columns by `A`.
pub fn vandermonde(a: &IndexSet, x: &Design) -> Result<DMatrix<f64>> {
    check_dim(a.dim(), x.dim())?;
    Ok(vandermonde_unchecked(a, x.points()))
}

pub(crate) fn vandermonde_unchecked(a: &IndexSet, points: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(points.len(), a.len(), |i, j| {
        monomial_unchecked(&points[i], &a.indices()[j])
    })
}

/// Divides every column by its largest absolute entry. Returns `None` when a
/// column is identically zero or the matrix holds non-finite values.
fn column_scaled(mut v: DMatrix<f64>) -> Option<DMatrix<f64>> {
    for mut col in v.column_iter_mut() {
        let scale = col.amax();
        if !(scale.is_finite() && scale > 0.0) {
            return None;
        }
        col /= scale;
    }
    Some(v)
}

/// Whether `V_A(X)` has full column rank.
///
/// Columns are first scaled to unit max-norm so the answer does not depend on
/// the overall scale of the design; rank is then judged by
/// `σ_min / σ_max > rel_tol`.
pub fn is_unisolvent(a: &IndexSet, x: &Design, rel_tol: f64) -> bool {
    if a.dim() != x.dim() || x.len() < a.len() {
        return false;
    }
    let Some(v) = column_scaled(vandermonde_unchecked(a, x.points())) else {
        return false;
    };
    let sv = v.singular_values();
    let max = sv.max();
    let min = sv.min();
    max > 0.0 && min / max > rel_tol
}

/// Lagrange weights at the origin: `w` with `Σ wᵢ p(xᵢ) = p(0)` for all
/// `p ∈ P_A`. Requires `n = dim(A)` and a unisolvent design.
pub fn lagrange_at_zero(a: &IndexSet, x: &Design) -> Result<DVector<f64>> {
    check_dim(a.dim(), x.dim())?;
    if x.len() != a.len() {
        return Err(SpreError::SizeMismatch {
            expected: a.len(),
            found: x.len(),
        });
    }
    if !is_unisolvent(a, x, DEFAULT_RANK_TOL) {
        return Err(SpreError::NotUnisolvent);
    }
    // Vᵀw = e₁. Scaling column j of V by s_j leaves e₁ unchanged because the
    // zero-index column is all ones.
    let scaled = column_scaled(vandermonde_unchecked(a, x.points())).ok_or(SpreError::NotUnisolvent)?;
    let mut rhs = DVector::zeros(a.len());
    rhs[0] = 1.0;
    scaled.transpose().lu().solve(&rhs).ok_or(SpreError::NotUnisolvent)
}

/// The Lebesgue function at the origin, `λ_A(0; X) = Σ |ℓᵢ(0)|`.
pub fn lebesgue_at_zero(a: &IndexSet, x: &Design) -> Result<f64> {
    Ok(lagrange_at_zero(a, x)?.iter().map(|w| w.abs()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn d1(points: &[f64]) -> Design {
        Design::new(points.iter().map(|&p| vec![p]).collect()).unwrap()
    }

    #[test]
    fn monomial_examples() {
        let m = |x: &[f64], a: &[u32]| monomial_eval(x, &MultiIndex::new(a.to_vec())).unwrap();
        assert_eq!(m(&[2.0, 3.0], &[1, 2]), 18.0);
        assert_eq!(m(&[0.5, 0.5], &[0, 0]), 1.0);
        assert_eq!(m(&[0.0, 1.0], &[0, 3]), 1.0);
        assert!(monomial_eval(&[1.0], &MultiIndex::new(vec![1, 1])).is_err());
    }

    #[test]
    fn vandermonde_examples() {
        let a = IndexSet::from_tuples(&[&[0], &[1]]).unwrap();
        let v = vandermonde(&a, &d1(&[1.0, 0.5])).unwrap();
        assert_eq!(v, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.5]));

        let x = Design::new(vec![vec![1.0, 1.0], vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let v = vandermonde(&IndexSet::constant(2), &x).unwrap();
        assert_eq!(v, DMatrix::from_element(3, 1, 1.0));

        let a = IndexSet::from_tuples(&[&[0, 0], &[1, 0], &[0, 1]]).unwrap();
        let v = vandermonde(&a, &x).unwrap();
        assert_eq!(
            v,
            DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 1.0, 0.5, 1.0])
        );
    }

    #[test]
    fn index_set_canonical_order() {
        let a = IndexSet::from_tuples(&[&[2, 0], &[0, 1], &[0, 0], &[1, 0]]).unwrap();
        let expected: Vec<Vec<u32>> = vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0]];
        let got: Vec<Vec<u32>> = a.iter().map(|m| m.exponents().to_vec()).collect();
        assert_eq!(got, expected);
        assert!(IndexSet::from_tuples(&[&[1, 0]]).is_err());
        assert!(IndexSet::from_tuples(&[&[0, 0], &[1, 0], &[1, 0]]).is_err());
        assert!(IndexSet::from_tuples(&[&[0, 0], &[1]]).is_err());
    }

    #[test]
    fn index_set_json_is_a_list_of_tuples() {
        let a = IndexSet::from_tuples(&[&[0, 0], &[1, 0], &[0, 1]]).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), "[[0,0],[1,0],[0,1]]");
        let back: IndexSet = serde_json::from_str("[[0,1],[0,0],[1,0]]").unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<IndexSet>("[[1,0]]").is_err());
    }

    #[test]
    fn order_enumeration_counts() {
        // C(i+d-1, d-1)
        assert_eq!(MultiIndex::all_of_order(2, 2).len(), 3);
        assert_eq!(MultiIndex::all_of_order(3, 2).len(), 6);
        assert_eq!(MultiIndex::all_of_order(3, 3).len(), 10);
        let got: Vec<_> = MultiIndex::all_of_order(2, 2)
            .into_iter()
            .map(|m| m.exponents().to_vec())
            .collect();
        assert_eq!(got, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(IndexSet::total_degree(3, 1).len(), 4);
    }

    #[test]
    fn lead_terms() {
        let a = IndexSet::from_tuples(&[&[0, 0], &[2, 0], &[0, 2], &[2, 2]]).unwrap();
        let lead: Vec<_> = a.lead().into_iter().map(|m| m.exponents().to_vec()).collect();
        assert_eq!(lead, vec![vec![2, 0], vec![0, 2]]);
        assert!(IndexSet::constant(2).lead().is_empty());
    }

    #[test]
    fn unisolvency_examples() {
        let a = IndexSet::from_tuples(&[&[0], &[1]]).unwrap();
        assert!(is_unisolvent(&a, &d1(&[1.0, 0.5]), DEFAULT_RANK_TOL));
        assert!(!is_unisolvent(&a, &d1(&[1.0, 1.0]), DEFAULT_RANK_TOL));
        assert!(!is_unisolvent(&a, &d1(&[1.0]), DEFAULT_RANK_TOL));
        // column of zeros: x^1 on the origin only
        assert!(!is_unisolvent(&a, &d1(&[0.0, 0.0]), DEFAULT_RANK_TOL));
    }

    #[test]
    fn unisolvency_is_scale_free() {
        let a = IndexSet::from_tuples(&[&[0], &[1], &[2], &[3]]).unwrap();
        let x = d1(&[0.5, 0.25, 1.0 / 6.0, 0.125]);
        for m in [0, 10, 30, 43] {
            let h = 0.5f64.powi(m);
            assert!(is_unisolvent(&a, &x.scaled(h), DEFAULT_RANK_TOL), "h = 2^-{m}");
        }
    }

    #[test]
    fn lagrange_examples() {
        let a = IndexSet::from_tuples(&[&[0], &[1]]).unwrap();
        let w = lagrange_at_zero(&a, &d1(&[1.0, 0.5])).unwrap();
        assert_relative_eq!(w[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(w[1], 2.0, epsilon = 1e-14);
        assert_relative_eq!(lebesgue_at_zero(&a, &d1(&[1.0, 0.5])).unwrap(), 3.0, epsilon = 1e-14);

        let w = lagrange_at_zero(&IndexSet::constant(1), &d1(&[0.3])).unwrap();
        assert_eq!(w.as_slice(), &[1.0]);
        assert_eq!(lebesgue_at_zero(&IndexSet::constant(1), &d1(&[0.3])).unwrap(), 1.0);
    }

    #[test]
    fn lagrange_errors() {
        let a = IndexSet::from_tuples(&[&[0], &[1]]).unwrap();
        assert_eq!(
            lagrange_at_zero(&a, &d1(&[1.0, 0.5, 0.25])),
            Err(SpreError::SizeMismatch { expected: 2, found: 3 })
        );
        assert_eq!(lagrange_at_zero(&a, &d1(&[1.0, 1.0])), Err(SpreError::NotUnisolvent));
    }
}
