//! Parametric covariance kernels with softplus-mapped parameters.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpreError};
use crate::index_poly::{check_dim, Design, IndexSet, MultiIndex};

/// `log(1 + exp(z))`, evaluated without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

/// Inverse of [`softplus`] for `y > 0`.
pub fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    WhiteNoise,
    Matern12,
    Matern32,
    Gaussian,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 4] = [
        KernelFamily::WhiteNoise,
        KernelFamily::Matern12,
        KernelFamily::Matern32,
        KernelFamily::Gaussian,
    ];

    /// Number of unconstrained parameters.
    pub fn n_params(self) -> usize {
        match self {
            KernelFamily::WhiteNoise => 1,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::WhiteNoise => "white-noise",
            KernelFamily::Matern12 => "matern12",
            KernelFamily::Matern32 => "matern32",
            KernelFamily::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = SpreError;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "whitenoise" | "white" | "wn" => Ok(KernelFamily::WhiteNoise),
            "matern12" => Ok(KernelFamily::Matern12),
            "matern32" => Ok(KernelFamily::Matern32),
            "gaussian" | "rbf" | "sqexp" => Ok(KernelFamily::Gaussian),
            _ => Err(SpreError::invalid(format!("unknown kernel family `{s}`"))),
        }
    }
}

/// A kernel family together with its unconstrained parameter vector `θ`.
///
/// `σ² = softplus(θ₁)` and, for the stationary families, `ℓ = softplus(θ₂)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpecRepr", into = "KernelSpecRepr")]
pub struct KernelSpec {
    family: KernelFamily,
    theta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct KernelSpecRepr {
    family: KernelFamily,
    theta: Vec<f64>,
}

impl TryFrom<KernelSpecRepr> for KernelSpec {
    type Error = SpreError;

    fn try_from(r: KernelSpecRepr) -> Result<Self> {
        KernelSpec::new(r.family, r.theta)
    }
}

impl From<KernelSpec> for KernelSpecRepr {
    fn from(k: KernelSpec) -> Self {
        KernelSpecRepr {
            family: k.family,
            theta: k.theta,
        }
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != family.n_params() {
            return Err(SpreError::invalid(format!(
                "{family} kernel takes {} parameters, got {}",
                family.n_params(),
                theta.len()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(SpreError::invalid("kernel parameters must be finite"));
        }
        Ok(KernelSpec { family, theta })
    }

    /// The optimiser's starting point, `θ = 1` (or `(1, 1)`).
    pub fn initial(family: KernelFamily) -> Self {
        KernelSpec {
            family,
            theta: vec![1.0; family.n_params()],
        }
    }

    /// Builds a spec from constrained parameters; `length_scale` is ignored for
    /// white noise.
    pub fn from_params(family: KernelFamily, sigma2: f64, length_scale: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || (family != KernelFamily::WhiteNoise && !(length_scale > 0.0)) {
            return Err(SpreError::invalid("kernel parameters must be positive"));
        }
        let mut theta = vec![softplus_inv(sigma2)];
        if family != KernelFamily::WhiteNoise {
            theta.push(softplus_inv(length_scale));
        }
        Self::new(family, theta)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn sigma2(&self) -> f64 {
        softplus(self.theta[0])
    }

    pub fn length_scale(&self) -> Option<f64> {
        self.theta.get(1).map(|&t| softplus(t))
    }

    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        Self::new(self.family, theta)
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(x.len(), y.len())?;
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let sigma2 = self.sigma2();
        match self.family {
            KernelFamily::WhiteNoise => {
                if x == y {
                    sigma2
                } else {
                    0.0
                }
            }
            KernelFamily::Matern12 => {
                let l = softplus(self.theta[1]);
                sigma2 * (-euclidean(x, y) / l).exp()
            }
            KernelFamily::Matern32 => {
                let l = softplus(self.theta[1]);
                let a = 3f64.sqrt() * euclidean(x, y) / l;
                sigma2 * (1.0 + a) * (-a).exp()
            }
            KernelFamily::Gaussian => {
                let l = softplus(self.theta[1]);
                let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                sigma2 * (-r2 / (l * l)).exp()
            }
        }
    }
}

fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// `k(x, y)` for a kernel spec.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.eval(x, y)
}

/// The Gram matrix `[k(xᵢ, xⱼ)]`.
pub fn gram(spec: &KernelSpec, x: &Design) -> DMatrix<f64> {
    symmetric_gram(x.points(), |a, b| spec.eval_unchecked(a, b))
}

fn symmetric_gram(points: &[Vec<f64>], k: impl Fn(&[f64], &[f64]) -> f64) -> DMatrix<f64> {
    let n = points.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = k(&points[i], &points[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// The leading-order monomials `Lead(A)` defining `ε(x) = Σ_{α ∈ Lead} x^α`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MultiIndex>", into = "Vec<MultiIndex>")]
pub struct LeadScaling {
    lead: Vec<MultiIndex>,
}

impl LeadScaling {
    pub fn new(lead: Vec<MultiIndex>) -> Result<Self> {
        let Some(first) = lead.first() else {
            return Err(SpreError::invalid("lead scaling needs at least one index"));
        };
        let dim = first.dim();
        if let Some(bad) = lead.iter().find(|a| a.dim() != dim) {
            return Err(SpreError::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        if lead.iter().any(MultiIndex::is_zero) {
            return Err(SpreError::invalid("lead scaling must exclude the zero index"));
        }
        Ok(LeadScaling { lead })
    }

    /// `Lead(A)`, or `None` when `A = {0}`.
    pub fn from_index_set(a: &IndexSet) -> Option<Self> {
        let lead = a.lead();
        (!lead.is_empty()).then_some(LeadScaling { lead })
    }

    pub fn dim(&self) -> usize {
        self.lead[0].dim()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.lead
    }

    /// `ε(x)`.
    pub fn eps(&self, x: &[f64]) -> f64 {
        self.lead
            .iter()
            .map(|a| {
                x.iter()
                    .zip(a.exponents())
                    .map(|(&xj, &aj)| xj.powi(aj as i32))
                    .product::<f64>()
            })
            .sum()
    }
}

impl TryFrom<Vec<MultiIndex>> for LeadScaling {
    type Error = SpreError;

    fn try_from(value: Vec<MultiIndex>) -> Result<Self> {
        LeadScaling::new(value)
    }
}

impl From<LeadScaling> for Vec<MultiIndex> {
    fn from(value: LeadScaling) -> Self {
        value.lead
    }
}

/// `ε(x) ε(y) k(x, y)` with a white-noise base kernel.
pub fn gre_covariance(base: &KernelSpec, eps: &LeadScaling, x: &[f64], y: &[f64]) -> Result<f64> {
    if base.family() != KernelFamily::WhiteNoise {
        return Err(SpreError::invalid(
            "GRE covariance supports only a white-noise base kernel",
        ));
    }
    check_dim(eps.dim(), x.len())?;
    check_dim(eps.dim(), y.len())?;
    Ok(eps.eps(x) * eps.eps(y) * base.eval_unchecked(x, y))
}

/// The covariance function used by the GP engine.
#[derive(Clone, Debug, PartialEq)]
pub enum Covariance {
    Kernel(KernelSpec),
    /// `ε(x) ε(y) k(x, y)`; the base is always white noise.
    Scaled {
        base: KernelSpec,
        lead: LeadScaling,
    },
}

impl Covariance {
    pub fn scaled(base: KernelSpec, lead: LeadScaling) -> Result<Self> {
        if base.family() != KernelFamily::WhiteNoise {
            return Err(SpreError::invalid(
                "GRE covariance supports only a white-noise base kernel",
            ));
        }
        Ok(Covariance::Scaled { base, lead })
    }

    pub fn base(&self) -> &KernelSpec {
        match self {
            Covariance::Kernel(k) => k,
            Covariance::Scaled { base, .. } => base,
        }
    }

    pub(crate) fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Covariance::Kernel(k) => k.eval_unchecked(x, y),
            Covariance::Scaled { base, lead } => lead.eps(x) * lead.eps(y) * base.eval_unchecked(x, y),
        }
    }

    pub(crate) fn gram(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        symmetric_gram(points, |a, b| self.eval(a, b))
    }
}

impl From<KernelSpec> for Covariance {
    fn from(k: KernelSpec) -> Self {
        Covariance::Kernel(k)
    }
}
