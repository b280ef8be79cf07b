//! Sparse probabilistic Richardson extrapolation (SPRE).
//!
//! A simulator `f(x)` with tolerance parameters `x ∈ [0,∞)^d` is modelled as a
//! Gaussian process with a sparse polynomial mean (spanned by the monomials of
//! an index set `A`) and a parametric kernel. The posterior at `x = 0` gives a
//! convergence-accelerated estimate of the zero-tolerance limit together with an
//! error bar. Multivariate Richardson extrapolation (MRE) and Gauss–Richardson
//! extrapolation (GRE) are provided as baselines, along with leave-one-out
//! model selection, budget-constrained experimental design, and a few
//! benchmark simulators.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod error;
pub mod experiment;
pub mod extrapolate;
pub mod flocking;
pub mod index_poly;
pub mod io;
pub mod kernels;
pub mod model_select;
pub mod problems;

mod trust_region;

pub use error::{Result, SpreError};
pub use extrapolate::{Dataset, Extrapolant, Posterior};
pub use index_poly::{Design, IndexSet, MultiIndex};
pub use kernels::{Covariance, KernelFamily, KernelSpec, LeadScaling};
