//! Built-in benchmark problems and the reference designs used with them.

mod cubature;
mod ed_synthetic;
mod reference;

pub use cubature::{cubature_eval, cubature_truth, CubatureProblem, PiecewisePoly};
pub use ed_synthetic::{ed_synthetic_eval, EdSynthetic, ED_NOISE_AMPLITUDE};
pub use reference::{reference_design, ReferenceDesign};

use crate::error::{Result, SpreError};
use crate::index_poly::Design;

/// A base design together with the scalings `h` applied to it.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledDesignFamily {
    base: Design,
    scalings: Vec<f64>,
}

impl ScaledDesignFamily {
    pub fn new(base: Design, scalings: Vec<f64>) -> Result<Self> {
        if let Some(h) = scalings.iter().find(|h| !(**h > 0.0 && **h <= 1.0)) {
            return Err(SpreError::invalid(format!("scaling {h} is outside (0, 1]")));
        }
        Ok(ScaledDesignFamily { base, scalings })
    }

    /// `h = (1/2)^m` for each exponent `m`.
    pub fn halving(base: Design, exponents: &[u32]) -> Self {
        let scalings = exponents.iter().map(|&m| 0.5f64.powi(m as i32)).collect();
        ScaledDesignFamily { base, scalings }
    }

    pub fn base(&self) -> &Design {
        &self.base
    }

    pub fn scalings(&self) -> &[f64] {
        &self.scalings
    }

    /// `(h, hX)` pairs in order.
    pub fn designs(&self) -> impl Iterator<Item = (f64, Design)> + '_ {
        self.scalings.iter().map(|&h| (h, self.base.scaled(h)))
    }
}
