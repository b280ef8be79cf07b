//! Leave-one-out model selection.
//!
//! The criterion is the negative leave-one-out log predictive density
//!
//! ```text
//! L(k, A) = −Σᵢ log N(fᵢ; μᵢ, σᵢ²)
//! ```
//!
//! where `(μᵢ, σᵢ²)` are the posterior moments at `xᵢ` after refitting on the
//! data with observation `i` removed. Kernel parameters are tuned by a short
//! trust-region run on `θ ↦ L(k_θ, A)` and the index set is grown one
//! polynomial order at a time.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpreError};
use crate::extrapolate::{Dataset, Extrapolant};
use crate::index_poly::{IndexSet, MultiIndex};
use crate::kernels::{Covariance, KernelFamily, KernelSpec, LeadScaling};
use crate::trust_region::{self, TrustRegionConfig};

/// Which extrapolation model an index set parameterises.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Polynomial mean over `A` with a plain kernel.
    Spre,
    /// Constant mean with covariance scaled by `ε` from `Lead(A)`; white-noise
    /// kernels only. For `A = {0}` the scaling is dropped.
    Gre,
}

/// Mean space and covariance for a model of the given kind.
pub fn model_components(kind: ModelKind, index_set: &IndexSet, kernel: &KernelSpec) -> Result<(IndexSet, Covariance)> {
    match kind {
        ModelKind::Spre => Ok((index_set.clone(), Covariance::Kernel(kernel.clone()))),
        ModelKind::Gre => {
            if kernel.family() != KernelFamily::WhiteNoise {
                return Err(SpreError::invalid("GRE supports only the white-noise kernel"));
            }
            let mean = IndexSet::constant(index_set.dim());
            let cov = match LeadScaling::from_index_set(index_set) {
                Some(lead) => Covariance::scaled(kernel.clone(), lead)?,
                None => Covariance::Kernel(kernel.clone()),
            };
            Ok((mean, cov))
        }
    }
}

/// Fits a model of the given kind.
pub fn fit_model(kind: ModelKind, index_set: &IndexSet, kernel: &KernelSpec, data: &Dataset) -> Result<Extrapolant> {
    let (mean, cov) = model_components(kind, index_set, kernel)?;
    Extrapolant::fit(&mean, &cov, data)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LooPoint {
    pub mean: f64,
    pub variance: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoocvResult {
    /// `L(k, A)`.
    pub neg_log_density: f64,
    pub per_point: Vec<LooPoint>,
}

/// `−log N(value; mean, variance)`.
pub fn gaussian_nll(value: f64, mean: f64, variance: f64) -> f64 {
    let r = value - mean;
    0.5 * (2.0 * PI * variance).ln() + 0.5 * r * r / variance
}

/// The leave-one-out criterion for SPRE with kernel `kernel` and index set `A`.
pub fn loocv(index_set: &IndexSet, kernel: &KernelSpec, data: &Dataset) -> Result<LoocvResult> {
    loocv_with(index_set, &Covariance::Kernel(kernel.clone()), data)
}

/// The leave-one-out criterion for an arbitrary mean space and covariance.
pub fn loocv_with(mean_set: &IndexSet, cov: &Covariance, data: &Dataset) -> Result<LoocvResult> {
    let n = data.len();
    if n < mean_set.len() + 1 {
        return Err(SpreError::FoldNotUnisolvent(0));
    }
    let mut per_point = Vec::with_capacity(n);
    let mut total = 0.0;
    for i in 0..n {
        let fold = data.without(i);
        let model = match Extrapolant::fit(mean_set, cov, &fold) {
            Ok(m) => m,
            Err(SpreError::NotUnisolvent) => return Err(SpreError::FoldNotUnisolvent(i)),
            Err(e) => return Err(e),
        };
        let post = model.predict(data.design().point(i))?;
        let value = data.values()[i];
        if !(post.variance > 0.0) {
            return Err(SpreError::NumericalBreakdown(format!(
                "leave-one-out variance {:e} at fold {i}",
                post.variance
            )));
        }
        total += gaussian_nll(value, post.mean, post.variance);
        per_point.push(LooPoint {
            mean: post.mean,
            variance: post.variance,
            value,
        });
    }
    if !total.is_finite() {
        return Err(SpreError::NumericalBreakdown(
            "non-finite leave-one-out criterion".into(),
        ));
    }
    Ok(LoocvResult {
        neg_log_density: total,
        per_point,
    })
}

/// Leave-one-out criterion of a model kind at a given kernel.
pub fn model_loocv(kind: ModelKind, index_set: &IndexSet, kernel: &KernelSpec, data: &Dataset) -> Result<LoocvResult> {
    let (mean, cov) = model_components(kind, index_set, kernel)?;
    loocv_with(&mean, &cov, data)
}

/// Tunes `θ` for SPRE by ten trust-region iterations from `θ = 1`, returning
/// the best kernel and `L(A)`, the smallest criterion value visited.
pub fn optimize_kernel(index_set: &IndexSet, family: KernelFamily, data: &Dataset) -> Result<(KernelSpec, f64)> {
    optimize_model(ModelKind::Spre, index_set, family, data)
}

pub fn optimize_model(
    kind: ModelKind,
    index_set: &IndexSet,
    family: KernelFamily,
    data: &Dataset,
) -> Result<(KernelSpec, f64)> {
    let start = KernelSpec::initial(family);
    let (mean, _) = model_components(kind, index_set, &start)?;
    if data.len() < mean.len() + 1 {
        return Err(SpreError::FoldNotUnisolvent(0));
    }
    // Surface the real error if the starting point is infeasible.
    model_loocv(kind, index_set, &start, data)?;
    let objective = |theta: &[f64]| -> f64 {
        KernelSpec::new(family, theta.to_vec())
            .and_then(|k| model_loocv(kind, index_set, &k, data))
            .map(|r| r.neg_log_density)
            .unwrap_or(f64::INFINITY)
    };
    let best = trust_region::minimize(objective, start.theta(), TrustRegionConfig::default())
        .ok_or_else(|| SpreError::NumericalBreakdown("infeasible initial kernel parameters".into()))?;
    Ok((KernelSpec::new(family, best.x)?, best.value))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateRole {
    /// The current set `A_{i−1}`.
    Base,
    /// `A_{i−1} ∪ {α}` for one monomial of order `i`.
    Single,
    /// `A_{i−1}` plus every qualifying monomial of order `i`.
    Merged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: u32,
    pub role: CandidateRole,
    pub index_set: IndexSet,
    pub loocv: f64,
    pub theta: Vec<f64>,
    /// Whether this set became the current set.
    pub accepted: bool,
}

/// Outcome of the stepwise index-set search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub model: ModelKind,
    pub family: KernelFamily,
    pub chosen: IndexSet,
    pub theta: Vec<f64>,
    /// `L(chosen)`; absent when no fold could be evaluated (e.g. one data point).
    pub loocv: Option<f64>,
    pub history: Vec<HistoryEntry>,
}

impl SelectionTrace {
    pub fn kernel(&self) -> KernelSpec {
        KernelSpec::new(self.family, self.theta.clone()).expect("theta length matches family")
    }

    /// `L` along the accepted chain `A₀ ⊂ A₁ ⊂ …`.
    pub fn accepted_chain(&self) -> Vec<(IndexSet, f64)> {
        self.history
            .iter()
            .filter(|h| h.accepted)
            .map(|h| (h.index_set.clone(), h.loocv))
            .collect()
    }
}

struct Scored {
    set: IndexSet,
    kernel: KernelSpec,
    loocv: f64,
}

fn score(kind: ModelKind, set: IndexSet, family: KernelFamily, data: &Dataset) -> Option<Scored> {
    optimize_model(kind, &set, family, data)
        .ok()
        .filter(|(_, l)| l.is_finite())
        .map(|(kernel, loocv)| Scored { set, kernel, loocv })
}

/// Greedy order-by-order index-set search for SPRE.
pub fn stepwise_select(data: &Dataset, family: KernelFamily) -> Result<SelectionTrace> {
    stepwise_select_with(ModelKind::Spre, data, family)
}

/// Stepwise search: starting from `A₀ = {0}`, each monomial of order `i` is
/// tried on its own against `A_{i−1}`; all that strictly lower `L` are added
/// together, and the enlarged set is kept only if it also lowers `L`.
/// Candidates whose fit or criterion fails do not qualify.
pub fn stepwise_select_with(kind: ModelKind, data: &Dataset, family: KernelFamily) -> Result<SelectionTrace> {
    let dim = data.dim();
    let base = IndexSet::constant(dim);
    let mut history = Vec::new();

    let Some(mut current) = score(kind, base.clone(), family, data) else {
        return Ok(SelectionTrace {
            model: kind,
            family,
            chosen: base,
            theta: KernelSpec::initial(family).theta().to_vec(),
            loocv: None,
            history,
        });
    };
    history.push(HistoryEntry {
        iteration: 0,
        role: CandidateRole::Base,
        index_set: current.set.clone(),
        loocv: current.loocv,
        theta: current.kernel.theta().to_vec(),
        accepted: true,
    });

    let mut order = 1u32;
    loop {
        let candidates: Vec<MultiIndex> = MultiIndex::all_of_order(dim, order)
            .into_iter()
            .filter(|a| !current.set.contains(a))
            .collect();
        let scored: Vec<(MultiIndex, Option<Scored>)> = candidates
            .par_iter()
            .map(|alpha| {
                let set = current.set.union([alpha]).expect("dimensions agree");
                (alpha.clone(), score(kind, set, family, data))
            })
            .collect();

        let mut qualifying = Vec::new();
        let mut single_entries = Vec::new();
        for (alpha, s) in &scored {
            if let Some(s) = s {
                if s.loocv < current.loocv {
                    qualifying.push(alpha.clone());
                }
                single_entries.push(HistoryEntry {
                    iteration: order,
                    role: CandidateRole::Single,
                    index_set: s.set.clone(),
                    loocv: s.loocv,
                    theta: s.kernel.theta().to_vec(),
                    accepted: false,
                });
            }
        }
        if qualifying.is_empty() {
            history.extend(single_entries);
            break;
        }

        let merged = if qualifying.len() == 1 {
            let alpha = &qualifying[0];
            let pos = scored.iter().position(|(a, _)| a == alpha).expect("present");
            let s = scored[pos].1.as_ref().expect("qualifying candidates are scored");
            // Mark the lone qualifier as the accepted step instead of duplicating it.
            Some(Scored {
                set: s.set.clone(),
                kernel: s.kernel.clone(),
                loocv: s.loocv,
            })
        } else {
            let set = current.set.union(qualifying.iter()).expect("dimensions agree");
            score(kind, set, family, data)
        };

        let improves = merged.as_ref().is_some_and(|m| m.loocv < current.loocv);
        if qualifying.len() == 1 {
            for e in &mut single_entries {
                if improves && e.index_set == merged.as_ref().expect("scored").set {
                    e.accepted = true;
                }
            }
            history.extend(single_entries);
        } else {
            history.extend(single_entries);
            if let Some(m) = &merged {
                history.push(HistoryEntry {
                    iteration: order,
                    role: CandidateRole::Merged,
                    index_set: m.set.clone(),
                    loocv: m.loocv,
                    theta: m.kernel.theta().to_vec(),
                    accepted: improves,
                });
            }
        }
        if !improves {
            break;
        }
        current = merged.expect("improving candidate exists");
        order += 1;
    }

    Ok(SelectionTrace {
        model: kind,
        family,
        chosen: current.set,
        theta: current.kernel.theta().to_vec(),
        loocv: Some(current.loocv),
        history,
    })
}
