//! Budget-constrained choice of the next simulations to run.
//!
//! Candidate batches are built by drawing points uniformly on `[0,1]^d` and
//! stopping one draw before the batch cost would exceed the budget. The batch
//! that minimises the posterior variance at the origin wins. Because that
//! variance depends only on locations, no simulator call is needed to score a
//! batch.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)`. Candidate `0` is
//! drawn first, then candidate `1`, and so on; each point consumes `d`
//! consecutive `f64` draws from `StandardUniform`, coordinate by coordinate,
//! with points containing a zero coordinate discarded and redrawn. Rounds of
//! the sequential loop use ChaCha stream `r` of the same seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpreError};
use crate::extrapolate::{Dataset, Extrapolant};
use crate::index_poly::{Design, IndexSet};
use crate::kernels::{Covariance, KernelFamily, KernelSpec};
use crate::model_select::{stepwise_select, SelectionTrace};

pub const DEFAULT_CANDIDATES: usize = 1000;

/// Cost of one simulator run at a tolerance setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CostModel {
    /// `c(x) = ∏ 1/xⱼ`.
    ReciprocalProduct,
    /// Exact lookup; candidates are drawn uniformly from the listed points.
    Table { entries: Vec<(Vec<f64>, f64)> },
}

impl CostModel {
    pub fn table(entries: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(SpreError::invalid("cost table is empty"));
        }
        if let Some((_, c)) = entries.iter().find(|(_, c)| !(*c > 0.0 && c.is_finite())) {
            return Err(SpreError::invalid(format!("cost {c} is not positive")));
        }
        Ok(CostModel::Table { entries })
    }
}

pub fn cost(model: &CostModel, x: &[f64]) -> Result<f64> {
    match model {
        CostModel::ReciprocalProduct => {
            if x.iter().any(|&v| v <= 0.0) {
                return Err(SpreError::ZeroCoordinate);
            }
            Ok(x.iter().map(|v| 1.0 / v).product())
        }
        CostModel::Table { entries } => entries
            .iter()
            .find(|(p, _)| p.as_slice() == x)
            .map(|(_, c)| *c)
            .ok_or_else(|| SpreError::MissingCost(x.to_vec())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignProposal {
    pub points: Design,
    pub predicted_variance: f64,
    pub total_cost: f64,
}

struct Batch {
    points: Vec<Vec<f64>>,
    total_cost: f64,
}

fn draw_point(rng: &mut ChaCha8Rng, cost_model: &CostModel, dim: usize) -> Vec<f64> {
    match cost_model {
        CostModel::Table { entries } => entries[rng.random_range(0..entries.len())].0.clone(),
        CostModel::ReciprocalProduct => loop {
            let p: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
            if p.iter().all(|&v| v > 0.0) {
                return p;
            }
        },
    }
}

fn draw_batch(rng: &mut ChaCha8Rng, cost_model: &CostModel, dim: usize, budget: f64) -> Result<Batch> {
    let mut points = Vec::new();
    let mut total_cost = 0.0;
    loop {
        let p = draw_point(rng, cost_model, dim);
        let c = cost(cost_model, &p)?;
        if total_cost + c > budget {
            return Ok(Batch { points, total_cost });
        }
        total_cost += c;
        points.push(p);
    }
}

fn propose_with_rng(
    model: &Extrapolant,
    cost_model: &CostModel,
    budget: f64,
    n_candidates: usize,
    rng: &mut ChaCha8Rng,
) -> Result<DesignProposal> {
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(SpreError::invalid(format!("budget {budget} must be positive")));
    }
    let dim = model.index_set().dim();
    let batches = (0..n_candidates)
        .map(|_| draw_batch(rng, cost_model, dim, budget))
        .collect::<Result<Vec<_>>>()?;
    if batches.iter().all(|b| b.points.is_empty()) {
        return Err(SpreError::EmptyProposal);
    }
    let current = model.augmented_variance_at_zero(&Design::empty(dim))?;
    let scores: Vec<f64> = batches.par_iter().map(|b| batch_score(model, b, current)).collect();
    let best = scores
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.total_cmp(b).then(i.cmp(j)))
        .map(|(i, _)| i)
        .expect("at least one candidate");
    let batch = &batches[best];
    if batch.points.is_empty() || !scores[best].is_finite() {
        return Err(SpreError::EmptyProposal);
    }
    Ok(DesignProposal {
        points: Design::with_points(dim, batch.points.clone())?,
        predicted_variance: scores[best],
        total_cost: batch.total_cost,
    })
}

fn batch_score(model: &Extrapolant, batch: &Batch, current: f64) -> f64 {
    if batch.points.is_empty() {
        return current;
    }
    Design::with_points(model.index_set().dim(), batch.points.clone())
        .and_then(|d| model.augmented_variance_at_zero(&d))
        .unwrap_or(f64::INFINITY)
}

/// Posterior variance at the origin after adding each candidate batch, in
/// the order the batches are drawn. Exposed so the argmin can be audited.
pub fn candidate_scores(
    model: &Extrapolant,
    cost_model: &CostModel,
    budget: f64,
    n_candidates: usize,
    rng_seed: u64,
) -> Result<Vec<(Design, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let dim = model.index_set().dim();
    let current = model.augmented_variance_at_zero(&Design::empty(dim))?;
    (0..n_candidates)
        .map(|_| {
            let b = draw_batch(&mut rng, cost_model, dim, budget)?;
            let s = batch_score(model, &b, current);
            Ok((Design::with_points(dim, b.points)?, s))
        })
        .collect()
}

/// Picks the candidate batch that minimises the posterior variance at 0.
/// Ties go to the earliest candidate.
pub fn propose_design(
    model: &Extrapolant,
    cost_model: &CostModel,
    budget: f64,
    n_candidates: usize,
    rng_seed: u64,
) -> Result<DesignProposal> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    propose_with_rng(model, cost_model, budget, n_candidates, &mut rng)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub index_set: IndexSet,
    pub theta: Vec<f64>,
    pub loocv: Option<f64>,
    pub proposal: DesignProposal,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LoopOutcome {
    pub trace: SelectionTrace,
    pub data: Dataset,
    pub rounds: Vec<RoundRecord>,
}

#[derive(Clone, Copy, Debug)]
pub struct LoopConfig {
    pub family: KernelFamily,
    pub budget_per_round: f64,
    pub rounds: usize,
    pub n_candidates: usize,
    pub rng_seed: u64,
}

/// Alternates stepwise learning of `(A, θ)` with budgeted design, then
/// re-learns on the final data.
pub fn sequential_loop(
    initial: &Dataset,
    cost_model: &CostModel,
    config: &LoopConfig,
    simulator: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
) -> Result<LoopOutcome> {
    if initial.is_empty() {
        return Err(SpreError::InsufficientData {
            needed: 1,
            available: 0,
        });
    }
    let mut data = initial.clone();
    let mut rounds = Vec::with_capacity(config.rounds);
    for round in 0..config.rounds as u64 {
        let trace = stepwise_select(&data, config.family)?;
        let kernel = KernelSpec::new(config.family, trace.theta.clone())?;
        let model = Extrapolant::fit(&trace.chosen, &Covariance::from(kernel), &data)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        rng.set_stream(round);
        let proposal = propose_with_rng(
            &model,
            cost_model,
            config.budget_per_round,
            config.n_candidates,
            &mut rng,
        )?;
        let new = Dataset::from_fn(proposal.points.clone(), simulator)?;
        let new = match data.costs() {
            Some(_) => {
                let costs = proposal
                    .points
                    .points()
                    .iter()
                    .map(|p| cost(cost_model, p))
                    .collect::<Result<Vec<_>>>()?;
                new.with_costs(costs)?
            }
            None => new,
        };
        data.extend(&new)?;
        rounds.push(RoundRecord {
            round,
            index_set: trace.chosen,
            theta: trace.theta,
            loocv: trace.loocv,
            values: new.values().to_vec(),
            proposal,
        });
    }
    let trace = stepwise_select(&data, config.family)?;
    Ok(LoopOutcome { trace, data, rounds })
}
