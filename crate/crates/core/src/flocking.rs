//! A deterministic 60-agent flocking simulator on the torus `[0,10)²`.
//!
//! The tolerance parameters are the time step `x₁`, the repulsion softening
//! `x₂` and the cutoff width `x₃`. Initial positions are uniform draws from
//! `ChaCha8Rng::seed_from_u64(seed)` in agent order (first coordinate, then
//! second), and initial velocities are zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpreError};

pub const DOMAIN: f64 = 10.0;

/// Which short-range force to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepulsionMode {
    /// `max(0, −(R_r − r)/(r + x₂))` along `d̂`, sign for sign. This vanishes
    /// inside the repulsion radius and adds to attraction outside it.
    #[default]
    AsPrinted,
    /// `max(0, (R_r − r)/(r + x₂))` along `−d̂`: pushes agents apart inside the
    /// repulsion radius and vanishes outside it.
    Repulsive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlockParams {
    pub n_agents: usize,
    pub repulsion_radius: f64,
    pub interaction_radius: f64,
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub seed: u64,
    pub t_final: f64,
    pub tracked_agent: usize,
    pub repulsion: RepulsionMode,
}

impl FlockParams {
    pub fn new(x1: f64, x2: f64, x3: f64) -> Self {
        FlockParams {
            n_agents: 60,
            repulsion_radius: 0.5,
            interaction_radius: 2.0,
            x1,
            x2,
            x3,
            seed: 0,
            t_final: 5.0,
            tracked_agent: 0,
            repulsion: RepulsionMode::AsPrinted,
        }
    }

    pub fn with_tolerances(&self, x: &[f64]) -> Result<Self> {
        if x.len() != 3 {
            return Err(SpreError::DimensionMismatch {
                expected: 3,
                found: x.len(),
            });
        }
        let mut p = self.clone();
        p.x1 = x[0];
        p.x2 = x[1];
        p.x3 = x[2];
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x1 > 0.0 && self.x1.is_finite()) {
            return Err(SpreError::invalid(format!("time step {} must be positive", self.x1)));
        }
        if !(self.x2 >= 0.0 && self.x2.is_finite()) || !(self.x3 >= 0.0 && self.x3.is_finite()) {
            return Err(SpreError::invalid("softening and cutoff width must be non-negative"));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(SpreError::invalid("final time must be positive"));
        }
        if self.tracked_agent >= self.n_agents {
            return Err(SpreError::invalid(format!(
                "tracked agent {} out of range for {} agents",
                self.tracked_agent, self.n_agents
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlockState {
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
    pub t: f64,
}

impl FlockState {
    pub fn initial(params: &FlockParams) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let positions = (0..params.n_agents)
            .map(|_| {
                let a = rng.random::<f64>() * DOMAIN;
                let b = rng.random::<f64>() * DOMAIN;
                [wrap(a), wrap(b)]
            })
            .collect();
        FlockState {
            positions,
            velocities: vec![[0.0; 2]; params.n_agents],
            t: 0.0,
        }
    }
}

pub fn wrap(u: f64) -> f64 {
    let w = u.rem_euclid(DOMAIN);
    if w >= DOMAIN {
        0.0
    } else {
        w
    }
}

/// Minimum-image displacement `u_j − u_i`.
pub fn displacement(ui: [f64; 2], uj: [f64; 2]) -> [f64; 2] {
    let c = |a: f64, b: f64| {
        let d = b - a;
        d - DOMAIN * (d / DOMAIN).round()
    };
    [c(ui[0], uj[0]), c(ui[1], uj[1])]
}

/// Force on agent `i` from agent `j`, before the cutoff weight.
pub fn pair_force(params: &FlockParams, ui: [f64; 2], uj: [f64; 2]) -> Result<[f64; 2]> {
    let d = displacement(ui, uj);
    let r = d[0].hypot(d[1]);
    if r == 0.0 {
        return Err(SpreError::CoincidentAgents { i: 0, j: 0 });
    }
    Ok(scale(pair_magnitude(params, r), [d[0] / r, d[1] / r]))
}

/// Signed magnitude of the pair force along `d̂`.
pub fn pair_magnitude(params: &FlockParams, r: f64) -> f64 {
    let rr = params.repulsion_radius;
    let att = (r - rr).max(0.0);
    match params.repulsion {
        RepulsionMode::AsPrinted => (-(rr - r) / (r + params.x2)).max(0.0) + att,
        RepulsionMode::Repulsive => att - ((rr - r) / (r + params.x2)).max(0.0),
    }
}

fn scale(a: f64, v: [f64; 2]) -> [f64; 2] {
    [a * v[0], a * v[1]]
}

pub fn cutoff(params: &FlockParams, r: f64) -> f64 {
    let big_r = params.interaction_radius;
    if params.x3 == 0.0 {
        if r < big_r {
            1.0
        } else {
            0.0
        }
    } else {
        0.5 * (1.0 - ((r - big_r) / params.x3).tanh())
    }
}

/// `F_i = Σ_{j≠i} w(r_ij) f_ij`, summed in ascending `j`.
pub fn net_forces(params: &FlockParams, positions: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
    let n = positions.len();
    let mut forces = vec![[0.0; 2]; n];
    for i in 0..n {
        let mut acc = [0.0; 2];
        for j in 0..n {
            if j == i {
                continue;
            }
            let d = displacement(positions[i], positions[j]);
            let r = d[0].hypot(d[1]);
            if r == 0.0 {
                return Err(SpreError::CoincidentAgents { i, j });
            }
            let w = cutoff(params, r);
            if w == 0.0 {
                continue;
            }
            let m = w * pair_magnitude(params, r) / r;
            acc[0] += m * d[0];
            acc[1] += m * d[1];
        }
        forces[i] = acc;
    }
    Ok(forces)
}

/// One semi-implicit Euler step: velocities first, then positions with the
/// new velocities, then wrapping.
pub fn step(params: &FlockParams, state: &FlockState) -> Result<FlockState> {
    let forces = net_forces(params, &state.positions)?;
    let h = params.x1;
    let velocities: Vec<[f64; 2]> = state
        .velocities
        .iter()
        .zip(&forces)
        .map(|(v, f)| [v[0] + h * f[0], v[1] + h * f[1]])
        .collect();
    let positions = state
        .positions
        .iter()
        .zip(&velocities)
        .map(|(u, v)| [wrap(u[0] + h * v[0]), wrap(u[1] + h * v[1])])
        .collect();
    Ok(FlockState {
        positions,
        velocities,
        t: state.t + h,
    })
}

/// Number of steps `n` with `(n−1)x₁ < t_final ≤ n x₁`, and the fraction of
/// the last step needed to land on `t_final`.
fn step_plan(x1: f64, t_final: f64) -> (usize, f64) {
    let mut n = (t_final / x1).ceil().max(1.0) as usize;
    while n > 1 && (n - 1) as f64 * x1 >= t_final {
        n -= 1;
    }
    while (n as f64) * x1 < t_final {
        n += 1;
    }
    let theta = 1.0 - (n as f64 * x1 - t_final) / x1;
    (n, theta.clamp(0.0, 1.0))
}

fn interpolate(prev: &FlockState, next: &FlockState, theta: f64, h: f64) -> Vec<[f64; 2]> {
    if theta == 1.0 {
        return next.positions.clone();
    }
    // Along the unwrapped path u_prev + θ x₁ v_next, so a boundary crossing in
    // the last step is handled correctly.
    prev.positions
        .iter()
        .zip(&next.velocities)
        .map(|(u, v)| [wrap(u[0] + theta * h * v[0]), wrap(u[1] + theta * h * v[1])])
        .collect()
}

/// Every agent's position at each step time, ending with the interpolated
/// positions at `t_final`.
pub fn trajectory(params: &FlockParams) -> Result<Vec<(f64, Vec<[f64; 2]>)>> {
    params.validate()?;
    let (n, theta) = step_plan(params.x1, params.t_final);
    let mut state = FlockState::initial(params);
    let mut out = vec![(0.0, state.positions.clone())];
    for k in 1..=n {
        let next = step(params, &state)?;
        if k == n {
            out.push((params.t_final, interpolate(&state, &next, theta, params.x1)));
        } else {
            out.push((k as f64 * params.x1, next.positions.clone()));
        }
        state = next;
    }
    Ok(out)
}

/// Tracked agent's position at `t_final`.
pub fn final_position(params: &FlockParams) -> Result<[f64; 2]> {
    params.validate()?;
    let (n, theta) = step_plan(params.x1, params.t_final);
    let mut state = FlockState::initial(params);
    for _ in 1..n {
        state = step(params, &state)?;
    }
    let last = step(params, &state)?;
    Ok(interpolate(&state, &last, theta, params.x1)[params.tracked_agent])
}

/// Distance of the tracked agent's wrapped position from the origin at
/// `t_final`.
pub fn simulate_qoi(params: &FlockParams) -> Result<f64> {
    let u = final_position(params)?;
    Ok(u[0].hypot(u[1]))
}
