//! Particle swarm maximization over a box-constrained slot vector.
//!
//! Velocity update per particle and slot:
//! `v ← γ₁·y₁·(g_best − x) + γ₂·y₂·(p_best − x) + γ₃·v`, with fresh uniform
//! `y₁, y₂ ∈ [0, 1]` every iteration, followed by `x ← x + v`. Velocities are
//! capped at a fraction of each slot's range and positions are clamped to the
//! box after every move.

use log::{debug, warn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwarmConfig {
    pub n_particles: usize,
    pub n_iters: usize,
    /// Pull toward the global best.
    pub gamma1: f64,
    /// Pull toward the particle's own best.
    pub gamma2: f64,
    /// Inertia.
    pub gamma3: f64,
    /// `|v_j| ≤ velocity_cap · (hi_j − lo_j)`.
    pub velocity_cap: f64,
    pub rng_seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        SwarmConfig {
            n_particles: 20,
            n_iters: 50,
            gamma1: 2.0,
            gamma2: 2.0,
            gamma3: 1.1,
            velocity_cap: 0.2,
            rng_seed: 0,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::config("pso_particles", "must be at least 1"));
        }
        for (key, g) in [("pso_gamma1", self.gamma1), ("pso_gamma2", self.gamma2), ("pso_gamma3", self.gamma3)] {
            if !(g >= 0.0) {
                return Err(Error::config(key, "must be nonnegative"));
            }
        }
        if !(self.velocity_cap > 0.0) {
            return Err(Error::config("pso_velocity_cap_fraction", "must be positive"));
        }
        Ok(())
    }
}

/// Per-slot box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SlotBounds {
    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.len() && x.iter().zip(&self.lo).zip(&self.hi).all(|((v, l), h)| v >= l && v <= h)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for ((v, l), h) in x.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(*l, *h);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| if h > l { rng.random_range(*l..=*h) } else { *l })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub particles: Vec<Particle>,
    pub global_best_position: Vec<f64>,
    pub global_best_objective: f64,
    pub iteration: usize,
}

impl SwarmState {
    fn refresh_global_best(&mut self) {
        for p in &self.particles {
            if p.best_objective > self.global_best_objective {
                self.global_best_objective = p.best_objective;
                self.global_best_position = p.best_position.clone();
            }
        }
    }
}

fn evaluate_or_log<F>(objective: &F, x: &[f64]) -> Option<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    match objective(x) {
        Ok(v) if v.is_finite() => Some(v),
        Ok(v) => {
            warn!("objective returned non-finite value {v}; re-randomizing particle");
            None
        }
        Err(e @ Error::DegeneratePowerAllocation { .. }) => {
            debug!("infeasible candidate ({e}); re-randomizing particle");
            None
        }
        Err(e) => {
            warn!("objective evaluation failed ({e}); re-randomizing particle");
            None
        }
    }
}

/// Random particles in the box (one of them at `warm_start` when given), zero
/// velocities, bests evaluated once.
pub fn init_swarm<F, R>(config: &SwarmConfig, bounds: &SlotBounds, warm_start: Option<&[f64]>, objective: &F, rng: &mut R) -> SwarmState
where
    F: Fn(&[f64]) -> Result<f64>,
    R: Rng + ?Sized,
{
    let mut particles = Vec::with_capacity(config.n_particles);
    for i in 0..config.n_particles {
        let mut position = match (i, warm_start) {
            (0, Some(w)) => w.to_vec(),
            _ => bounds.sample(rng),
        };
        bounds.clamp(&mut position);
        let best_objective = evaluate_or_log(objective, &position).unwrap_or(f64::NEG_INFINITY);
        particles.push(Particle {
            velocity: vec![0.0; position.len()],
            best_position: position.clone(),
            position,
            best_objective,
        });
    }
    let mut state = SwarmState {
        global_best_position: particles[0].best_position.clone(),
        global_best_objective: f64::NEG_INFINITY,
        particles,
        iteration: 0,
    };
    state.refresh_global_best();
    state
}

/// New velocity for given random weights `y1`, `y2` (one per slot).
#[allow(clippy::too_many_arguments)]
pub fn velocity_update(
    position: &[f64],
    velocity: &[f64],
    personal_best: &[f64],
    global_best: &[f64],
    y1: &[f64],
    y2: &[f64],
    config: &SwarmConfig,
    bounds: &SlotBounds,
) -> Vec<f64> {
    (0..position.len())
        .map(|j| {
            let v = config.gamma1 * y1[j] * (global_best[j] - position[j])
                + config.gamma2 * y2[j] * (personal_best[j] - position[j])
                + config.gamma3 * velocity[j];
            let cap = config.velocity_cap * (bounds.hi[j] - bounds.lo[j]);
            v.clamp(-cap, cap)
        })
        .collect()
}

/// One synchronous swarm iteration.
pub fn step<F, R>(state: &SwarmState, objective: &F, config: &SwarmConfig, bounds: &SlotBounds, rng: &mut R) -> SwarmState
where
    F: Fn(&[f64]) -> Result<f64>,
    R: Rng + ?Sized,
{
    let mut next = state.clone();
    let n = bounds.len();
    for p in &mut next.particles {
        let y1: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y2: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        p.velocity = velocity_update(&p.position, &p.velocity, &p.best_position, &state.global_best_position, &y1, &y2, config, bounds);
        for (x, v) in p.position.iter_mut().zip(&p.velocity) {
            *x += v;
        }
        bounds.clamp(&mut p.position);
        match evaluate_or_log(objective, &p.position) {
            Some(v) if v > p.best_objective => {
                p.best_objective = v;
                p.best_position = p.position.clone();
            }
            Some(_) => {}
            None => {
                p.position = bounds.sample(rng);
                p.velocity = vec![0.0; n];
            }
        }
    }
    next.iteration += 1;
    next.refresh_global_best();
    next
}

/// Outcome of a full swarm run.
#[derive(Debug, Clone)]
pub struct SwarmRun {
    pub best_position: Vec<f64>,
    pub best_objective: f64,
    /// Global best after initialization and after every iteration.
    pub history: Vec<f64>,
    pub final_state: SwarmState,
}

/// `init_swarm` followed by `n_iters` steps. `on_iter` sees every state.
pub fn run_swarm<F, R>(
    config: &SwarmConfig,
    bounds: &SlotBounds,
    warm_start: Option<&[f64]>,
    objective: &F,
    rng: &mut R,
    mut on_iter: impl FnMut(&SwarmState),
) -> SwarmRun
where
    F: Fn(&[f64]) -> Result<f64>,
    R: Rng + ?Sized,
{
    let mut state = init_swarm(config, bounds, warm_start, objective, rng);
    on_iter(&state);
    let mut history = vec![state.global_best_objective];
    for _ in 0..config.n_iters {
        state = step(&state, objective, config, bounds, rng);
        on_iter(&state);
        history.push(state.global_best_objective);
    }
    SwarmRun {
        best_position: state.global_best_position.clone(),
        best_objective: state.global_best_objective,
        history,
        final_state: state,
    }
}
