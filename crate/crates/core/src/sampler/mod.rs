//! Overdamped Langevin dynamics `dR = -∇E dt + sqrt(2/β) dW` by
//! Euler-Maruyama, over any [`EnergyField`].

mod fields;
mod toy;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::chem::{min_pair_distance, ConformationSet, Positions};
use crate::error::{Error, Result};
use crate::train::ReplayBuffer;

pub use crate::energy::{grad_positions, EnergyField};
pub use fields::{ModelField, OracleField, MODEL_FD_STEP};
pub use toy::ToyEnergy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LangevinConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub inverse_temperature: f64,
    pub buffer_init_prob: f64,
    /// Hartree/Bohr; larger gradients are rescaled to this norm.
    pub max_force_norm: f64,
    /// Bohr; steps that bring two atoms closer are rejected.
    pub min_interatomic_distance: f64,
    pub seed: u64,
}

impl Default for LangevinConfig {
    fn default() -> Self {
        LangevinConfig {
            dt: 1e-4,
            n_steps: 30,
            inverse_temperature: 1.0,
            buffer_init_prob: 0.5,
            max_force_norm: 10.0,
            min_interatomic_distance: 0.7,
            seed: 0,
        }
    }
}

impl LangevinConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("langevin.dt", self.dt),
            ("langevin.inverse_temperature", self.inverse_temperature),
            ("langevin.max_force_norm", self.max_force_norm),
            ("langevin.min_interatomic_distance", self.min_interatomic_distance),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be positive, got {v}")));
            }
        }
        if self.n_steps == 0 {
            return Err(Error::config("langevin.n_steps", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.buffer_init_prob) {
            return Err(Error::config("langevin.buffer_init_prob", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Independent noise stream for chain `index` under a master seed.
pub fn chain_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index + 1);
    rng
}

/// Rescale `g` to Frobenius norm `max_norm` if it is longer.
pub fn clip_gradient(g: &mut Positions, max_norm: f64) {
    let norm = g.norm();
    if norm > max_norm {
        *g *= max_norm / norm;
    }
}

/// `R - clip(∇E) dt + sqrt(2 dt / β) ξ`, with ξ drawn row-major.
pub fn langevin_step<F: EnergyField + ?Sized, R: Rng + ?Sized>(
    r: &Positions,
    field: &F,
    cfg: &LangevinConfig,
    rng: &mut R,
) -> Result<Positions> {
    let mut g = field.gradient(r)?;
    clip_gradient(&mut g, cfg.max_force_norm);
    let sigma = (2.0 * cfg.dt / cfg.inverse_temperature).sqrt();
    let mut next = r - g * cfg.dt;
    for i in 0..next.nrows() {
        for k in 0..next.ncols() {
            let xi: f64 = rng.sample(StandardNormal);
            next[(i, k)] += sigma * xi;
        }
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub final_positions: Positions,
    /// Accepted positions after every step, including repeats after a
    /// rejection; present when requested.
    pub trajectory: Option<Vec<Positions>>,
    pub rejected_steps: usize,
}

fn acceptable<F: EnergyField + ?Sized>(field: &F, r: &Positions, cfg: &LangevinConfig) -> bool {
    if !r.iter().all(|v| v.is_finite()) {
        return false;
    }
    !field.is_molecular() || min_pair_distance(r).is_none_or(|d| d >= cfg.min_interatomic_distance)
}

/// `cfg.n_steps` Langevin steps from `r0`. Steps that violate the distance
/// guard (or leave finite space) are rejected: the position is kept and the
/// next step draws fresh noise.
pub fn run_chain<F: EnergyField + ?Sized, R: Rng + ?Sized>(
    field: &F,
    r0: &Positions,
    cfg: &LangevinConfig,
    rng: &mut R,
    record: bool,
) -> Result<ChainResult> {
    cfg.validate()?;
    let mut r = r0.clone();
    let mut trajectory = record.then(|| Vec::with_capacity(cfg.n_steps));
    let mut rejected = 0;
    for _ in 0..cfg.n_steps {
        let next = langevin_step(&r, field, cfg, rng)?;
        if acceptable(field, &next, cfg) {
            r = next;
        } else {
            rejected += 1;
        }
        if let Some(t) = trajectory.as_mut() {
            t.push(r.clone());
        }
    }
    if 2 * rejected > cfg.n_steps {
        return Err(Error::UnstableChain { rejected, steps: cfg.n_steps, dt: cfg.dt });
    }
    Ok(ChainResult { final_positions: r, trajectory, rejected_steps: rejected })
}

/// Chain start: with probability `p` a uniform buffer entry (the dataset if
/// the buffer is empty), otherwise a uniform dataset frame.
pub fn init_state<R: Rng + ?Sized>(
    buffer: &ReplayBuffer,
    dataset: &ConformationSet,
    p: f64,
    rng: &mut R,
) -> Result<Positions> {
    let u: f64 = rng.random();
    if u < p && !buffer.is_empty() {
        return Ok(buffer.get(rng.random_range(0..buffer.len())).clone());
    }
    if dataset.is_empty() {
        if buffer.is_empty() {
            return Err(Error::EmptySource("both the replay buffer and the dataset are empty"));
        }
        return Ok(buffer.get(rng.random_range(0..buffer.len())).clone());
    }
    Ok(dataset.frames[rng.random_range(0..dataset.len())].clone())
}
