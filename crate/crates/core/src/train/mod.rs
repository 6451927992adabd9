//! Pretraining on a fixed dataset and the self-refining loop that trains on
//! conformations sampled from the model's own energy.

mod buffer;
mod dataset;
mod events;
mod refine;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::OptimizerConfig;
use crate::sampler::LangevinConfig;

pub use buffer::{ReplayBuffer, DEFAULT_BUFFER_CAPACITY};
pub use dataset::{make_dataset, DatasetGenerator};
pub use events::{check_liveness, check_no_torn_reads, Event, EventLog};
pub use refine::{pretrain, self_refine, BestCheckpoint, TrainOptions, TrainOutcome};

/// Noise stream of the learner's batch draws; chain `i` uses stream `i + 1`
/// (see [`crate::sampler::chain_rng`]).
pub const LEARNER_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = u64::MAX;

pub fn learner_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(LEARNER_STREAM);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyncMode {
    /// One thread: chain, buffer update, learner step.
    #[default]
    Sync,
    /// Sampler and learner threads running freely.
    Async,
    /// Sampler and learner threads taking turns on a fixed schedule.
    Lockstep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyncPolicy {
    /// Completed chains held back before being appended to the main buffer.
    pub temp_buffer_size: usize,
    pub mode: SyncMode,
    /// Chains per learner step in lockstep mode.
    pub lockstep_chains_per_step: usize,
}

impl Default for SyncPolicy {
    fn default() -> Self {
        SyncPolicy { temp_buffer_size: 64, mode: SyncMode::Sync, lockstep_chains_per_step: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Learner steps of self-refinement.
    pub n_iterations: usize,
    pub n_pretrain_iterations: usize,
    /// Fraction of the dataset retained for training, in (0, 1].
    pub data_fraction: f64,
    /// Share of each learner batch drawn from the dataset once the replay
    /// buffer is non-empty; the rest comes from the buffer.
    pub data_mix: f64,
    pub buffer_capacity: usize,
    /// Learner steps between validation checkpoints.
    pub checkpoint_every: usize,
    /// Drives the dataset shuffle, learner batches and every chain.
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub langevin: LangevinConfig,
    pub sync: SyncPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 8,
            n_iterations: 1000,
            n_pretrain_iterations: 10_000,
            data_fraction: 1.0,
            data_mix: 0.5,
            buffer_capacity: DEFAULT_BUFFER_CAPACITY,
            checkpoint_every: 500,
            seed: 0,
            optimizer: OptimizerConfig::default(),
            langevin: LangevinConfig::default(),
            sync: SyncPolicy::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("train.batch_size", self.batch_size),
            ("train.buffer_capacity", self.buffer_capacity),
            ("train.checkpoint_every", self.checkpoint_every),
            ("train.sync.temp_buffer_size", self.sync.temp_buffer_size),
            ("train.sync.lockstep_chains_per_step", self.sync.lockstep_chains_per_step),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
        }
        if !(self.data_fraction > 0.0 && self.data_fraction <= 1.0) {
            return Err(Error::config(
                "train.data_fraction",
                format!("must lie in (0, 1], got {}", self.data_fraction),
            ));
        }
        if !(0.0..=1.0).contains(&self.data_mix) {
            return Err(Error::config("train.data_mix", format!("must lie in [0, 1], got {}", self.data_mix)));
        }
        self.optimizer.validate()?;
        self.langevin.validate()
    }
}

/// Indices kept under `fraction`: a seeded shuffle of `0..n`, then the first
/// `round(fraction * n)` entries (at least one).
pub fn retain_fraction(n: usize, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::EmptySource("dataset has no frames"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config("train.data_fraction", format!("must lie in (0, 1], got {fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let keep = ((fraction * n as f64).round() as usize).clamp(1, n);
    idx.truncate(keep);
    Ok(idx)
}
