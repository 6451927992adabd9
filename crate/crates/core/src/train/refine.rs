use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{learner_rng, retain_fraction, EventLog, ReplayBuffer, SyncMode, TrainConfig};
use crate::chem::{BasisSet, ConformationSet, Positions};
use crate::error::{Error, Result};
use crate::eval::EnergyValidation;
use crate::model::{cosine_lr, loss_and_grad, optimizer_step, save_checkpoint, AdamState, ModelParams, PreparedFrame};
use crate::sampler::{chain_rng, init_state, run_chain, ModelField};

/// Optional side channels of a training run.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrainOptions<'a> {
    /// Held-out frames scored every `checkpoint_every` learner steps and after
    /// the last one; the lowest energy MAE is kept.
    pub validation: Option<&'a EnergyValidation>,
    /// Periodic checkpoints, `best.ckpt`, and the dump written when the loss
    /// turns non-finite.
    pub checkpoint_dir: Option<&'a Path>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestCheckpoint {
    /// Learner steps completed.
    pub step: usize,
    pub e_mae: f64,
    pub params: ModelParams,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub state: AdamState,
    pub buffer: ReplayBuffer,
    pub log: EventLog,
    /// Mean batch energy per learner step.
    pub losses: Vec<f64>,
    pub best: Option<BestCheckpoint>,
    /// Dataset indices used for training.
    pub retained: Vec<usize>,
}

impl TrainOutcome {
    /// Lowest-validation-error parameters if validation ran, else the final ones.
    pub fn selected(&self) -> &ModelParams {
        self.best.as_ref().map_or(&self.params, |b| &b.params)
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

enum Pick {
    Data(usize),
    Buffer(Positions),
}

/// Owns θ, the optimizer state and the batch stream.
struct Learner<'a> {
    params: ModelParams,
    state: AdamState,
    cfg: &'a TrainConfig,
    basis: &'a BasisSet,
    data: Vec<PreparedFrame>,
    rng: ChaCha8Rng,
    total_steps: usize,
    step: usize,
    losses: Vec<f64>,
    best: Option<BestCheckpoint>,
    opts: TrainOptions<'a>,
}

impl<'a> Learner<'a> {
    fn new(
        params: ModelParams,
        data: &ConformationSet,
        basis: &'a BasisSet,
        cfg: &'a TrainConfig,
        total_steps: usize,
        opts: TrainOptions<'a>,
    ) -> Result<Self> {
        let data = (0..data.len())
            .map(|i| PreparedFrame::new(&params, data.molecule(i)?, basis))
            .collect::<Result<Vec<_>>>()?;
        Ok(Learner {
            state: AdamState::new(&params.weights),
            params,
            cfg,
            basis,
            data,
            rng: learner_rng(cfg.seed),
            total_steps,
            step: 0,
            losses: Vec::with_capacity(total_steps),
            best: None,
            opts,
        })
    }

    /// `round(data_mix * B)` dataset frames then the rest from the buffer;
    /// the whole batch comes from the dataset while the buffer is empty.
    fn draw(&mut self, buffer: &ReplayBuffer) -> Result<Vec<Pick>> {
        let b = self.cfg.batch_size;
        let n_data = if buffer.is_empty() { b } else { ((self.cfg.data_mix * b as f64).round() as usize).min(b) };
        if n_data > 0 && self.data.is_empty() {
            return Err(Error::EmptySource("no dataset frames to train on"));
        }
        let mut picks: Vec<Pick> = (0..n_data).map(|_| Pick::Data(self.rng.random_range(0..self.data.len()))).collect();
        if n_data < b {
            picks.extend(buffer.sample(b - n_data, &mut self.rng)?.into_iter().map(Pick::Buffer));
        }
        Ok(picks)
    }

    fn train(&mut self, picks: Vec<Pick>) -> Result<f64> {
        let template = &self.data[0].molecule;
        let batch = picks
            .into_iter()
            .map(|p| match p {
                Pick::Data(i) => Ok(self.data[i].clone()),
                Pick::Buffer(r) => PreparedFrame::new(&self.params, template.with_positions(r)?, self.basis),
            })
            .collect::<Result<Vec<_>>>()?;
        let (loss, grad) = loss_and_grad(&self.params, &batch)?;
        if !loss.is_finite() {
            if let Some(dir) = self.opts.checkpoint_dir {
                let path = dir.join(format!("nonfinite_step_{:06}.ckpt", self.step));
                save_checkpoint(&self.params, &self.state, &self.cfg.optimizer, &path)?;
            }
            return Err(Error::NonFiniteLoss { step: self.step });
        }
        let lr = cosine_lr(&self.cfg.optimizer, self.step, self.total_steps);
        optimizer_step(&mut self.params.weights, &grad, &mut self.state, &self.cfg.optimizer, lr)?;
        self.step += 1;
        self.losses.push(loss);
        Ok(loss)
    }

    /// Validation and checkpoint files after every `checkpoint_every` steps
    /// and after the final step.
    fn monitor(&mut self, log: &Mutex<EventLog>) -> Result<()> {
        let due = self.step.is_multiple_of(self.cfg.checkpoint_every) || self.step == self.total_steps;
        if !due || (self.opts.validation.is_none() && self.opts.checkpoint_dir.is_none()) {
            return Ok(());
        }
        let mut fields = vec![("step", self.step.to_string())];
        if let Some(v) = self.opts.validation {
            let e_mae = v.e_mae(&self.params)?;
            let improved = self.best.as_ref().is_none_or(|b| e_mae < b.e_mae);
            if improved {
                self.best = Some(BestCheckpoint { step: self.step, e_mae, params: self.params.clone() });
            }
            fields.push(("val_e_mae", format!("{e_mae:e}")));
            fields.push(("best", improved.to_string()));
            if let (true, Some(dir)) = (improved, self.opts.checkpoint_dir) {
                save_checkpoint(&self.params, &self.state, &self.cfg.optimizer, dir.join("best.ckpt"))?;
            }
        }
        if let Some(dir) = self.opts.checkpoint_dir {
            let name = format!("step_{:06}.ckpt", self.step);
            save_checkpoint(&self.params, &self.state, &self.cfg.optimizer, dir.join(&name))?;
            fields.push(("file", name));
        }
        lock(log).record("checkpoint", &fields);
        Ok(())
    }

    fn finish(self, buffer: ReplayBuffer, log: EventLog, retained: Vec<usize>) -> TrainOutcome {
        TrainOutcome {
            params: self.params,
            state: self.state,
            buffer,
            log,
            losses: self.losses,
            best: self.best,
            retained,
        }
    }
}

fn retained_subset(
    dataset: &ConformationSet,
    cfg: &TrainConfig,
    log: &mut EventLog,
) -> Result<(Vec<usize>, ConformationSet)> {
    let retained = retain_fraction(dataset.len(), cfg.data_fraction, cfg.seed)?;
    log.record(
        "retained_frames",
        &[
            ("n", retained.len().to_string()),
            ("total", dataset.len().to_string()),
            ("data_fraction", cfg.data_fraction.to_string()),
        ],
    );
    let subset = dataset.subset(&retained);
    Ok((retained, subset))
}

/// `n_pretrain_iterations` AdamW steps on batches drawn uniformly, with
/// replacement, from the retained dataset frames. Starts a fresh optimizer
/// state and learning-rate schedule.
pub fn pretrain(
    params: ModelParams,
    dataset: &ConformationSet,
    basis: &BasisSet,
    cfg: &TrainConfig,
    opts: TrainOptions<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut log = EventLog::new();
    let (retained, data) = retained_subset(dataset, cfg, &mut log)?;
    let mut learner = Learner::new(params, &data, basis, cfg, cfg.n_pretrain_iterations, opts)?;
    let empty = ReplayBuffer::new(cfg.buffer_capacity);
    let log = Mutex::new(log);
    for _ in 0..cfg.n_pretrain_iterations {
        let picks = learner.draw(&empty)?;
        learner.train(picks)?;
        learner.monitor(&log)?;
    }
    Ok(learner.finish(empty, log.into_inner().unwrap_or_else(|e| e.into_inner()), retained))
}

/// Sampler-side state: a frozen parameter snapshot, the temporary buffer and
/// a mirror of the main buffer for chain initialization.
struct Sampler<'a> {
    cfg: &'a TrainConfig,
    basis: &'a BasisSet,
    data: &'a ConformationSet,
    snapshot: Arc<ModelParams>,
    /// Learner step count of `snapshot`.
    snapshot_step: usize,
    refresh_pending: bool,
    mirror: ReplayBuffer,
    temp: Vec<Positions>,
    chains_completed: usize,
    generation: u64,
}

impl<'a> Sampler<'a> {
    fn new(cfg: &'a TrainConfig, basis: &'a BasisSet, data: &'a ConformationSet, params: Arc<ModelParams>) -> Self {
        Sampler {
            cfg,
            basis,
            data,
            snapshot: params,
            snapshot_step: 0,
            refresh_pending: false,
            mirror: ReplayBuffer::new(cfg.buffer_capacity),
            temp: Vec::with_capacity(cfg.sync.temp_buffer_size),
            chains_completed: 0,
            generation: 0,
        }
    }

    /// Chain number `chains_completed`, seeded by `chain_rng(seed, index)`:
    /// the start is drawn by `init_state`, then `n_steps` Langevin steps on
    /// the snapshot's energy.
    fn run_one(&mut self, latest: impl FnOnce() -> (usize, Arc<ModelParams>)) -> Result<()> {
        if self.refresh_pending {
            (self.snapshot_step, self.snapshot) = latest();
            self.refresh_pending = false;
        }
        let index = self.chains_completed;
        let wrap = |e| Error::Sampler { iteration: index, source: Box::new(e) };
        let mut rng = chain_rng(self.cfg.seed, index as u64);
        let r0 = init_state(&self.mirror, self.data, self.cfg.langevin.buffer_init_prob, &mut rng).map_err(wrap)?;
        let field = ModelField::new(&self.snapshot, &self.data.template, self.basis);
        let chain = run_chain(&field, &r0, &self.cfg.langevin, &mut rng, false).map_err(wrap)?;
        self.temp.push(chain.final_positions);
        self.chains_completed += 1;
        Ok(())
    }

    fn sync_due(&self) -> bool {
        self.temp.len() >= self.cfg.sync.temp_buffer_size
    }

    /// Append the temporary buffer to `main` in one step and schedule a
    /// parameter refresh before the next chain.
    fn sync(&mut self, main: &Mutex<MainBuffer>, learner_step: usize, log: &Mutex<EventLog>) {
        let frames = self.temp.len();
        let buffer_len = {
            let mut m = lock(main);
            m.buffer.extend(self.temp.iter().cloned());
            m.generation += 1;
            self.generation = m.generation;
            m.buffer.len()
        };
        self.mirror.extend(self.temp.drain(..));
        self.refresh_pending = true;
        lock(log).record(
            "sync",
            &[
                ("generation", self.generation.to_string()),
                ("learner_step", learner_step.to_string()),
                ("chains_completed", self.chains_completed.to_string()),
                ("frames", frames.to_string()),
                ("buffer_len", buffer_len.to_string()),
                ("temp_buffer_size", self.cfg.sync.temp_buffer_size.to_string()),
                ("snapshot_step", self.snapshot_step.to_string()),
            ],
        );
    }
}

/// The replay buffer shared by both workers; `generation` counts completed
/// synchronizations.
struct MainBuffer {
    buffer: ReplayBuffer,
    generation: u64,
}

fn draw_from_main(learner: &mut Learner<'_>, main: &Mutex<MainBuffer>) -> Result<(Vec<Pick>, u64, usize)> {
    let m = lock(main);
    let picks = learner.draw(&m.buffer)?;
    Ok((picks, m.generation, m.buffer.len()))
}

fn log_learn(log: &Mutex<EventLog>, step: usize, generation: u64, buffer_len: usize, loss: f64) {
    lock(log).record(
        "learn",
        &[
            ("step", step.to_string()),
            ("generation", generation.to_string()),
            ("buffer_len", buffer_len.to_string()),
            ("loss", format!("{loss:e}")),
        ],
    );
}

/// Self-refining training for `n_iterations` learner steps with a fresh
/// optimizer state and learning-rate schedule.
///
/// Sync mode repeats: run chain `t` on the sampler snapshot, add its final
/// frame to the temporary buffer (appending it to the main buffer when
/// full), then take learner step `t` on a batch of `round(data_mix * B)`
/// dataset frames followed by buffer draws. After a synchronization the
/// next chain uses the learner's latest parameters, so with
/// `temp_buffer_size = 1` every chain samples the current model.
///
/// Async mode runs the sampler and learner on two threads; lockstep mode
/// does the same but alternates `lockstep_chains_per_step` chains with one
/// learner step, which reproduces sync mode when that count is 1.
pub fn self_refine(
    params: ModelParams,
    dataset: &ConformationSet,
    basis: &BasisSet,
    cfg: &TrainConfig,
    opts: TrainOptions<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut log = EventLog::new();
    let (retained, data) = retained_subset(dataset, cfg, &mut log)?;
    log.record(
        "config",
        &[
            ("mode", format!("{:?}", cfg.sync.mode).to_lowercase()),
            ("temp_buffer_size", cfg.sync.temp_buffer_size.to_string()),
            ("n_iterations", cfg.n_iterations.to_string()),
        ],
    );
    let learner = Learner::new(params, &data, basis, cfg, cfg.n_iterations, opts)?;
    let main = Mutex::new(MainBuffer { buffer: ReplayBuffer::new(cfg.buffer_capacity), generation: 0 });
    let log = Mutex::new(log);
    let learner = match cfg.sync.mode {
        SyncMode::Sync => run_sync(learner, &data, &main, &log)?,
        SyncMode::Async | SyncMode::Lockstep => run_threaded(learner, &data, &main, &log)?,
    };
    let main = main.into_inner().unwrap_or_else(|e| e.into_inner());
    Ok(learner.finish(main.buffer, log.into_inner().unwrap_or_else(|e| e.into_inner()), retained))
}

fn run_sync<'a>(
    mut learner: Learner<'a>,
    data: &ConformationSet,
    main: &Mutex<MainBuffer>,
    log: &Mutex<EventLog>,
) -> Result<Learner<'a>> {
    let cfg = learner.cfg;
    let mut sampler = Sampler::new(cfg, learner.basis, data, Arc::new(learner.params.clone()));
    for _ in 0..cfg.n_iterations {
        let step = learner.step;
        sampler.run_one(|| (step, Arc::new(learner.params.clone())))?;
        if sampler.sync_due() {
            sampler.sync(main, step, log);
        }
        let (picks, generation, buffer_len) = draw_from_main(&mut learner, main)?;
        let loss = learner.train(picks)?;
        log_learn(log, learner.step, generation, buffer_len, loss);
        learner.monitor(log)?;
    }
    Ok(learner)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Turn {
    Sampler,
    Learner,
    Done,
}

/// State shared between the two workers.
struct Shared {
    /// Parameters published by the learner after each step, with its step count.
    mailbox: Mutex<(usize, Arc<ModelParams>)>,
    learner_steps: AtomicUsize,
    stop: AtomicBool,
    lockstep: bool,
    turn: Mutex<Turn>,
    turn_changed: Condvar,
}

impl Shared {
    /// Block until it is `who`'s turn; false once the run is over.
    fn wait_turn(&self, who: Turn) -> bool {
        let mut t = lock(&self.turn);
        while *t != who && *t != Turn::Done {
            t = self.turn_changed.wait(t).unwrap_or_else(|e| e.into_inner());
        }
        *t == who
    }

    fn pass_turn(&self, to: Turn) {
        let mut t = lock(&self.turn);
        if *t != Turn::Done {
            *t = to;
        }
        self.turn_changed.notify_all();
    }

    fn shut_down(&self) {
        self.stop.store(true, Ordering::SeqCst);
        *lock(&self.turn) = Turn::Done;
        self.turn_changed.notify_all();
    }
}

fn sampler_worker(
    mut sampler: Sampler<'_>,
    shared: &Shared,
    main: &Mutex<MainBuffer>,
    log: &Mutex<EventLog>,
) -> Result<()> {
    let quota = if shared.lockstep { sampler.cfg.sync.lockstep_chains_per_step } else { 1 };
    while !shared.stop.load(Ordering::SeqCst) {
        if shared.lockstep && !shared.wait_turn(Turn::Sampler) {
            break;
        }
        for _ in 0..quota {
            let latest = || lock(&shared.mailbox).clone();
            if let Err(e) = sampler.run_one(latest) {
                shared.shut_down();
                return Err(e);
            }
            if sampler.sync_due() {
                sampler.sync(main, shared.learner_steps.load(Ordering::SeqCst), log);
            }
        }
        if shared.lockstep {
            shared.pass_turn(Turn::Learner);
        }
    }
    Ok(())
}

fn learner_worker(
    learner: &mut Learner<'_>,
    shared: &Shared,
    main: &Mutex<MainBuffer>,
    log: &Mutex<EventLog>,
) -> Result<()> {
    while learner.step < learner.total_steps {
        if shared.lockstep && !shared.wait_turn(Turn::Learner) {
            break;
        }
        if shared.stop.load(Ordering::SeqCst) {
            break;
        }
        let (picks, generation, buffer_len) = draw_from_main(learner, main)?;
        let loss = learner.train(picks)?;
        *lock(&shared.mailbox) = (learner.step, Arc::new(learner.params.clone()));
        shared.learner_steps.store(learner.step, Ordering::SeqCst);
        log_learn(log, learner.step, generation, buffer_len, loss);
        learner.monitor(log)?;
        if shared.lockstep && learner.step < learner.total_steps {
            shared.pass_turn(Turn::Sampler);
        }
    }
    Ok(())
}

fn run_threaded<'a>(
    mut learner: Learner<'a>,
    data: &ConformationSet,
    main: &Mutex<MainBuffer>,
    log: &Mutex<EventLog>,
) -> Result<Learner<'a>> {
    let cfg = learner.cfg;
    let initial = Arc::new(learner.params.clone());
    let shared = Shared {
        mailbox: Mutex::new((0, initial.clone())),
        learner_steps: AtomicUsize::new(0),
        stop: AtomicBool::new(false),
        lockstep: cfg.sync.mode == SyncMode::Lockstep,
        turn: Mutex::new(Turn::Sampler),
        turn_changed: Condvar::new(),
    };
    let sampler = Sampler::new(cfg, learner.basis, data, initial);
    let (sampler_result, learner_result) = thread::scope(|s| {
        let handle = s.spawn(|| sampler_worker(sampler, &shared, main, log));
        let learner_result = learner_worker(&mut learner, &shared, main, log);
        shared.shut_down();
        let sampler_result = handle.join().unwrap_or_else(|p| std::panic::resume_unwind(p));
        (sampler_result, learner_result)
    });
    sampler_result?;
    learner_result?;
    Ok(learner)
}
