//! Command-line front end. Exit codes: 0 success, 1 usage or validation
//! error, 2 failure while running.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chem::{write_xyz, ConformationSet, LengthUnit};
use crate::config::{labels_path, RunConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EnergyValidation};
use crate::model::{load_checkpoint, save_checkpoint, ModelParams};
use crate::sampler::{chain_rng, run_chain, ModelField};
use crate::scf::{frames_to_json, label_conformations, labels_csv, LabeledSet};
use crate::train::{make_dataset, pretrain, self_refine, DatasetGenerator, SyncMode, TrainOptions, TrainOutcome};

#[derive(Debug, Parser)]
#[command(name = "srdft", version, about = "Self-refining amortized Hartree-Fock")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory (`output.dir`).
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Basis file (`input.basis`).
    #[arg(long, value_name = "FILE")]
    basis: Option<PathBuf>,
    /// Seed of this command: `dataset.seed` for make-dataset,
    /// `train.langevin.seed` for sample, `train.seed` otherwise.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate and label conformations around a seed geometry.
    MakeDataset {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "XYZ")]
        molecule: Option<PathBuf>,
        #[arg(long)]
        n_frames: Option<usize>,
        /// Gaussian perturbation width, Bohr.
        #[arg(long)]
        sigma: Option<f64>,
        /// Output file stem inside the output directory.
        #[arg(long, default_value = "dataset")]
        name: String,
    },
    /// Label a dataset with the SCF oracle.
    Scf {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "XYZ")]
        dataset: Option<PathBuf>,
    },
    /// Train on the dataset alone.
    Pretrain {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        training: TrainingFlags,
    },
    /// Self-refining training from a checkpoint or fresh parameters.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        training: TrainingFlags,
        #[arg(long, value_enum)]
        mode: Option<ModeFlag>,
        #[arg(long)]
        temp_buffer_size: Option<usize>,
    },
    /// Langevin chains on the model energy, dumped as XYZ.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_name = "XYZ")]
        dataset: Option<PathBuf>,
        #[arg(long)]
        n_steps: Option<usize>,
        #[arg(long)]
        n_chains: Option<usize>,
    },
    /// Metrics of a checkpoint on a labeled test set.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_name = "XYZ")]
        test_set: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct TrainingFlags {
    #[arg(long, value_name = "XYZ")]
    dataset: Option<PathBuf>,
    #[arg(long, value_name = "XYZ")]
    validation: Option<PathBuf>,
    /// Initial parameters.
    #[arg(long, value_name = "FILE")]
    checkpoint: Option<PathBuf>,
    /// Learner steps (`train.n_pretrain_iterations` or `train.n_iterations`).
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    data_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum ModeFlag {
    Sync,
    Async,
    Lockstep,
}

/// Failure of a command: bad input (exit 1) or a runtime error (exit 2).
enum Failure {
    Invalid(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Invalid(e)
        } else {
            Failure::Runtime(e)
        }
    }
}

/// Errors while reading inputs are validation errors whatever their kind.
fn input<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Invalid)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn apply_common(cfg: &mut RunConfig, c: &Common) {
    if let Some(d) = &c.out_dir {
        cfg.output.dir = d.clone();
    }
    if let Some(b) = &c.basis {
        cfg.input.basis = Some(b.clone());
    }
    if let Some(s) = c.seed {
        cfg.train.seed = s;
    }
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    apply_common(&mut cfg, c);
    Ok(cfg)
}

fn initial_params(cfg: &RunConfig, set: &ConformationSet, basis: &crate::chem::BasisSet) -> Result<ModelParams> {
    match &cfg.input.checkpoint {
        Some(p) => {
            let (params, _, _) = load_checkpoint(p)?;
            params.layout.check_molecule(&set.template)?;
            Ok(params)
        }
        None => ModelParams::for_molecule(cfg.model.clone(), &set.template, basis),
    }
}

fn save_labeled(dir: &Path, name: &str, labeled: &LabeledSet) -> Result<PathBuf> {
    let xyz = dir.join(format!("{name}.xyz"));
    write(&xyz, &write_xyz(&labeled.set, LengthUnit::Angstrom))?;
    write(&labels_path(&xyz), &frames_to_json(&labeled.frames))?;
    write(&dir.join(format!("{name}.labels.csv")), &labels_csv(&labeled.frames))?;
    Ok(xyz)
}

fn save_outcome(dir: &Path, prefix: &str, out: &TrainOutcome, cfg: &RunConfig) -> Result<()> {
    write(&dir.join("events.log"), &out.log.to_text())?;
    save_checkpoint(&out.params, &out.state, &cfg.train.optimizer, dir.join(format!("{prefix}_final.ckpt")))?;
    save_checkpoint(out.selected(), &out.state, &cfg.train.optimizer, dir.join(format!("{prefix}_selected.ckpt")))?;
    let mut losses = String::from("step,loss_hartree\n");
    for (i, l) in out.losses.iter().enumerate() {
        losses.push_str(&format!("{},{l:.16e}\n", i + 1));
    }
    write(&dir.join("losses.csv"), &losses)
}

fn run_command(command: Command) -> std::result::Result<(), Failure> {
    match command {
        Command::MakeDataset { common, molecule, n_frames, sigma, name } => {
            let mut cfg = input(load_config(&common))?;
            if let Some(s) = common.seed {
                cfg.dataset.seed = s;
            }
            if molecule.is_some() {
                cfg.input.molecule = molecule;
            }
            if let Some(n) = n_frames {
                cfg.dataset.n_frames = n;
            }
            if let Some(s) = sigma {
                cfg.dataset.generator = DatasetGenerator::GaussianPerturbation { sigma: s };
            }
            input(cfg.validate())?;
            let basis = input(cfg.basis())?;
            let mol = input(cfg.molecule())?;
            cfg.write_resolved()?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.dataset.seed);
            let labeled = make_dataset(&mol, &basis, cfg.dataset.n_frames, &cfg.dataset.generator, &cfg.scf, &mut rng)?;
            let path = save_labeled(&cfg.output.dir, &name, &labeled)?;
            println!("wrote {} frames to {} ({} flagged)", labeled.set.len(), path.display(), labeled.flagged().len());
        }
        Command::Scf { common, dataset } => {
            let mut cfg = input(load_config(&common))?;
            if dataset.is_some() {
                cfg.input.train_set = dataset;
            }
            input(cfg.validate())?;
            let basis = input(cfg.basis())?;
            let data = input(cfg.dataset("input.train_set", &cfg.input.train_set))?;
            cfg.write_resolved()?;
            let labeled = label_conformations(data.set(), &basis, &cfg.scf);
            let path = save_labeled(&cfg.output.dir, "labeled", &labeled)?;
            println!(
                "labeled {} frames into {} ({} flagged)",
                labeled.set.len(),
                path.display(),
                labeled.flagged().len()
            );
        }
        Command::Pretrain { common, training } => run_training(common, training, None, None, false)?,
        Command::Train { common, training, mode, temp_buffer_size } => {
            run_training(common, training, mode, temp_buffer_size, true)?
        }
        Command::Sample { common, checkpoint, dataset, n_steps, n_chains } => {
            let mut cfg = input(load_config(&common))?;
            if let Some(s) = common.seed {
                cfg.train.langevin.seed = s;
            }
            if checkpoint.is_some() {
                cfg.input.checkpoint = checkpoint;
            }
            if dataset.is_some() {
                cfg.input.train_set = dataset;
            }
            if let Some(n) = n_steps {
                cfg.train.langevin.n_steps = n;
            }
            if let Some(n) = n_chains {
                cfg.sample.n_chains = n;
            }
            input(cfg.validate())?;
            let basis = input(cfg.basis())?;
            let starts = match &cfg.input.train_set {
                Some(_) => input(cfg.dataset("input.train_set", &cfg.input.train_set))?.set().clone(),
                None => {
                    let m = input(cfg.molecule())?;
                    ConformationSet::new(m.clone(), vec![m.positions().clone()])?
                }
            };
            let params = input(initial_params(&cfg, &starts, &basis))?;
            cfg.write_resolved()?;
            let field = ModelField::new(&params, &starts.template, &basis);
            let mut frames = Vec::new();
            let mut comments = Vec::new();
            for c in 0..cfg.sample.n_chains {
                let mut rng = chain_rng(cfg.train.langevin.seed, c as u64);
                let r0 = &starts.frames[c % starts.len()];
                let chain = run_chain(&field, r0, &cfg.train.langevin, &mut rng, true)
                    .map_err(|e| Error::Sampler { iteration: c, source: Box::new(e) })?;
                for (s, r) in chain.trajectory.unwrap_or_default().into_iter().enumerate() {
                    frames.push(r);
                    comments.push(format!("chain={c} step={}", s + 1));
                }
            }
            let mut traj = ConformationSet::new(starts.template.clone(), frames)?;
            traj.comments = comments;
            let path = cfg.output.dir.join("trajectory.xyz");
            write(&path, &write_xyz(&traj, LengthUnit::Angstrom))?;
            println!("wrote {} frames to {}", traj.len(), path.display());
        }
        Command::Eval { common, checkpoint, test_set } => {
            let mut cfg = input(load_config(&common))?;
            if checkpoint.is_some() {
                cfg.input.checkpoint = checkpoint;
            }
            if test_set.is_some() {
                cfg.input.test_set = test_set;
            }
            input(cfg.validate())?;
            let basis = input(cfg.basis())?;
            let test =
                input(cfg.dataset("input.test_set", &cfg.input.test_set).and_then(|d| d.labeled("input.test_set")))?;
            if cfg.input.checkpoint.is_none() {
                return Err(Failure::Invalid(Error::config("input.checkpoint", "required for this command")));
            }
            let params = input(initial_params(&cfg, &test.set, &basis))?;
            cfg.write_resolved()?;
            let report = evaluate(&params, &test, &basis)?;
            let path = cfg.output.dir.join("metrics.csv");
            write(&path, &report.to_csv())?;
            for (name, v) in report.values() {
                if cfg.output.micro_hartree {
                    println!("{name:<9} {:>14.3} µEh", v * 1e6);
                } else {
                    println!("{name:<9} {v:>14.6e} Eh");
                }
            }
        }
    }
    Ok(())
}

fn run_training(
    common: Common,
    training: TrainingFlags,
    mode: Option<ModeFlag>,
    temp_buffer_size: Option<usize>,
    self_refining: bool,
) -> std::result::Result<(), Failure> {
    let mut cfg = input(load_config(&common))?;
    if training.dataset.is_some() {
        cfg.input.train_set = training.dataset;
    }
    if training.validation.is_some() {
        cfg.input.validation_set = training.validation;
    }
    if training.checkpoint.is_some() {
        cfg.input.checkpoint = training.checkpoint;
    }
    if let Some(n) = training.iterations {
        if self_refining {
            cfg.train.n_iterations = n;
        } else {
            cfg.train.n_pretrain_iterations = n;
        }
    }
    if let Some(f) = training.data_fraction {
        cfg.train.data_fraction = f;
    }
    if let Some(m) = mode {
        cfg.train.sync.mode = match m {
            ModeFlag::Sync => SyncMode::Sync,
            ModeFlag::Async => SyncMode::Async,
            ModeFlag::Lockstep => SyncMode::Lockstep,
        };
    }
    if let Some(t) = temp_buffer_size {
        cfg.train.sync.temp_buffer_size = t;
    }
    input(cfg.validate())?;
    let basis = input(cfg.basis())?;
    let data = input(cfg.dataset("input.train_set", &cfg.input.train_set))?;
    let params = input(initial_params(&cfg, data.set(), &basis))?;
    let validation = match &cfg.input.validation_set {
        Some(_) => {
            let v = input(cfg.dataset("input.validation_set", &cfg.input.validation_set))?;
            Some(input(EnergyValidation::new(&params, v.set(), &basis))?)
        }
        None => None,
    };
    cfg.write_resolved()?;
    let ckpt_dir = cfg.output.dir.join("checkpoints");
    std::fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
    let opts = TrainOptions { validation: validation.as_ref(), checkpoint_dir: Some(&ckpt_dir) };
    let (prefix, out) = if self_refining {
        ("train", self_refine(params, data.set(), &basis, &cfg.train, opts)?)
    } else {
        ("pretrain", pretrain(params, data.set(), &basis, &cfg.train, opts)?)
    };
    save_outcome(&cfg.output.dir, prefix, &out, &cfg)?;
    if self_refining {
        let buffer = ConformationSet::new(data.set().template.clone(), out.buffer.iter().cloned().collect())?;
        write(&cfg.output.dir.join("buffer.xyz"), &write_xyz(&buffer, LengthUnit::Angstrom))?;
    }
    let last = out.losses.last().copied().unwrap_or(f64::NAN);
    match &out.best {
        Some(b) => println!(
            "{prefix}: {} steps, final loss {last:.10}, best validation e_mae {:.3e} at step {}",
            out.losses.len(),
            b.e_mae,
            b.step
        ),
        None => println!("{prefix}: {} steps, final loss {last:.10}", out.losses.len()),
    }
    Ok(())
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_command(cli.command) {
        Ok(()) => 0,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e}");
            1
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}
