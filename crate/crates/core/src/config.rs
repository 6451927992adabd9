//! Run configuration: a TOML file with one section per component. Unknown
//! keys are rejected; missing keys take their defaults. Relative paths are
//! resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chem::{parse_basis, parse_xyz, BasisSet, ConformationSet, LengthUnit, Molecule};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::scf::{frames_from_json, LabeledSet, ScfOptions};
use crate::train::{DatasetGenerator, TrainConfig};

/// The STO-3G basis for H through Ne, used when no basis file is given.
pub const BUILTIN_STO3G: &str = include_str!("../data/sto-3g.basis");

pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.toml";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// XYZ file; its first frame is the seed geometry.
    pub molecule: Option<PathBuf>,
    pub length_unit: LengthUnit,
    pub charge: i32,
    /// Basis file; the built-in STO-3G when absent.
    pub basis: Option<PathBuf>,
    /// XYZ datasets; labels are read from `<stem>.labels.json` when present.
    pub train_set: Option<PathBuf>,
    pub validation_set: Option<PathBuf>,
    pub test_set: Option<PathBuf>,
    /// Checkpoint to start from or to evaluate.
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Also print metrics in micro-Hartree; files always hold Hartree.
    pub micro_hartree: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("run"), micro_hartree: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub n_frames: usize,
    pub generator: DatasetGenerator,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig { n_frames: 25, generator: DatasetGenerator::GaussianPerturbation { sigma: 0.1 }, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    /// Chains started from the first frames of the train set (or the seed
    /// geometry); chain `i` uses noise stream `i` of `train.langevin.seed`.
    pub n_chains: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig { n_chains: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputConfig,
    pub output: OutputConfig,
    pub dataset: DatasetConfig,
    pub scf: ScfOptions,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub sample: SampleConfig,
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p.as_mut() {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let key = e
                .span()
                .map(|s| text[s].split(['=', '\n']).next().unwrap_or("").trim().to_string())
                .filter(|k| !k.is_empty())
                .unwrap_or_else(|| "<config>".into());
            Error::config(key, message)
        })
    }

    /// Parse `path`, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = RunConfig::from_toml(&read(path)?).map_err(|e| match e {
            Error::Config { key, message } => Error::config(key, format!("{message} (in {})", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let input = &mut cfg.input;
        for p in [
            &mut input.molecule,
            &mut input.basis,
            &mut input.train_set,
            &mut input.validation_set,
            &mut input.test_set,
            &mut input.checkpoint,
        ] {
            resolve(base, p);
        }
        if cfg.output.dir.is_relative() {
            cfg.output.dir = base.join(&cfg.output.dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.scf.max_iter == 0 {
            return Err(Error::config("scf.max_iter", "must be at least 1"));
        }
        if !(self.scf.e_tol > 0.0 && self.scf.p_tol > 0.0) {
            return Err(Error::config("scf.e_tol", "tolerances must be positive"));
        }
        if self.sample.n_chains == 0 {
            return Err(Error::config("sample.n_chains", "must be at least 1"));
        }
        if self.dataset.n_frames == 0 {
            return Err(Error::config("dataset.n_frames", "must be at least 1"));
        }
        Ok(())
    }

    /// Write every effective setting to `<output.dir>/resolved_config.toml`,
    /// with paths made absolute so the file works from any directory.
    pub fn write_resolved(&self) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.output.dir).map_err(|e| Error::io(&self.output.dir, e))?;
        let mut resolved = self.clone();
        let cwd = std::env::current_dir().map_err(|e| Error::io(".", e))?;
        let input = &mut resolved.input;
        for p in [
            &mut input.molecule,
            &mut input.basis,
            &mut input.train_set,
            &mut input.validation_set,
            &mut input.test_set,
            &mut input.checkpoint,
        ] {
            resolve(&cwd, p);
        }
        resolved.output.dir = cwd.join(&resolved.output.dir);
        let path = self.output.dir.join(RESOLVED_CONFIG_FILE);
        std::fs::write(&path, resolved.to_toml()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn basis(&self) -> Result<BasisSet> {
        match &self.input.basis {
            Some(p) => parse_basis(&read(p)?).map_err(|e| in_file(p, e)),
            None => parse_basis(BUILTIN_STO3G),
        }
    }

    /// Seed geometry from `input.molecule`.
    pub fn molecule(&self) -> Result<Molecule> {
        let path = required(&self.input.molecule, "input.molecule")?;
        Ok(load_xyz(path, self.input.length_unit, self.input.charge)?.template)
    }

    pub fn dataset(&self, key: &str, path: &Option<PathBuf>) -> Result<LabeledOrPlain> {
        load_dataset(required(path, key)?, self.input.length_unit, self.input.charge)
    }
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::config(key, "required for this command"))
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { line, message } => Error::parse(line, format!("{}: {message}", path.display())),
        Error::FrameMismatch { frame, line, message } => {
            Error::FrameMismatch { frame, line, message: format!("{}: {message}", path.display()) }
        }
        Error::UnknownElement { line, symbol } => {
            Error::parse(line, format!("{}: unknown element symbol `{symbol}`", path.display()))
        }
        other => other,
    }
}

pub fn load_xyz(path: &Path, unit: LengthUnit, charge: i32) -> Result<ConformationSet> {
    parse_xyz(&read(path)?, unit, charge).map_err(|e| in_file(path, e))
}

/// `<dir>/<stem>.labels.json` next to an XYZ dataset.
pub fn labels_path(xyz: &Path) -> PathBuf {
    let stem = xyz.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    xyz.with_file_name(format!("{stem}.labels.json"))
}

/// A dataset with or without stored SCF results.
#[derive(Debug, Clone)]
pub enum LabeledOrPlain {
    Labeled(LabeledSet),
    Plain(ConformationSet),
}

impl LabeledOrPlain {
    pub fn set(&self) -> &ConformationSet {
        match self {
            LabeledOrPlain::Labeled(l) => &l.set,
            LabeledOrPlain::Plain(s) => s,
        }
    }

    pub fn labeled(self, path_hint: &str) -> Result<LabeledSet> {
        match self {
            LabeledOrPlain::Labeled(l) => Ok(l),
            LabeledOrPlain::Plain(_) => {
                Err(Error::config(path_hint, "dataset has no labels file; run `scf` on it first"))
            }
        }
    }
}

pub fn load_dataset(path: &Path, unit: LengthUnit, charge: i32) -> Result<LabeledOrPlain> {
    let mut set = load_xyz(path, unit, charge)?;
    let lp = labels_path(path);
    if !lp.exists() {
        return Ok(LabeledOrPlain::Plain(set));
    }
    let frames = frames_from_json(&read(&lp)?).map_err(|e| in_file(&lp, e))?;
    if frames.len() != set.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} holds {} frames, {} has {}",
            lp.display(),
            frames.len(),
            path.display(),
            set.len()
        )));
    }
    set.labels = Some(frames.iter().map(|f| f.result().map_or(f64::NAN, |r| r.energy)).collect());
    Ok(LabeledOrPlain::Labeled(LabeledSet { set, frames }))
}
