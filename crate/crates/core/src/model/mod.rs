//! The electronic-state model `f_θ(R)`: invariant per-orbital features, a
//! dense SiLU network emitting `Q_raw`, an orthogonalization map and the
//! `S^{-1/2}` transform to coefficients satisfying `Cᵀ S C = I`.
//!
//! Only `Q_raw` depends on θ; `S`, the integrals and the radial descriptors
//! are functions of the geometry alone and are held fixed in the reverse pass.

mod checkpoint;
mod features;
mod network;
mod optim;
mod orthogonal;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chem::{build_orbital_index, BasisSet, Molecule, OrbitalEntry, OrbitalIndex, ORBITAL_TYPES};
use crate::error::{Error, Result};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use features::{featurize, FeatureMatrix};
pub use network::{loss_and_grad, loss_and_grad_molecules, model_energy, predict_coefficients, PreparedFrame};
pub use optim::{cosine_lr, optimizer_step, AdamState, OptimizerConfig};
pub use orthogonal::{orthogonalize, orthogonalize_backward, OrthoCache, Orthogonalization};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_width: usize,
    /// Number of hidden layers; 0 gives a single linear map.
    pub depth: usize,
    pub embedding_dim: usize,
    pub n_radial_features: usize,
    /// Bohr.
    pub feature_cutoff: f64,
    pub orthogonalization: Orthogonalization,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_width: 128,
            depth: 4,
            embedding_dim: 16,
            n_radial_features: 32,
            feature_cutoff: 10.0,
            orthogonalization: Orthogonalization::Qr,
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("model.hidden_width", self.hidden_width),
            ("model.embedding_dim", self.embedding_dim),
            ("model.n_radial_features", self.n_radial_features),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::config(key, "must be positive"));
            }
        }
        if !(self.feature_cutoff > 0.0 && self.feature_cutoff.is_finite()) {
            return Err(Error::config("model.feature_cutoff", "must be a positive number of Bohr"));
        }
        Ok(())
    }
}

/// The molecular composition a model is built for: one model per
/// composition, with one output column per basis function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelLayout {
    pub atomic_numbers: Vec<u32>,
    pub orbital_atoms: Vec<usize>,
    pub orbital_tokens: Vec<usize>,
}

impl ModelLayout {
    pub fn new(molecule: &Molecule, basis: &BasisSet) -> Result<Self> {
        let index = build_orbital_index(molecule, basis)?;
        Ok(ModelLayout {
            atomic_numbers: molecule.atomic_numbers().to_vec(),
            orbital_atoms: index.entries.iter().map(|e| e.atom).collect(),
            orbital_tokens: index.entries.iter().map(|e| e.token).collect(),
        })
    }

    pub fn n_basis(&self) -> usize {
        self.orbital_tokens.len()
    }

    pub fn orbital_index(&self) -> OrbitalIndex {
        OrbitalIndex {
            entries: self
                .orbital_atoms
                .iter()
                .zip(&self.orbital_tokens)
                .map(|(&atom, &token)| OrbitalEntry { atom, token })
                .collect(),
        }
    }

    /// Distinct atomic numbers, ascending; one radial channel block each.
    pub fn element_classes(&self) -> Vec<u32> {
        let mut z = self.atomic_numbers.clone();
        z.sort_unstable();
        z.dedup();
        z
    }

    fn validate(&self) -> Result<()> {
        let n = self.atomic_numbers.len();
        if self.orbital_atoms.len() != self.orbital_tokens.len()
            || self.orbital_atoms.iter().any(|&a| a >= n)
            || self.orbital_tokens.iter().any(|&t| t >= ORBITAL_TYPES.len())
        {
            return Err(Error::Checkpoint("inconsistent orbital layout".into()));
        }
        Ok(())
    }

    pub fn check_molecule(&self, molecule: &Molecule) -> Result<()> {
        if molecule.atomic_numbers() != self.atomic_numbers.as_slice() {
            return Err(Error::DimensionMismatch(format!(
                "model built for atomic numbers {:?}, got {:?}",
                self.atomic_numbers,
                molecule.atomic_numbers()
            )));
        }
        Ok(())
    }
}

/// Dense layer `y = x W + b` with `x` row-per-orbital; `weight` is in × out
/// and `bias` is 1 × out.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: DMatrix<f64>,
    pub bias: DMatrix<f64>,
}

/// Every trainable array. Also used for gradients and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    /// One row per orbital token.
    pub embedding: DMatrix<f64>,
    pub layers: Vec<Dense>,
    /// Learned per-slot offset added to the network output; distinguishes
    /// orbital columns the invariant features alone cannot.
    pub orbital_bias: DMatrix<f64>,
}

pub type GradientRecord = Weights;

impl Weights {
    pub fn zeros_like(other: &Weights) -> Weights {
        let z = |m: &DMatrix<f64>| DMatrix::zeros(m.nrows(), m.ncols());
        Weights {
            embedding: z(&other.embedding),
            layers: other.layers.iter().map(|l| Dense { weight: z(&l.weight), bias: z(&l.bias) }).collect(),
            orbital_bias: z(&other.orbital_bias),
        }
    }

    /// Named arrays in a fixed order.
    pub fn blocks(&self) -> Vec<(String, &DMatrix<f64>)> {
        let mut out = vec![("embedding".to_string(), &self.embedding)];
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("layers.{i}.weight"), &l.weight));
            out.push((format!("layers.{i}.bias"), &l.bias));
        }
        out.push(("orbital_bias".to_string(), &self.orbital_bias));
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<(String, &mut DMatrix<f64>)> {
        let mut out = vec![("embedding".to_string(), &mut self.embedding)];
        for (i, l) in self.layers.iter_mut().enumerate() {
            out.push((format!("layers.{i}.weight"), &mut l.weight));
            out.push((format!("layers.{i}.bias"), &mut l.bias));
        }
        out.push(("orbital_bias".to_string(), &mut self.orbital_bias));
        out
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Weights) {
        for ((_, a), (_, b)) in self.blocks_mut().into_iter().zip(other.blocks()) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for (_, a) in self.blocks_mut() {
            *a *= alpha;
        }
    }

    pub fn n_parameters(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|(_, b)| b.iter().all(|v| v.is_finite()))
    }

    fn shapes(&self) -> Vec<(String, (usize, usize))> {
        self.blocks().into_iter().map(|(n, b)| (n, b.shape())).collect()
    }
}

/// Output-layer weights start this much smaller than the hidden layers so the
/// initial `Q_raw` stays close to `orbital_bias`.
const OUTPUT_INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub layout: ModelLayout,
    pub weights: Weights,
}

impl ModelParams {
    /// Fresh parameters drawn from `config.init_seed`: uniform weights with
    /// variance `1/fan_in`, zero biases, `orbital_bias = I`.
    pub fn new(config: ModelConfig, layout: ModelLayout) -> Result<Self> {
        config.validate()?;
        layout.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let limit3 = 3f64.sqrt();
        let embedding =
            DMatrix::from_fn(ORBITAL_TYPES.len(), config.embedding_dim, |_, _| rng.random_range(-limit3..limit3));
        let d_in = features::input_dim(&config, &layout);
        let m = layout.n_basis();
        let mut dims = vec![d_in];
        dims.extend(std::iter::repeat_n(config.hidden_width, config.depth));
        dims.push(m);
        let n_layers = dims.len() - 1;
        let layers = (0..n_layers)
            .map(|i| {
                let (fan_in, fan_out) = (dims[i], dims[i + 1]);
                let scale = if i + 1 == n_layers { OUTPUT_INIT_SCALE } else { 1.0 };
                let a = (3.0 / fan_in as f64).sqrt();
                Dense {
                    weight: DMatrix::from_fn(fan_in, fan_out, |_, _| scale * rng.random_range(-a..a)),
                    bias: DMatrix::zeros(1, fan_out),
                }
            })
            .collect();
        Ok(ModelParams {
            config,
            layout,
            weights: Weights { embedding, layers, orbital_bias: DMatrix::identity(m, m) },
        })
    }

    pub fn for_molecule(config: ModelConfig, molecule: &Molecule, basis: &BasisSet) -> Result<Self> {
        ModelParams::new(config, ModelLayout::new(molecule, basis)?)
    }

    /// Shapes expected from `config` and `layout`.
    fn expected_shapes(&self) -> Result<Vec<(String, (usize, usize))>> {
        Ok(ModelParams::new(self.config.clone(), self.layout.clone())?.weights.shapes())
    }

    /// Error unless every array has the shape implied by the config.
    pub fn check_shapes(&self) -> Result<()> {
        let expected = self.expected_shapes()?;
        let got = self.weights.shapes();
        if expected != got {
            return Err(Error::Checkpoint(format!("parameter shapes {got:?} do not match configuration {expected:?}")));
        }
        Ok(())
    }
}
