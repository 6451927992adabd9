use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::chem::{BasisSet, ConformationSet, Molecule};
use crate::error::{Error, Result};
use crate::sampler::{run_chain, LangevinConfig, OracleField};
use crate::scf::{label_conformations, LabeledSet, ScfOptions};

/// How frames around a seed geometry are produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetGenerator {
    /// Independent isotropic displacements with standard deviation `sigma`,
    /// Bohr.
    GaussianPerturbation { sigma: f64 },
    /// One Langevin chain on the SCF energy, keeping every `stride`-th
    /// position; `langevin.n_steps` is ignored.
    OracleLangevin { langevin: LangevinConfig, stride: usize },
}

/// `n_frames` conformations of `molecule`, labeled by the SCF oracle. Frames
/// whose SCF fails are kept and flagged.
pub fn make_dataset<R: Rng + ?Sized>(
    molecule: &Molecule,
    basis: &BasisSet,
    n_frames: usize,
    generator: &DatasetGenerator,
    scf: &ScfOptions,
    rng: &mut R,
) -> Result<LabeledSet> {
    let r0 = molecule.positions();
    let frames = match *generator {
        DatasetGenerator::GaussianPerturbation { sigma } => {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::config("dataset.sigma", format!("must be non-negative, got {sigma}")));
            }
            (0..n_frames)
                .map(|_| {
                    let mut r = r0.clone();
                    for v in r.iter_mut() {
                        let xi: f64 = rng.sample(StandardNormal);
                        *v += sigma * xi;
                    }
                    r
                })
                .collect()
        }
        DatasetGenerator::OracleLangevin { langevin, stride } => {
            if stride == 0 {
                return Err(Error::config("dataset.stride", "must be at least 1"));
            }
            let cfg = LangevinConfig { n_steps: stride, ..langevin };
            let field = OracleField::new(molecule, basis);
            let mut r = r0.clone();
            let mut frames = Vec::with_capacity(n_frames);
            for _ in 0..n_frames {
                r = run_chain(&field, &r, &cfg, rng, false)?.final_positions;
                frames.push(r.clone());
            }
            frames
        }
    };
    let set = ConformationSet::new(molecule.clone(), frames)?;
    Ok(label_conformations(&set, basis, scf))
}
