use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{ModelConfig, ModelLayout, ModelParams};
use crate::chem::{Molecule, Positions};
use crate::error::Result;

/// One row per basis function: `[embedding(token) | radial(host atom)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: DMatrix<f64>,
}

pub(crate) fn input_dim(config: &ModelConfig, layout: &ModelLayout) -> usize {
    config.embedding_dim + config.n_radial_features * layout.element_classes().len()
}

fn cosine_cutoff(r: f64, rc: f64) -> f64 {
    if r >= rc {
        0.0
    } else {
        0.5 * ((PI * r / rc).cos() + 1.0)
    }
}

/// Per-atom radial descriptors, `n_atoms × (K · n_classes)`: Gaussians with
/// centers evenly spaced on `[0, rc]` and width equal to the spacing, summed
/// over neighbors of each element class, times a cosine cutoff. Depends on
/// interatomic distances only.
pub(crate) fn radial_descriptors(config: &ModelConfig, layout: &ModelLayout, positions: &Positions) -> DMatrix<f64> {
    let classes = layout.element_classes();
    let k = config.n_radial_features;
    let rc = config.feature_cutoff;
    let spacing = if k > 1 { rc / (k - 1) as f64 } else { rc };
    let gamma = 0.5 / (spacing * spacing);
    let n = positions.nrows();
    let mut out = DMatrix::zeros(n, k * classes.len());
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let r = (positions.row(a) - positions.row(b)).norm();
            let fc = cosine_cutoff(r, rc);
            if fc == 0.0 {
                continue;
            }
            let class =
                classes.binary_search(&layout.atomic_numbers[b]).expect("layout atoms are in their own class list");
            for i in 0..k {
                let mu = i as f64 * spacing;
                out[(a, class * k + i)] += fc * (-gamma * (r - mu) * (r - mu)).exp();
            }
        }
    }
    out
}

/// Orbital rows from fixed radial descriptors and the current embedding.
pub(crate) fn assemble(params: &ModelParams, radial: &DMatrix<f64>) -> DMatrix<f64> {
    let d_emb = params.config.embedding_dim;
    let layout = &params.layout;
    let m = layout.n_basis();
    let mut x = DMatrix::zeros(m, d_emb + radial.ncols());
    for i in 0..m {
        x.view_mut((i, 0), (1, d_emb)).copy_from(&params.weights.embedding.row(layout.orbital_tokens[i]));
        x.view_mut((i, d_emb), (1, radial.ncols())).copy_from(&radial.row(layout.orbital_atoms[i]));
    }
    x
}

pub fn featurize(params: &ModelParams, molecule: &Molecule) -> Result<FeatureMatrix> {
    params.layout.check_molecule(molecule)?;
    let radial = radial_descriptors(&params.config, &params.layout, molecule.positions());
    Ok(FeatureMatrix { values: assemble(params, &radial) })
}
