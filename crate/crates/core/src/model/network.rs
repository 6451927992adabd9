//! Forward pass with a tape, and the reverse pass through energy, `S^{-1/2}`,
//! orthogonalization and the dense stack.

use nalgebra::DMatrix;

use super::features::{assemble, radial_descriptors};
use super::orthogonal::{orthogonalize, orthogonalize_backward, OrthoCache};
use super::{GradientRecord, ModelParams, Weights};
use crate::chem::{BasisSet, Molecule};
use crate::energy::{energy, energy_and_grad, CoefficientMatrix};
use crate::error::{Error, Result};
use crate::integrals::{compute_integrals, IntegralSet};
use crate::linalg::inverse_sqrt;

/// Everything about one geometry that does not depend on θ.
#[derive(Debug, Clone)]
pub struct PreparedFrame {
    pub molecule: Molecule,
    pub ints: IntegralSet,
    /// `S^{-1/2}`.
    pub orthogonalizer: DMatrix<f64>,
    radial: DMatrix<f64>,
}

impl PreparedFrame {
    pub fn new(params: &ModelParams, molecule: Molecule, basis: &BasisSet) -> Result<Self> {
        params.layout.check_molecule(&molecule)?;
        let ints = compute_integrals(&molecule, basis)?;
        if ints.n_basis() != params.layout.n_basis() {
            return Err(Error::DimensionMismatch(format!(
                "basis has {} functions, model expects {}",
                ints.n_basis(),
                params.layout.n_basis()
            )));
        }
        let orthogonalizer = inverse_sqrt(&ints.overlap)?;
        let radial = radial_descriptors(&params.config, &params.layout, molecule.positions());
        Ok(PreparedFrame { molecule, ints, orthogonalizer, radial })
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn silu(z: f64) -> f64 {
    z * sigmoid(z)
}

fn silu_prime(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}

struct Tape {
    /// Input of each layer; `inputs[0]` is the feature matrix.
    inputs: Vec<DMatrix<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<DMatrix<f64>>,
    q: DMatrix<f64>,
    ortho: OrthoCache,
}

fn affine(x: &DMatrix<f64>, w: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut z = x * w;
    for mut row in z.row_iter_mut() {
        row += b;
    }
    z
}

fn forward(params: &ModelParams, frame: &PreparedFrame) -> Result<(CoefficientMatrix, Tape)> {
    let w = &params.weights;
    let mut inputs = vec![assemble(params, &frame.radial)];
    let mut pre = Vec::with_capacity(w.layers.len().saturating_sub(1));
    let last = w.layers.len() - 1;
    let mut out = None;
    for (i, layer) in w.layers.iter().enumerate() {
        let z = affine(&inputs[i], &layer.weight, &layer.bias);
        if i == last {
            out = Some(z);
        } else {
            inputs.push(z.map(silu));
            pre.push(z);
        }
    }
    let q_raw = out.expect("at least one layer") + &w.orbital_bias;
    let (q, ortho) = orthogonalize(params.config.orthogonalization, &q_raw)?;
    let c = CoefficientMatrix { values: &frame.orthogonalizer * &q };
    Ok((c, Tape { inputs, pre, q, ortho }))
}

/// `f_θ(R)`: coefficients with `Cᵀ S C = I` by construction.
pub fn predict_coefficients(params: &ModelParams, frame: &PreparedFrame) -> Result<CoefficientMatrix> {
    Ok(forward(params, frame)?.0)
}

/// `E(R, f_θ(R))`.
pub fn model_energy(params: &ModelParams, frame: &PreparedFrame) -> Result<f64> {
    let c = predict_coefficients(params, frame)?;
    Ok(energy(&frame.ints, &c, frame.molecule.n_occ())?.total)
}

fn backward(params: &ModelParams, frame: &PreparedFrame, tape: &Tape, c_bar: &DMatrix<f64>, grad: &mut Weights) {
    let n_occ = frame.molecule.n_occ();
    // C = X Q with X symmetric.
    let q_bar = &frame.orthogonalizer * c_bar;
    let a_bar = orthogonalize_backward(&tape.q, &tape.ortho, &q_bar, n_occ);
    grad.orbital_bias += &a_bar;

    let w = &params.weights;
    let mut g = a_bar;
    for i in (0..w.layers.len()).rev() {
        let gl = &mut grad.layers[i];
        gl.weight += tape.inputs[i].transpose() * &g;
        for row in g.row_iter() {
            gl.bias += row;
        }
        let mut g_in = &g * w.layers[i].weight.transpose();
        if i > 0 {
            g_in.zip_apply(&tape.pre[i - 1], |gv, z| *gv *= silu_prime(z));
        }
        g = g_in;
    }
    let d_emb = params.config.embedding_dim;
    for (row, &token) in params.layout.orbital_tokens.iter().enumerate() {
        let mut target = grad.embedding.row_mut(token);
        target += g.view((row, 0), (1, d_emb));
    }
}

/// Mean energy of the predicted states over the batch and its exact gradient
/// with respect to every parameter.
pub fn loss_and_grad(params: &ModelParams, batch: &[PreparedFrame]) -> Result<(f64, GradientRecord)> {
    if batch.is_empty() {
        return Err(Error::EmptySource("loss over an empty batch"));
    }
    let mut grad = Weights::zeros_like(&params.weights);
    let mut loss = 0.0;
    for frame in batch {
        let (c, tape) = forward(params, frame)?;
        let (e, c_bar) = energy_and_grad(&frame.ints, &c, frame.molecule.n_occ())?;
        loss += e.total;
        backward(params, frame, &tape, &c_bar, &mut grad);
    }
    let inv = 1.0 / batch.len() as f64;
    grad.scale(inv);
    Ok((loss * inv, grad))
}

/// [`loss_and_grad`] on raw geometries; integrals are recomputed per call.
pub fn loss_and_grad_molecules(
    params: &ModelParams,
    batch: &[Molecule],
    basis: &BasisSet,
) -> Result<(f64, GradientRecord)> {
    let frames = batch.iter().map(|m| PreparedFrame::new(params, m.clone(), basis)).collect::<Result<Vec<_>>>()?;
    loss_and_grad(params, &frames)
}
