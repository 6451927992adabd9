//! Reference restricted Hartree-Fock SCF: Roothaan iterations in the
//! symmetrically orthogonalized basis with DIIS extrapolation.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chem::{BasisSet, ConformationSet, Molecule};
use crate::energy::{density_from_coefficients, energy_from_density, CoefficientMatrix, DensityMatrix, FockMatrix};
use crate::error::{Error, Result};
use crate::integrals::{compute_integrals, IntegralSet};
use crate::linalg::{generalized_eigen, inverse_sqrt};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScfOptions {
    pub max_iter: usize,
    pub e_tol: f64,
    pub p_tol: f64,
    pub diis_depth: usize,
}

impl Default for ScfOptions {
    fn default() -> Self {
        ScfOptions { max_iter: 200, e_tol: 1e-10, p_tol: 1e-8, diis_depth: 8 }
    }
}

/// Converged (or last) SCF state. `fock` is built from the density of
/// `coefficients` and `orbital_energies` are its generalized eigenvalues, so
/// re-evaluating `coefficients` reproduces both exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ScfResult {
    pub coefficients: CoefficientMatrix,
    pub energy: f64,
    pub fock: FockMatrix,
    pub orbital_energies: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

struct Diis {
    depth: usize,
    focks: VecDeque<DMatrix<f64>>,
    errors: VecDeque<DMatrix<f64>>,
}

impl Diis {
    fn new(depth: usize) -> Self {
        Diis { depth, focks: VecDeque::new(), errors: VecDeque::new() }
    }

    fn push(&mut self, f: DMatrix<f64>, e: DMatrix<f64>) {
        if self.focks.len() == self.depth {
            self.focks.pop_front();
            self.errors.pop_front();
        }
        self.focks.push_back(f);
        self.errors.push_back(e);
    }

    /// Pulay extrapolation; drops the oldest vectors while the system is
    /// singular and returns `None` if nothing is left.
    fn extrapolate(&self) -> Option<DMatrix<f64>> {
        let total = self.focks.len();
        for start in 0..total {
            let k = total - start;
            if k < 2 {
                break;
            }
            let mut b = DMatrix::from_element(k + 1, k + 1, -1.0);
            b[(k, k)] = 0.0;
            for i in 0..k {
                for j in 0..=i {
                    let v = self.errors[start + i].dot(&self.errors[start + j]);
                    b[(i, j)] = v;
                    b[(j, i)] = v;
                }
            }
            let mut rhs = DVector::zeros(k + 1);
            rhs[k] = -1.0;
            if let Some(w) = b.lu().solve(&rhs) {
                if w.iter().all(|v| v.is_finite()) {
                    let mut f = DMatrix::zeros(self.focks[0].nrows(), self.focks[0].ncols());
                    for i in 0..k {
                        f += w[i] * &self.focks[start + i];
                    }
                    return Some(f);
                }
            }
        }
        None
    }
}

fn rms(m: &DMatrix<f64>) -> f64 {
    (m.norm_squared() / m.len().max(1) as f64).sqrt()
}

pub fn solve_scf(molecule: &Molecule, basis: &BasisSet, opts: &ScfOptions) -> Result<ScfResult> {
    let ints = compute_integrals(molecule, basis)?;
    solve_scf_with_integrals(&ints, molecule.n_occ(), opts)
}

pub fn solve_scf_with_integrals(ints: &IntegralSet, n_occ: usize, opts: &ScfOptions) -> Result<ScfResult> {
    let s = &ints.overlap;
    let x = inverse_sqrt(s)?;
    let (_, mut c) = generalized_eigen(&ints.core_hamiltonian(), &x);
    let mut p = density_from_coefficients(&CoefficientMatrix { values: c.clone() }, n_occ)?;
    let (mut e, mut f) = energy_from_density(&p, ints)?;
    let mut diis = Diis::new(opts.diis_depth.max(1));
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let fps = &f.values * &p.values * s;
        let err = &x * (&fps - fps.transpose()) * &x;
        diis.push(f.values.clone(), err);
        let f_use = if iterations > 2 && opts.diis_depth > 0 {
            diis.extrapolate().unwrap_or_else(|| f.values.clone())
        } else {
            f.values.clone()
        };
        c = generalized_eigen(&f_use, &x).1;
        let p_new = density_from_coefficients(&CoefficientMatrix { values: c.clone() }, n_occ)?;
        let (e_new, f_new) = energy_from_density(&p_new, ints)?;
        let d_e = (e_new.total - e.total).abs();
        let d_p = rms(&(&p_new.values - &p.values));
        p = p_new;
        e = e_new;
        f = f_new;
        if d_e < opts.e_tol && d_p < opts.p_tol {
            converged = true;
            break;
        }
    }

    let (orbital_energies, _) = generalized_eigen(&f.values, &x);
    Ok(ScfResult {
        coefficients: CoefficientMatrix { values: c },
        energy: e.total,
        fock: f,
        orbital_energies,
        iterations,
        converged,
    })
}

/// Density of an SCF result, `2 C_occ C_occ^T`.
pub fn result_density(result: &ScfResult, n_occ: usize) -> Result<DensityMatrix> {
    density_from_coefficients(&result.coefficients, n_occ)
}

/// Per-frame outcome of labelling; failed frames keep their error text.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameLabel {
    Solved(ScfResult),
    Failed(String),
}

impl FrameLabel {
    pub fn result(&self) -> Option<&ScfResult> {
        match self {
            FrameLabel::Solved(r) => Some(r),
            FrameLabel::Failed(_) => None,
        }
    }

    pub fn converged(&self) -> bool {
        self.result().is_some_and(|r| r.converged)
    }
}

#[derive(Debug, Clone)]
pub struct LabeledSet {
    /// Frames with `labels` filled in; NaN marks frames whose SCF failed.
    pub set: ConformationSet,
    pub frames: Vec<FrameLabel>,
}

impl LabeledSet {
    /// Indices of frames that failed or did not converge.
    pub fn flagged(&self) -> Vec<usize> {
        (0..self.frames.len()).filter(|&i| !self.frames[i].converged()).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledSet {
        LabeledSet { set: self.set.subset(indices), frames: indices.iter().map(|&i| self.frames[i].clone()).collect() }
    }
}

/// Run the SCF on every frame in order; per-frame failures are recorded,
/// never dropped.
pub fn label_conformations(set: &ConformationSet, basis: &BasisSet, opts: &ScfOptions) -> LabeledSet {
    let mut frames = Vec::with_capacity(set.len());
    let mut labels = Vec::with_capacity(set.len());
    for i in 0..set.len() {
        let outcome = set.molecule(i).and_then(|m| solve_scf(&m, basis, opts));
        match outcome {
            Ok(r) => {
                labels.push(r.energy);
                frames.push(FrameLabel::Solved(r));
            }
            Err(e) => {
                labels.push(f64::NAN);
                frames.push(FrameLabel::Failed(e.to_string()));
            }
        }
    }
    let mut set = set.clone();
    set.labels = Some(labels);
    LabeledSet { set, frames }
}

/// `frame_index,energy_hartree,converged,iterations`; failed frames have an
/// empty energy and zero iterations.
pub fn labels_csv(frames: &[FrameLabel]) -> String {
    let mut out = String::from("frame_index,energy_hartree,converged,iterations\n");
    for (i, f) in frames.iter().enumerate() {
        match f {
            FrameLabel::Solved(r) => out.push_str(&format!("{i},{:.17e},{},{}\n", r.energy, r.converged, r.iterations)),
            FrameLabel::Failed(_) => out.push_str(&format!("{i},,false,0\n")),
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct StoredMatrix {
    rows: usize,
    cols: usize,
    /// Row-major.
    data: Vec<f64>,
}

impl From<&DMatrix<f64>> for StoredMatrix {
    fn from(m: &DMatrix<f64>) -> Self {
        StoredMatrix { rows: m.nrows(), cols: m.ncols(), data: m.transpose().as_slice().to_vec() }
    }
}

impl StoredMatrix {
    fn into_matrix(self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::DimensionMismatch(format!(
                "stored matrix {}x{} has {} values",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
enum StoredFrame {
    Solved {
        energy: f64,
        converged: bool,
        iterations: usize,
        orbital_energies: Vec<f64>,
        coefficients: StoredMatrix,
        fock: StoredMatrix,
    },
    Failed {
        error: String,
    },
}

/// JSON encoding of per-frame results; shortest round-trip float formatting
/// makes it bit-exact.
pub fn frames_to_json(frames: &[FrameLabel]) -> String {
    let stored: Vec<StoredFrame> = frames
        .iter()
        .map(|f| match f {
            FrameLabel::Solved(r) => StoredFrame::Solved {
                energy: r.energy,
                converged: r.converged,
                iterations: r.iterations,
                orbital_energies: r.orbital_energies.as_slice().to_vec(),
                coefficients: (&r.coefficients.values).into(),
                fock: (&r.fock.values).into(),
            },
            FrameLabel::Failed(e) => StoredFrame::Failed { error: e.clone() },
        })
        .collect();
    serde_json::to_string(&stored).expect("plain data serializes")
}

pub fn frames_from_json(text: &str) -> Result<Vec<FrameLabel>> {
    let stored: Vec<StoredFrame> =
        serde_json::from_str(text).map_err(|e| Error::parse(e.line(), format!("SCF results: {e}")))?;
    stored
        .into_iter()
        .map(|s| {
            Ok(match s {
                StoredFrame::Solved { energy, converged, iterations, orbital_energies, coefficients, fock } => {
                    FrameLabel::Solved(ScfResult {
                        coefficients: CoefficientMatrix { values: coefficients.into_matrix()? },
                        energy,
                        fock: FockMatrix { values: fock.into_matrix()? },
                        orbital_energies: DVector::from_vec(orbital_energies),
                        iterations,
                        converged,
                    })
                }
                StoredFrame::Failed { error } => FrameLabel::Failed(error),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{parse_basis, Positions};

    fn sto3g() -> BasisSet {
        parse_basis(include_str!("../data/sto-3g.basis")).unwrap()
    }

    fn h2(d: f64) -> Molecule {
        Molecule::new(vec![1, 1], Positions::from_row_slice(2, 3, &[0., 0., 0., 0., 0., d]), 0).unwrap()
    }

    #[test]
    fn loose_tolerances_converge_fast() {
        let opts = ScfOptions { e_tol: 1e-2, p_tol: 1e-2, ..Default::default() };
        let r = solve_scf(&h2(1.4), &sto3g(), &opts).unwrap();
        assert!(r.converged && r.iterations <= 5);
    }

    #[test]
    fn unconverged_is_reported_not_raised() {
        let p = Positions::from_row_slice(3, 3, &[0., 0., 0., 0., 1.43, 1.1, 0., -1.43, 1.1]);
        let water = Molecule::new(vec![8, 1, 1], p, 0).unwrap();
        let opts = ScfOptions { max_iter: 1, ..Default::default() };
        let r = solve_scf(&water, &sto3g(), &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn empty_set_gives_empty_labels() {
        let mut set = ConformationSet::new(h2(1.4), vec![]).unwrap();
        set.frames.clear();
        let l = label_conformations(&set, &sto3g(), &ScfOptions::default());
        assert!(l.frames.is_empty());
        assert_eq!(l.set.labels.as_deref(), Some(&[][..]));
    }

    #[test]
    fn degenerate_frame_flagged() {
        let good = h2(1.4).positions().clone();
        let bad = Positions::zeros(2, 3);
        let set = ConformationSet::new(h2(1.4), vec![good.clone(), bad, good]).unwrap();
        let l = label_conformations(&set, &sto3g(), &ScfOptions::default());
        assert_eq!(l.flagged(), vec![1]);
        let labels = l.set.labels.as_ref().unwrap();
        assert!(labels[1].is_nan() && labels[0] == labels[2]);
        let csv = labels_csv(&l.frames);
        assert_eq!(csv.lines().nth(2), Some("1,,false,0"));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let set = ConformationSet::new(h2(1.4), vec![h2(1.3).positions().clone()]).unwrap();
        let mut l = label_conformations(&set, &sto3g(), &ScfOptions::default());
        l.frames.push(FrameLabel::Failed("boom".into()));
        let back = frames_from_json(&frames_to_json(&l.frames)).unwrap();
        assert_eq!(back, l.frames);
    }
}
