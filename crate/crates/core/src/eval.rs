//! Oracle-relative error metrics and their CSV form.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::chem::{BasisSet, ConformationSet};
use crate::energy::{build_fock, density_from_coefficients, energy, CoefficientMatrix};
use crate::error::{Error, Result};
use crate::integrals::{compute_integrals, IntegralSet};
use crate::linalg::{generalized_eigen, inverse_sqrt};
use crate::model::{model_energy, predict_coefficients, ModelParams, PreparedFrame};
use crate::scf::LabeledSet;

/// Mean absolute errors against the oracle, Hartree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub e_mae: f64,
    /// Element-wise over the Fock matrices.
    pub h_mae: f64,
    /// Over all orbital energies.
    pub eps_mae: f64,
    pub homo_mae: f64,
    pub lumo_mae: f64,
    pub gap_mae: f64,
    pub n_frames: usize,
}

pub const METRICS_CSV_HEADER: &str = "metric,value_hartree,n_frames";

impl MetricsReport {
    pub fn values(&self) -> [(&'static str, f64); 6] {
        [
            ("e_mae", self.e_mae),
            ("h_mae", self.h_mae),
            ("eps_mae", self.eps_mae),
            ("homo_mae", self.homo_mae),
            ("lumo_mae", self.lumo_mae),
            ("gap_mae", self.gap_mae),
        ]
    }

    /// One row per metric; 17 significant digits so values parse back exactly.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{METRICS_CSV_HEADER}\n");
        for (name, v) in self.values() {
            writeln!(out, "{name},{v:.16e},{}", self.n_frames).unwrap();
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == METRICS_CSV_HEADER => {}
            _ => return Err(Error::parse(1, format!("expected header `{METRICS_CSV_HEADER}`"))),
        }
        let mut report = MetricsReport {
            e_mae: f64::NAN,
            h_mae: f64::NAN,
            eps_mae: f64::NAN,
            homo_mae: f64::NAN,
            lumo_mae: f64::NAN,
            gap_mae: f64::NAN,
            n_frames: 0,
        };
        let mut seen = Vec::new();
        for (i, line) in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::parse(i + 1, "expected 3 fields"));
            }
            let v: f64 = fields[1].parse().map_err(|_| Error::parse(i + 1, format!("bad value `{}`", fields[1])))?;
            report.n_frames =
                fields[2].parse().map_err(|_| Error::parse(i + 1, format!("bad frame count `{}`", fields[2])))?;
            let slot = match fields[0] {
                "e_mae" => &mut report.e_mae,
                "h_mae" => &mut report.h_mae,
                "eps_mae" => &mut report.eps_mae,
                "homo_mae" => &mut report.homo_mae,
                "lumo_mae" => &mut report.lumo_mae,
                "gap_mae" => &mut report.gap_mae,
                other => return Err(Error::parse(i + 1, format!("unknown metric `{other}`"))),
            };
            *slot = v;
            seen.push(fields[0].to_string());
        }
        if seen.len() != 6 {
            return Err(Error::parse(0, format!("expected 6 metric rows, found {}", seen.len())));
        }
        Ok(report)
    }
}

/// Absolute errors of one frame's orbital energies: mean over all orbitals,
/// HOMO `eps[n_occ - 1]`, LUMO `eps[n_occ]` and the gap `LUMO - HOMO`.
/// Requires `0 < n_occ < len`.
pub fn orbital_errors(eps: &[f64], eps_ref: &[f64], n_occ: usize) -> [f64; 4] {
    assert_eq!(eps.len(), eps_ref.len());
    assert!(n_occ > 0 && n_occ < eps.len(), "HOMO/LUMO need 0 < n_occ < m");
    let mean = eps.iter().zip(eps_ref).map(|(a, b)| (a - b).abs()).sum::<f64>() / eps.len() as f64;
    let (homo, lumo) = (eps[n_occ - 1], eps[n_occ]);
    let (homo_ref, lumo_ref) = (eps_ref[n_occ - 1], eps_ref[n_occ]);
    [mean, (homo - homo_ref).abs(), (lumo - lumo_ref).abs(), ((lumo - homo) - (lumo_ref - homo_ref)).abs()]
}

/// Metrics for arbitrary predicted coefficients; `predict` is called once
/// per frame, in order.
pub fn evaluate_with<F>(test: &LabeledSet, basis: &BasisSet, mut predict: F) -> Result<MetricsReport>
where
    F: FnMut(usize, &PreparedFrameRef) -> Result<CoefficientMatrix>,
{
    let n = test.frames.len();
    if n == 0 {
        return Err(Error::EmptySource("evaluation set has no frames"));
    }
    let mut sums = [0.0; 6];
    for (i, label) in test.frames.iter().enumerate() {
        let reference = label.result().filter(|r| r.converged).ok_or(Error::UnconvergedReference { frame: i })?;
        let molecule = test.set.molecule(i)?;
        let ints = compute_integrals(&molecule, basis)?;
        let x = inverse_sqrt(&ints.overlap)?;
        let n_occ = molecule.n_occ();
        let m = ints.n_basis();
        if n_occ == 0 || n_occ >= m {
            return Err(Error::DimensionMismatch(format!(
                "frame {i}: HOMO/LUMO need 0 < n_occ < m, got n_occ={n_occ}, m={m}"
            )));
        }
        let c = predict(i, &PreparedFrameRef { ints: &ints, orthogonalizer: &x, n_occ })?;
        let e = energy(&ints, &c, n_occ)?.total;
        let f = build_fock(&density_from_coefficients(&c, n_occ)?, &ints)?;
        let (eps, _) = generalized_eigen(&f.values, &x);
        let orbital = orbital_errors(eps.as_slice(), reference.orbital_energies.as_slice(), n_occ);
        sums[0] += (e - reference.energy).abs();
        sums[1] += (&f.values - &reference.fock.values).abs().mean();
        for (s, v) in sums[2..].iter_mut().zip(orbital) {
            *s += v;
        }
    }
    let k = n as f64;
    Ok(MetricsReport {
        e_mae: sums[0] / k,
        h_mae: sums[1] / k,
        eps_mae: sums[2] / k,
        homo_mae: sums[3] / k,
        lumo_mae: sums[4] / k,
        gap_mae: sums[5] / k,
        n_frames: n,
    })
}

/// Per-frame quantities handed to an [`evaluate_with`] predictor.
pub struct PreparedFrameRef<'a> {
    pub ints: &'a IntegralSet,
    /// `S^{-1/2}`.
    pub orthogonalizer: &'a DMatrix<f64>,
    pub n_occ: usize,
}

/// Metrics of the model's predicted states on a labeled test set. Every
/// reference frame must have converged.
pub fn evaluate(params: &ModelParams, test: &LabeledSet, basis: &BasisSet) -> Result<MetricsReport> {
    evaluate_with(test, basis, |i, _| {
        let frame = PreparedFrame::new(params, test.set.molecule(i)?, basis)?;
        predict_coefficients(params, &frame)
    })
}

/// Held-out energy error used for checkpoint selection. Frames are prepared
/// once; they stay valid for any weights with the same model configuration.
#[derive(Debug, Clone)]
pub struct EnergyValidation {
    frames: Vec<PreparedFrame>,
    reference: Vec<f64>,
}

impl EnergyValidation {
    /// Requires finite labels on every frame.
    pub fn new(params: &ModelParams, set: &ConformationSet, basis: &BasisSet) -> Result<Self> {
        let labels = set.labels.as_ref().ok_or(Error::UnconvergedReference { frame: 0 })?;
        let mut frames = Vec::with_capacity(set.len());
        for (i, &l) in labels.iter().enumerate() {
            if !l.is_finite() {
                return Err(Error::UnconvergedReference { frame: i });
            }
            frames.push(PreparedFrame::new(params, set.molecule(i)?, basis)?);
        }
        if frames.is_empty() {
            return Err(Error::EmptySource("validation set has no frames"));
        }
        Ok(EnergyValidation { frames, reference: labels.clone() })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn e_mae(&self, params: &ModelParams) -> Result<f64> {
        let mut sum = 0.0;
        for (frame, &reference) in self.frames.iter().zip(&self.reference) {
            sum += (model_energy(params, frame)? - reference).abs();
        }
        Ok(sum / self.frames.len() as f64)
    }

    /// Smallest `E(R, f_θ(R)) - E_0(R)` over the frames.
    pub fn min_excess(&self, params: &ModelParams) -> Result<f64> {
        let mut worst = f64::INFINITY;
        for (frame, &reference) in self.frames.iter().zip(&self.reference) {
            worst = worst.min(model_energy(params, frame)? - reference);
        }
        Ok(worst)
    }
}
