use serde::{Deserialize, Serialize};

use crate::chem::Positions;
use crate::energy::EnergyField;
use crate::error::Result;

const MB_A: [f64; 4] = [-200.0, -100.0, -170.0, 15.0];
const MB_SA: [f64; 4] = [-1.0, -1.0, -6.5, 0.7];
const MB_SB: [f64; 4] = [0.0, 0.0, 11.0, 0.6];
const MB_SC: [f64; 4] = [-10.0, -10.0, -6.5, 0.7];
const MB_X0: [f64; 4] = [1.0, 0.0, -0.5, -1.0];
const MB_Y0: [f64; 4] = [0.0, 0.5, 1.5, 1.0];

/// Closed-form energies for checking the sampler against known Boltzmann
/// densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ToyEnergy {
    /// `k/2 · |x - c|²` summed over every coordinate.
    Quadratic { center: f64, stiffness: f64 },
    /// `h (x² - 1)² + t x` on a single coordinate.
    DoubleWell1d { barrier: f64, tilt: f64 },
    /// The Müller-Brown surface on `(x, y)`, multiplied by `scale`.
    MuellerBrown2d { scale: f64 },
}

impl ToyEnergy {
    fn mb_terms(x: f64, y: f64) -> [(f64, f64, f64); 4] {
        std::array::from_fn(|i| {
            let dx = x - MB_X0[i];
            let dy = y - MB_Y0[i];
            let e = MB_A[i] * (MB_SA[i] * dx * dx + MB_SB[i] * dx * dy + MB_SC[i] * dy * dy).exp();
            let gx = e * (2.0 * MB_SA[i] * dx + MB_SB[i] * dy);
            let gy = e * (MB_SB[i] * dx + 2.0 * MB_SC[i] * dy);
            (e, gx, gy)
        })
    }
}

impl EnergyField for ToyEnergy {
    fn energy(&self, r: &Positions) -> Result<f64> {
        Ok(match *self {
            ToyEnergy::Quadratic { center, stiffness } => {
                0.5 * stiffness * r.iter().map(|x| (x - center) * (x - center)).sum::<f64>()
            }
            ToyEnergy::DoubleWell1d { barrier, tilt } => {
                let x = r[0];
                barrier * (x * x - 1.0).powi(2) + tilt * x
            }
            ToyEnergy::MuellerBrown2d { scale } => scale * Self::mb_terms(r[0], r[1]).iter().map(|t| t.0).sum::<f64>(),
        })
    }

    fn gradient(&self, r: &Positions) -> Result<Positions> {
        let mut g = Positions::zeros(r.nrows(), r.ncols());
        match *self {
            ToyEnergy::Quadratic { center, stiffness } => {
                g.zip_apply(r, |gi, x| *gi = stiffness * (x - center));
            }
            ToyEnergy::DoubleWell1d { barrier, tilt } => {
                let x = r[0];
                g[0] = 4.0 * barrier * x * (x * x - 1.0) + tilt;
            }
            ToyEnergy::MuellerBrown2d { scale } => {
                for (_, gx, gy) in Self::mb_terms(r[0], r[1]) {
                    g[0] += scale * gx;
                    g[1] += scale * gy;
                }
            }
        }
        Ok(g)
    }

    fn is_molecular(&self) -> bool {
        false
    }
}
