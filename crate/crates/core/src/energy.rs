//! Restricted Hartree-Fock energy `E(R, C)`, its Fock matrix, the analytic
//! gradient with respect to the coefficients and finite-difference gradients
//! with respect to nuclear positions.

use nalgebra::DMatrix;

use crate::chem::Positions;
use crate::error::{Error, Result};
use crate::integrals::IntegralSet;
use crate::linalg::{orthonormality_error, symmetrize};

/// Coefficients above this deviation from `C^T S C = I` are rejected.
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-6;

/// Central-difference step for nuclear gradients, Bohr.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Orbital coefficients, one molecular orbital per column; the first `n_occ`
/// columns are occupied.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    pub values: DMatrix<f64>,
}

/// Closed-shell density `P = 2 C_occ C_occ^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub values: DMatrix<f64>,
}

/// `F = H_core + J - K/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockMatrix {
    pub values: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub e_core: f64,
    pub e_coulomb: f64,
    pub e_exchange: f64,
    pub e_nn: f64,
    pub total: f64,
}

fn check_square(what: &str, m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, basis has {n} functions",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub fn density_from_coefficients(c: &CoefficientMatrix, n_occ: usize) -> Result<DensityMatrix> {
    let m = c.values.ncols();
    if n_occ > m {
        return Err(Error::DimensionMismatch(format!("{n_occ} occupied orbitals but only {m} columns")));
    }
    let occ = c.values.columns(0, n_occ);
    let mut values = 2.0 * &occ * occ.transpose();
    symmetrize(&mut values);
    Ok(DensityMatrix { values })
}

/// Coulomb and exchange contractions `J_ij = sum P_kl (ij|kl)`,
/// `K_ik = sum P_jl (ij|kl)`.
fn coulomb_exchange(p: &DMatrix<f64>, ints: &IntegralSet) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = ints.n_basis();
    let mut j = DMatrix::zeros(n, n);
    let mut k = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let v = ints.eri.get(a, b, c, d);
                    j[(a, b)] += p[(c, d)] * v;
                    k[(a, c)] += p[(b, d)] * v;
                }
            }
        }
    }
    (j, k)
}

pub fn build_fock(p: &DensityMatrix, ints: &IntegralSet) -> Result<FockMatrix> {
    check_square("density", &p.values, ints.n_basis())?;
    let (j, k) = coulomb_exchange(&p.values, ints);
    let mut values = ints.core_hamiltonian() + j - 0.5 * k;
    symmetrize(&mut values);
    Ok(FockMatrix { values })
}

fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(&b.transpose()).sum()
}

/// Energy and Fock matrix of a density, without coefficient checks.
pub fn energy_from_density(p: &DensityMatrix, ints: &IntegralSet) -> Result<(EnergyBreakdown, FockMatrix)> {
    check_square("density", &p.values, ints.n_basis())?;
    let h = ints.core_hamiltonian();
    let (j, k) = coulomb_exchange(&p.values, ints);
    let e_core = trace_product(&p.values, &h);
    let e_coulomb = 0.5 * trace_product(&p.values, &j);
    let e_exchange = -0.25 * trace_product(&p.values, &k);
    let e_nn = ints.nuclear_repulsion;
    let mut f = h + j - 0.5 * k;
    symmetrize(&mut f);
    Ok((
        EnergyBreakdown { e_core, e_coulomb, e_exchange, e_nn, total: e_core + e_coulomb + e_exchange + e_nn },
        FockMatrix { values: f },
    ))
}

fn check_coefficients(ints: &IntegralSet, c: &CoefficientMatrix, n_occ: usize) -> Result<()> {
    check_square("coefficients", &c.values, ints.n_basis())?;
    if n_occ > ints.n_basis() {
        return Err(Error::DimensionMismatch(format!("{n_occ} occupied orbitals, {} basis functions", ints.n_basis())));
    }
    let deviation = orthonormality_error(&c.values, &ints.overlap);
    if !(deviation <= ORTHONORMALITY_TOLERANCE) {
        return Err(Error::NotOrthonormal { deviation });
    }
    Ok(())
}

pub fn energy(ints: &IntegralSet, c: &CoefficientMatrix, n_occ: usize) -> Result<EnergyBreakdown> {
    check_coefficients(ints, c, n_occ)?;
    let p = density_from_coefficients(c, n_occ)?;
    Ok(energy_from_density(&p, ints)?.0)
}

/// Energy together with `dE/dC` (occupied columns `4 F C`, virtual columns zero).
pub fn energy_and_grad(
    ints: &IntegralSet,
    c: &CoefficientMatrix,
    n_occ: usize,
) -> Result<(EnergyBreakdown, DMatrix<f64>)> {
    check_coefficients(ints, c, n_occ)?;
    let p = density_from_coefficients(c, n_occ)?;
    let (e, f) = energy_from_density(&p, ints)?;
    let n = ints.n_basis();
    let mut grad = DMatrix::zeros(n, n);
    if n_occ > 0 {
        let occ = 4.0 * &f.values * c.values.columns(0, n_occ);
        grad.columns_mut(0, n_occ).copy_from(&occ);
    }
    Ok((e, grad))
}

pub fn energy_grad_coefficients(ints: &IntegralSet, c: &CoefficientMatrix, n_occ: usize) -> Result<DMatrix<f64>> {
    Ok(energy_and_grad(ints, c, n_occ)?.1)
}

/// Anything that assigns an energy (Hartree) to a block of coordinates.
pub trait EnergyField {
    fn energy(&self, r: &Positions) -> Result<f64>;

    /// `dE/dR`; defaults to central differences with [`EnergyField::fd_step`].
    fn gradient(&self, r: &Positions) -> Result<Positions> {
        grad_positions(self, r, self.fd_step())
    }

    fn fd_step(&self) -> f64 {
        DEFAULT_FD_STEP
    }

    /// Whether rows are atoms, so that interatomic distance guards apply.
    fn is_molecular(&self) -> bool {
        true
    }
}

impl<F: EnergyField + ?Sized> EnergyField for &F {
    fn energy(&self, r: &Positions) -> Result<f64> {
        (**self).energy(r)
    }
    fn gradient(&self, r: &Positions) -> Result<Positions> {
        (**self).gradient(r)
    }
    fn fd_step(&self) -> f64 {
        (**self).fd_step()
    }
    fn is_molecular(&self) -> bool {
        (**self).is_molecular()
    }
}

/// Central differences `[E(R + h e_i) - E(R - h e_i)] / 2h`, coordinates in
/// row-major order.
pub fn grad_positions<F: EnergyField + ?Sized>(field: &F, r: &Positions, fd_step: f64) -> Result<Positions> {
    assert!(fd_step > 0.0, "finite-difference step must be positive");
    let mut grad = Positions::zeros(r.nrows(), r.ncols());
    let mut probe = r.clone();
    for i in 0..r.nrows() {
        for k in 0..r.ncols() {
            let x = r[(i, k)];
            probe[(i, k)] = x + fd_step;
            let up = field.energy(&probe)?;
            probe[(i, k)] = x - fd_step;
            let down = field.energy(&probe)?;
            probe[(i, k)] = x;
            grad[(i, k)] = (up - down) / (2.0 * fd_step);
        }
    }
    Ok(grad)
}
