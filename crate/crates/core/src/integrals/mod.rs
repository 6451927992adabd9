//! Molecular integrals over contracted Cartesian Gaussians (l <= 1) by the
//! McMurchie–Davidson Hermite expansion.

mod boys;
mod hermite;

use nalgebra::DMatrix;

use crate::chem::{BasisSet, GaussianShell, Molecule, MIN_NUCLEAR_DISTANCE};
use crate::error::{Error, Result};

pub use boys::{boys, MAX_ORDER as BOYS_MAX_ORDER};

/// Two-electron integrals `(ij|kl)` in chemists' notation, one value per
/// index class under the 8-fold permutational symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedEri {
    n: usize,
    values: Vec<f64>,
}

#[inline]
fn pair(i: usize, j: usize) -> usize {
    if i >= j {
        i * (i + 1) / 2 + j
    } else {
        j * (j + 1) / 2 + i
    }
}

impl PackedEri {
    fn zeros(n: usize) -> Self {
        let npair = n * (n + 1) / 2;
        PackedEri { n, values: vec![0.0; npair * (npair + 1) / 2] }
    }

    #[inline]
    fn index(i: usize, j: usize, k: usize, l: usize) -> usize {
        pair(pair(i, j), pair(k, l))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.values[Self::index(i, j, k, l)]
    }

    pub fn n_basis(&self) -> usize {
        self.n
    }

    pub fn packed(&self) -> &[f64] {
        &self.values
    }

    /// Dense `n^4` copy, index `((i*n + j)*n + k)*n + l`.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(n.pow(4));
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        out.push(self.get(i, j, k, l));
                    }
                }
            }
        }
        out
    }
}

/// Everything the energy functional needs at one geometry.
#[derive(Debug, Clone)]
pub struct IntegralSet {
    pub overlap: DMatrix<f64>,
    pub kinetic: DMatrix<f64>,
    pub nuclear_attraction: DMatrix<f64>,
    pub eri: PackedEri,
    pub nuclear_repulsion: f64,
}

impl IntegralSet {
    pub fn n_basis(&self) -> usize {
        self.overlap.nrows()
    }

    pub fn core_hamiltonian(&self) -> DMatrix<f64> {
        &self.kinetic + &self.nuclear_attraction
    }
}

pub fn nuclear_repulsion(molecule: &Molecule) -> Result<f64> {
    let z = molecule.atomic_numbers();
    let mut e = 0.0;
    for i in 0..z.len() {
        for j in 0..i {
            let r = molecule.distance(i, j);
            if r < MIN_NUCLEAR_DISTANCE {
                return Err(Error::DegenerateGeometry { i: j, j: i, distance: r });
            }
            e += (z[i] * z[j]) as f64 / r;
        }
    }
    Ok(e)
}

/// All one- and two-electron integrals plus the nuclear repulsion energy.
pub fn compute_integrals(molecule: &Molecule, basis: &BasisSet) -> Result<IntegralSet> {
    let nuclear_repulsion = nuclear_repulsion(molecule)?;
    let shells = basis.place(molecule)?;
    integrals_for_shells(molecule, &shells, nuclear_repulsion)
}

fn integrals_for_shells(molecule: &Molecule, shells: &[GaussianShell], nuclear_repulsion: f64) -> Result<IntegralSet> {
    let charges: Vec<(f64, [f64; 3])> = molecule
        .atomic_numbers()
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let r = molecule.positions().row(i);
            (z as f64, [r[0], r[1], r[2]])
        })
        .collect();

    let offsets: Vec<usize> = shells
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s.n_functions();
            Some(o)
        })
        .collect();
    let n: usize = shells.iter().map(GaussianShell::n_functions).sum();

    let pairs = hermite::ShellPairs::new(shells);
    let mut overlap = DMatrix::zeros(n, n);
    let mut kinetic = DMatrix::zeros(n, n);
    let mut nuclear_attraction = DMatrix::zeros(n, n);
    for (a, b, sp) in pairs.iter() {
        let block = sp.one_electron(&charges);
        for (ca, cb, s, t, v) in block {
            let i = offsets[a] + ca;
            let j = offsets[b] + cb;
            overlap[(i, j)] = s;
            overlap[(j, i)] = s;
            kinetic[(i, j)] = t;
            kinetic[(j, i)] = t;
            nuclear_attraction[(i, j)] = v;
            nuclear_attraction[(j, i)] = v;
        }
    }

    let mut eri = PackedEri::zeros(n);
    let all: Vec<_> = pairs.iter().collect();
    for (ab, &(a, b, p_ab)) in all.iter().enumerate() {
        for &(c, d, p_cd) in &all[..=ab] {
            let same_pair = std::ptr::eq(p_ab, p_cd);
            hermite::eri_quartet(p_ab, p_cd, |ca, cb, cc, cd, value| {
                let (i, j) = (offsets[a] + ca, offsets[b] + cb);
                let (k, l) = (offsets[c] + cc, offsets[d] + cd);
                if (a == b && i < j) || (c == d && k < l) || (same_pair && pair(i, j) < pair(k, l)) {
                    return;
                }
                eri.values[PackedEri::index(i, j, k, l)] = value;
            });
        }
    }

    Ok(IntegralSet { overlap, kinetic, nuclear_attraction, eri, nuclear_repulsion })
}
