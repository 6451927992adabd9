//! Molecules, conformation sets, Gaussian basis sets and orbital indexing.
//!
//! Lengths are Bohr everywhere inside the crate. XYZ files default to
//! Ångström and are converted on read and write.

mod basis;
mod orbitals;
mod xyz;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use basis::{parse_basis, primitive_norm, BasisSet, GaussianShell, ShellTemplate};
pub use orbitals::{build_orbital_index, OrbitalEntry, OrbitalIndex, ORBITAL_TYPES};
pub use xyz::{parse_xyz, write_xyz, LengthUnit, BOHR_PER_ANGSTROM};

/// Nuclear coordinates, one row per atom (or, for toy energy fields, any
/// `n x k` coordinate block).
pub type Positions = DMatrix<f64>;

/// Nuclei closer than this are treated as coincident.
pub const MIN_NUCLEAR_DISTANCE: f64 = 1e-10;

const ELEMENT_SYMBOLS: [&str; 18] =
    ["H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar"];

/// Atomic number for an element symbol (case-insensitive), Z = 1..=18.
pub fn atomic_number(symbol: &str) -> Option<u32> {
    ELEMENT_SYMBOLS.iter().position(|s| s.eq_ignore_ascii_case(symbol)).map(|i| i as u32 + 1)
}

pub fn element_symbol(z: u32) -> Option<&'static str> {
    ELEMENT_SYMBOLS.get((z as usize).checked_sub(1)?).copied()
}

/// A closed-shell molecule: nuclear charges, positions (Bohr) and total charge.
#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    atomic_numbers: Vec<u32>,
    positions: Positions,
    charge: i32,
    n_electrons: usize,
}

impl Molecule {
    pub fn new(atomic_numbers: Vec<u32>, positions: Positions, charge: i32) -> Result<Self> {
        if atomic_numbers.is_empty() {
            return Err(Error::InvalidMolecule("no atoms".into()));
        }
        if positions.nrows() != atomic_numbers.len() || positions.ncols() != 3 {
            return Err(Error::InvalidMolecule(format!(
                "positions are {}x{}, expected {}x3",
                positions.nrows(),
                positions.ncols(),
                atomic_numbers.len()
            )));
        }
        if let Some(&z) = atomic_numbers.iter().find(|&&z| element_symbol(z).is_none()) {
            return Err(Error::InvalidMolecule(format!("atomic number {z} outside 1..=18")));
        }
        let total: i64 = atomic_numbers.iter().map(|&z| z as i64).sum::<i64>() - charge as i64;
        if total < 0 || total % 2 != 0 {
            return Err(Error::InvalidMolecule(format!(
                "{total} electrons; only closed-shell (even, non-negative) counts are supported"
            )));
        }
        check_distances(&positions)?;
        Ok(Molecule { atomic_numbers, positions, charge, n_electrons: total as usize })
    }

    /// Same composition and charge at a new geometry.
    pub fn with_positions(&self, positions: Positions) -> Result<Self> {
        if positions.shape() != self.positions.shape() {
            return Err(Error::DimensionMismatch(format!(
                "positions {:?} vs template {:?}",
                positions.shape(),
                self.positions.shape()
            )));
        }
        check_distances(&positions)?;
        Ok(Molecule { positions, ..self.clone() })
    }

    pub fn atomic_numbers(&self) -> &[u32] {
        &self.atomic_numbers
    }

    pub fn positions(&self) -> &Positions {
        &self.positions
    }

    pub fn charge(&self) -> i32 {
        self.charge
    }

    pub fn n_atoms(&self) -> usize {
        self.atomic_numbers.len()
    }

    pub fn n_electrons(&self) -> usize {
        self.n_electrons
    }

    pub fn n_occ(&self) -> usize {
        self.n_electrons / 2
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        (self.positions.row(i) - self.positions.row(j)).norm()
    }
}

/// Smallest pairwise distance between rows of an `n x 3` block, `None` for
/// fewer than two atoms.
pub fn min_pair_distance(positions: &Positions) -> Option<f64> {
    let n = positions.nrows();
    let mut best: Option<f64> = None;
    for i in 0..n {
        for j in 0..i {
            let d = (positions.row(i) - positions.row(j)).norm();
            best = Some(best.map_or(d, |b| b.min(d)));
        }
    }
    best
}

fn check_distances(positions: &Positions) -> Result<()> {
    for i in 0..positions.nrows() {
        for j in 0..i {
            let distance = (positions.row(i) - positions.row(j)).norm();
            if !(distance >= MIN_NUCLEAR_DISTANCE) {
                return Err(Error::DegenerateGeometry { i: j, j: i, distance });
            }
        }
    }
    Ok(())
}

/// Frames of one molecular composition, optionally with reference energies.
#[derive(Debug, Clone)]
pub struct ConformationSet {
    pub template: Molecule,
    pub frames: Vec<Positions>,
    /// Per-frame comment lines, preserved through XYZ round trips.
    pub comments: Vec<String>,
    /// Per-frame reference energies (Hartree); NaN marks a frame that could
    /// not be labeled.
    pub labels: Option<Vec<f64>>,
}

impl ConformationSet {
    pub fn new(template: Molecule, frames: Vec<Positions>) -> Result<Self> {
        if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.shape() != template.positions().shape()) {
            return Err(Error::DimensionMismatch(format!(
                "frame {i} has shape {:?}, template {:?}",
                f.shape(),
                template.positions().shape()
            )));
        }
        let comments = vec![String::new(); frames.len()];
        Ok(ConformationSet { template, frames, comments, labels: None })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// The template molecule moved to frame `i`; fails for coincident nuclei.
    pub fn molecule(&self, i: usize) -> Result<Molecule> {
        self.template.with_positions(self.frames[i].clone())
    }

    /// A new set holding the frames at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> ConformationSet {
        ConformationSet {
            template: self.template.clone(),
            frames: indices.iter().map(|&i| self.frames[i].clone()).collect(),
            comments: indices.iter().map(|&i| self.comments[i].clone()).collect(),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }
}
