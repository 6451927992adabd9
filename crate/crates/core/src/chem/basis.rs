//! Contracted Gaussian basis sets.
//!
//! Text format, one block per element:
//!
//! ```text
//! # comment
//! O
//! S 3
//!   130.70932   0.15432897
//!   23.808861   0.53532814
//!   6.4436083   0.44463454
//! P 3
//!   ...
//! ****
//! ```
//!
//! The block opens with an element symbol; each shell is a `<L> <n>` header
//! (`L` is `S` or `P`) followed by `n` rows of `<exponent> <coefficient>`;
//! `****` closes the block. Coefficients refer to normalized primitives.
//! Blank lines and text after `#` or `!` are ignored. Fortran `D` exponents
//! (`1.0D-01`) are accepted.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::chem::{atomic_number, Molecule};
use crate::error::{Error, Result};

/// Normalization constant of a Cartesian primitive `x^l exp(-a r^2)`, l <= 1.
pub fn primitive_norm(exponent: f64, l: u8) -> f64 {
    let s = (2.0 * exponent / PI).powf(0.75);
    match l {
        0 => s,
        _ => s * 2.0 * exponent.sqrt(),
    }
}

/// `int x^{2l} exp(-p r^2) d^3r` for one Cartesian component.
fn same_center_overlap(p: f64, l: u8) -> f64 {
    let base = (PI / p).powf(1.5);
    match l {
        0 => base,
        _ => base / (2.0 * p),
    }
}

/// A contracted shell of an element, before placement on an atom.
///
/// `coefficients` already include the primitive normalization and are scaled
/// so every Cartesian component has unit self-overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellTemplate {
    pub angular_momentum: u8,
    pub exponents: Vec<f64>,
    pub coefficients: Vec<f64>,
}

impl ShellTemplate {
    /// Build from exponents and coefficients of normalized primitives.
    pub fn new(angular_momentum: u8, primitives: &[(f64, f64)]) -> Result<Self> {
        if angular_momentum > 1 {
            return Err(Error::parse(0, format!("angular momentum {angular_momentum} > 1")));
        }
        if primitives.is_empty() {
            return Err(Error::parse(0, "empty shell"));
        }
        if let Some(&(e, _)) = primitives.iter().find(|(e, _)| !(*e > 0.0) || !e.is_finite()) {
            return Err(Error::parse(0, format!("non-positive exponent {e}")));
        }
        let shell = ShellTemplate {
            angular_momentum,
            exponents: primitives.iter().map(|p| p.0).collect(),
            coefficients: primitives.iter().map(|&(e, c)| c * primitive_norm(e, angular_momentum)).collect(),
        };
        Ok(shell.renormalized())
    }

    pub fn n_functions(&self) -> usize {
        2 * self.angular_momentum as usize + 1
    }

    pub fn self_overlap(&self) -> f64 {
        let mut s = 0.0;
        for (a, ca) in self.exponents.iter().zip(&self.coefficients) {
            for (b, cb) in self.exponents.iter().zip(&self.coefficients) {
                s += ca * cb * same_center_overlap(a + b, self.angular_momentum);
            }
        }
        s
    }

    /// Rescale the contraction so the self-overlap is exactly one.
    pub fn renormalized(&self) -> Self {
        let scale = 1.0 / self.self_overlap().sqrt();
        ShellTemplate {
            angular_momentum: self.angular_momentum,
            exponents: self.exponents.clone(),
            coefficients: self.coefficients.iter().map(|c| c * scale).collect(),
        }
    }
}

/// A shell placed on a specific atom of a molecule.
#[derive(Debug, Clone)]
pub struct GaussianShell {
    pub center_atom: usize,
    pub center: Vector3<f64>,
    pub angular_momentum: u8,
    pub exponents: Vec<f64>,
    pub coefficients: Vec<f64>,
}

impl GaussianShell {
    pub fn n_functions(&self) -> usize {
        2 * self.angular_momentum as usize + 1
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BasisSet {
    pub element_shells: BTreeMap<u32, Vec<ShellTemplate>>,
}

impl BasisSet {
    pub fn shells_for_element(&self, z: u32) -> Result<&[ShellTemplate]> {
        self.element_shells.get(&z).map(Vec::as_slice).ok_or(Error::MissingElement(z))
    }

    /// Shells of the molecule in basis-function order: atoms in input order,
    /// shells in file order.
    pub fn place(&self, molecule: &Molecule) -> Result<Vec<GaussianShell>> {
        let mut shells = Vec::new();
        for (atom, &z) in molecule.atomic_numbers().iter().enumerate() {
            let row = molecule.positions().row(atom);
            let center = Vector3::new(row[0], row[1], row[2]);
            for t in self.shells_for_element(z)? {
                shells.push(GaussianShell {
                    center_atom: atom,
                    center,
                    angular_momentum: t.angular_momentum,
                    exponents: t.exponents.clone(),
                    coefficients: t.coefficients.clone(),
                });
            }
        }
        Ok(shells)
    }

    pub fn n_functions(&self, molecule: &Molecule) -> Result<usize> {
        let mut n = 0;
        for &z in molecule.atomic_numbers() {
            n += self.shells_for_element(z)?.iter().map(ShellTemplate::n_functions).sum::<usize>();
        }
        Ok(n)
    }
}

fn strip_comment(line: &str) -> &str {
    let end = line.find(['#', '!']).unwrap_or(line.len());
    line[..end].trim()
}

fn parse_number(token: &str, line: usize) -> Result<f64> {
    token.replace(['D', 'd'], "e").parse().map_err(|_| Error::parse(line, format!("bad number `{token}`")))
}

/// Parse a basis file (see the module documentation for the grammar).
pub fn parse_basis(text: &str) -> Result<BasisSet> {
    let lines: Vec<(usize, &str)> =
        text.lines().enumerate().map(|(i, l)| (i + 1, strip_comment(l))).filter(|(_, l)| !l.is_empty()).collect();

    let mut basis = BasisSet::default();
    let mut i = 0;
    while i < lines.len() {
        let (line_no, symbol) = lines[i];
        let z =
            atomic_number(symbol).ok_or_else(|| Error::UnknownElement { line: line_no, symbol: symbol.to_string() })?;
        i += 1;
        let mut shells = Vec::new();
        loop {
            let &(line_no, header) =
                lines.get(i).ok_or_else(|| Error::parse(line_no, format!("block for {symbol} not closed by ****")))?;
            i += 1;
            if header == "****" {
                break;
            }
            let fields: Vec<&str> = header.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::parse(line_no, format!("expected `<L> <n>`, got `{header}`")));
            }
            let l = match fields[0].to_ascii_uppercase().as_str() {
                "S" => 0,
                "P" => 1,
                other => {
                    return Err(Error::parse(
                        line_no,
                        format!("unknown angular-momentum label `{other}` (only S and P)"),
                    ))
                }
            };
            let n: usize =
                fields[1].parse().map_err(|_| Error::parse(line_no, format!("bad primitive count `{}`", fields[1])))?;
            if n == 0 {
                return Err(Error::parse(line_no, "empty shell"));
            }
            let mut prims = Vec::with_capacity(n);
            for _ in 0..n {
                let &(row_no, row) = lines.get(i).ok_or_else(|| Error::parse(line_no, "shell ended early"))?;
                i += 1;
                let f: Vec<&str> = row.split_whitespace().collect();
                if f.len() != 2 {
                    return Err(Error::parse(row_no, format!("expected `<exponent> <coefficient>`, got `{row}`")));
                }
                let e = parse_number(f[0], row_no)?;
                let c = parse_number(f[1], row_no)?;
                if !(e > 0.0) {
                    return Err(Error::parse(row_no, format!("non-positive exponent {e}")));
                }
                prims.push((e, c));
            }
            shells.push(ShellTemplate::new(l, &prims).map_err(|e| match e {
                Error::Parse { message, .. } => Error::parse(line_no, message),
                other => other,
            })?);
        }
        basis.element_shells.insert(z, shells);
    }
    Ok(basis)
}
