use crate::chem::{BasisSet, Molecule};
use crate::error::{Error, Result};

/// Fixed orbital-type table; a token is an index into it.
pub const ORBITAL_TYPES: [&str; 13] =
    ["1s", "2s", "2px", "2py", "2pz", "3s", "3px", "3py", "3pz", "4s", "4px", "4py", "4pz"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrbitalEntry {
    pub atom: usize,
    pub token: usize,
}

/// One entry per basis function, in basis-function order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitalIndex {
    pub entries: Vec<OrbitalEntry>,
}

impl OrbitalIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn label(&self, i: usize) -> &'static str {
        ORBITAL_TYPES[self.entries[i].token]
    }
}

fn token(name: &str) -> Result<usize> {
    ORBITAL_TYPES.iter().position(|t| *t == name).ok_or_else(|| Error::UnknownOrbital(name.to_string()))
}

/// Atoms in input order, shells in basis-file order, p components as x, y, z.
/// The principal quantum number of a shell is `l + 1` plus the number of
/// earlier shells of the same `l` on that element.
pub fn build_orbital_index(molecule: &Molecule, basis: &BasisSet) -> Result<OrbitalIndex> {
    let mut entries = Vec::new();
    for (atom, &z) in molecule.atomic_numbers().iter().enumerate() {
        let mut seen = [0usize; 2];
        for shell in basis.shells_for_element(z)? {
            let l = shell.angular_momentum as usize;
            let n = seen[l] + l + 1;
            seen[l] += 1;
            if l == 0 {
                entries.push(OrbitalEntry { atom, token: token(&format!("{n}s"))? });
            } else {
                for c in ["x", "y", "z"] {
                    entries.push(OrbitalEntry { atom, token: token(&format!("{n}p{c}"))? });
                }
            }
        }
    }
    Ok(OrbitalIndex { entries })
}
