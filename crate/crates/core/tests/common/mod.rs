#![allow(dead_code)]

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use srdft::chem::{atomic_number, parse_basis, BasisSet, Molecule, Positions};

pub fn sto3g() -> &'static BasisSet {
    static B: OnceLock<BasisSet> = OnceLock::new();
    B.get_or_init(|| parse_basis(include_str!("../../data/sto-3g.basis")).unwrap())
}

pub fn h2(d: f64) -> Molecule {
    Molecule::new(vec![1, 1], Positions::from_row_slice(2, 3, &[0., 0., 0., 0., 0., d]), 0).unwrap()
}

pub fn heh_plus() -> Molecule {
    Molecule::new(vec![2, 1], Positions::from_row_slice(2, 3, &[0., 0., 0., 0., 0., 1.4632]), 1).unwrap()
}

pub fn water() -> Molecule {
    let p = Positions::from_row_slice(3, 3, &[0., 0., 0., 0., 1.4305, 1.1083, 0., -1.4305, 1.1083]);
    Molecule::new(vec![8, 1, 1], p, 0).unwrap()
}

pub struct Golden {
    pub molecule: Molecule,
    pub energy: f64,
    pub nuclear_repulsion: f64,
    pub orbital_energies: Vec<f64>,
    pub overlap: DMatrix<f64>,
    pub kinetic: DMatrix<f64>,
    pub nuclear_attraction: DMatrix<f64>,
    pub eri: Vec<f64>,
}

fn matrix(v: &serde_json::Value) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = serde_json::from_value(v.clone()).unwrap();
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

/// Reference RHF/STO-3G data produced once by an external program.
pub fn golden(name: &str) -> Golden {
    let doc: serde_json::Value = serde_json::from_str(include_str!("../golden/rhf_sto3g.json")).unwrap();
    let s = &doc["systems"][name];
    let symbols: Vec<String> = serde_json::from_value(s["symbols"].clone()).unwrap();
    let z = symbols.iter().map(|x| atomic_number(x).unwrap()).collect();
    let pos = matrix(&s["positions_bohr"]);
    Golden {
        molecule: Molecule::new(z, pos, s["charge"].as_i64().unwrap() as i32).unwrap(),
        energy: s["energy"].as_f64().unwrap(),
        nuclear_repulsion: s["nuclear_repulsion"].as_f64().unwrap(),
        orbital_energies: serde_json::from_value(s["orbital_energies"].clone()).unwrap(),
        overlap: matrix(&s["overlap"]),
        kinetic: matrix(&s["kinetic"]),
        nuclear_attraction: matrix(&s["nuclear_attraction"]),
        eri: serde_json::from_value(s["eri"].clone()).unwrap(),
    }
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Haar-ish random orthogonal matrix via QR with sign fixing.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, n, n).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Apply `R -> R U^T + t` to every row.
pub fn rigid_motion(p: &Positions, u: &DMatrix<f64>, t: [f64; 3]) -> Positions {
    let mut out = p * u.transpose();
    for mut row in out.row_iter_mut() {
        for k in 0..3 {
            row[k] += t[k];
        }
    }
    out
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}
