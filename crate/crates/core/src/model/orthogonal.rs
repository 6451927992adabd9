//! Orthogonalization maps `Q_raw -> Q` with hand-written reverse passes.
//!
//! ## QR
//!
//! `Q_raw = Q R` with the sign convention `R_ii > 0`, which makes the
//! factorization unique and differentiable wherever `Q_raw` has full rank.
//! The first `k` columns of `Q` depend only on the first `k` columns of
//! `Q_raw`, so with a cotangent `Q̄` supported on those columns the pullback is
//! the thin-QR formula
//!
//! ```text
//! M   = -Q̄_kᵀ Q_k
//! Ā_k = (Q̄_k + Q_k copyltu(M)) R_k⁻ᵀ,      copyltu(M) = tril(M) + tril(M, -1)ᵀ
//! ```
//!
//! and the remaining columns of `Ā` are zero.
//!
//! ## Cayley
//!
//! `K = (W - Wᵀ)/2`, `Q = (I + K)⁻¹ (I - K)`. With `M = (I + K)⁻¹`,
//! `K̄ = -Mᵀ Q̄ (Q + I)ᵀ` and `W̄ = (K̄ - K̄ᵀ)/2`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diagonal entries of `R` below this magnitude trigger the jitter retry.
pub const MIN_R_DIAGONAL: f64 = 1e-10;
pub const QR_JITTER: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orthogonalization {
    #[default]
    Qr,
    Cayley,
}

/// What the reverse pass needs from the forward pass.
#[derive(Debug, Clone)]
pub enum OrthoCache {
    Qr { r: DMatrix<f64> },
    Cayley { inv: DMatrix<f64> },
}

/// Sign-fixed QR. `None` if some `|R_ii|` is below [`MIN_R_DIAGONAL`].
fn qr_positive(a: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let qr = a.clone().qr();
    let (mut q, mut r) = (qr.q(), qr.r());
    for j in 0..r.nrows() {
        let d = r[(j, j)];
        if !(d.abs() >= MIN_R_DIAGONAL) {
            return None;
        }
        if d < 0.0 {
            q.column_mut(j).neg_mut();
            r.row_mut(j).neg_mut();
        }
    }
    Some((q, r))
}

pub fn orthogonalize(kind: Orthogonalization, a: &DMatrix<f64>) -> Result<(DMatrix<f64>, OrthoCache)> {
    assert!(a.is_square(), "orthogonalization expects a square matrix");
    match kind {
        Orthogonalization::Qr => {
            let (q, r) = match qr_positive(a) {
                Some(f) => f,
                None => {
                    let n = a.nrows();
                    qr_positive(&(a + DMatrix::identity(n, n) * QR_JITTER)).ok_or(Error::RankDeficient)?
                }
            };
            Ok((q, OrthoCache::Qr { r }))
        }
        Orthogonalization::Cayley => {
            let n = a.nrows();
            let k = 0.5 * (a - a.transpose());
            let eye = DMatrix::<f64>::identity(n, n);
            // I + K with K skew is always invertible.
            let inv = (&eye + &k).try_inverse().ok_or(Error::RankDeficient)?;
            let q = &inv * (&eye - &k);
            Ok((q, OrthoCache::Cayley { inv }))
        }
    }
}

/// Pull `q_bar` back through the map. Columns of `q_bar` at or beyond
/// `active` must be zero; only they are skipped.
pub fn orthogonalize_backward(
    q: &DMatrix<f64>,
    cache: &OrthoCache,
    q_bar: &DMatrix<f64>,
    active: usize,
) -> DMatrix<f64> {
    let n = q.nrows();
    match cache {
        OrthoCache::Qr { r } => {
            let mut a_bar = DMatrix::zeros(n, n);
            if active == 0 {
                return a_bar;
            }
            let qk = q.columns(0, active);
            let qbk = q_bar.columns(0, active);
            let m = -(qbk.transpose() * qk);
            let mut sym = m.clone();
            for i in 0..active {
                for j in (i + 1)..active {
                    sym[(i, j)] = m[(j, i)];
                }
            }
            let lhs = qbk + qk * sym;
            let rk = r.view((0, 0), (active, active)).into_owned();
            // Solve X R_kᵀ = lhs, i.e. R_k Xᵀ = lhsᵀ.
            let xt = rk.solve_upper_triangular(&lhs.transpose()).expect("R diagonal bounded away from zero");
            a_bar.columns_mut(0, active).copy_from(&xt.transpose());
            a_bar
        }
        OrthoCache::Cayley { inv } => {
            let eye = DMatrix::<f64>::identity(n, n);
            let k_bar = -(inv.transpose() * q_bar * (q + eye).transpose());
            0.5 * (&k_bar - k_bar.transpose())
        }
    }
}
