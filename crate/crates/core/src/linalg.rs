//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Smallest overlap eigenvalue accepted before the basis is called linearly
/// dependent.
pub const MIN_OVERLAP_EIGENVALUE: f64 = 1e-10;

/// Symmetric eigendecomposition with eigenvalues ascending; ties keep the
/// solver's output order.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Symmetric orthogonalizer `S^{-1/2} = U diag(lambda^{-1/2}) U^T`.
pub fn inverse_sqrt(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (values, vectors) = sym_eigen_sorted(s);
    let min = values[0];
    if !(min >= MIN_OVERLAP_EIGENVALUE) {
        return Err(Error::LinearDependence { min_eigenvalue: min });
    }
    let scaled = DMatrix::from_fn(vectors.nrows(), vectors.ncols(), |i, j| vectors[(i, j)] / values[j].sqrt());
    let mut x = &scaled * vectors.transpose();
    symmetrize(&mut x);
    Ok(x)
}

/// Solve `F C = S C eps` given `X = S^{-1/2}`; eigenvalues ascending.
pub fn generalized_eigen(f: &DMatrix<f64>, x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let mut fp = x * f * x;
    symmetrize(&mut fp);
    let (eps, cp) = sym_eigen_sorted(&fp);
    (eps, x * cp)
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, &v| a.max(v.abs()))
}

/// `max |C^T S C - I|`.
pub fn orthonormality_error(c: &DMatrix<f64>, s: &DMatrix<f64>) -> f64 {
    let g = c.transpose() * s * c;
    let n = g.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}
