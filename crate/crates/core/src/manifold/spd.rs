//! Symmetric-matrix calculus for the SPD model, via symmetric eigensolves.

use nalgebra::DMatrix;

/// Principal square root and inverse square root of an SPD matrix.
pub fn spd_sqrt_and_inv_sqrt(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let se = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut sq = DMatrix::zeros(n, n);
    let mut isq = DMatrix::zeros(n, n);
    for k in 0..n {
        let lam = se.eigenvalues[k].max(1e-300);
        let v = se.eigenvectors.column(k);
        let outer = &v * v.transpose();
        sq += &outer * lam.sqrt();
        isq += &outer * (1.0 / lam.sqrt());
    }
    (sq, isq)
}

/// Matrix exponential of a symmetric matrix.
pub fn spd_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    let se = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let v = se.eigenvectors.column(k);
        out += &v * v.transpose() * se.eigenvalues[k].exp();
    }
    out
}

/// Matrix logarithm of an SPD matrix.
pub fn spd_log(m: &DMatrix<f64>) -> DMatrix<f64> {
    let se = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let v = se.eigenvectors.column(k);
        out += &v * v.transpose() * se.eigenvalues[k].max(1e-300).ln();
    }
    out
}

/// Orthonormal basis of symmetric n x n matrices for <U,V> = tr(UV):
/// E_ii, and (E_ij + E_ji)/sqrt(2) for i < j.
pub fn sym_basis(n: usize) -> Vec<DMatrix<f64>> {
    let mut basis = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        let mut e = DMatrix::zeros(n, n);
        e[(i, i)] = 1.0;
        basis.push(e);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        for j in (i + 1)..n {
            let mut e = DMatrix::zeros(n, n);
            e[(i, j)] = s;
            e[(j, i)] = s;
            basis.push(e);
        }
    }
    basis
}
