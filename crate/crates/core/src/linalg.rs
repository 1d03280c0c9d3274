//! Small dense symmetric linear algebra on top of `nalgebra`.
//!
//! Eigen-pairs are always returned in descending eigenvalue order with a
//! fixed sign convention, so every downstream quantity is reproducible.

use nalgebra::{DMatrix, DVector};

/// Components with magnitude at or below this are treated as zero when
/// choosing an eigenvector's sign.
const SIGN_EPS: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SymEigen {
    /// Eigenvalues, descending.
    pub values: DVector<f64>,
    /// Unit eigenvectors as columns, matching `values`.
    pub vectors: DMatrix<f64>,
}

/// Flips each column so its first nonzero component is positive.
pub fn fix_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        if let Some(first) = col.iter().copied().find(|v| v.abs() > SIGN_EPS) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
}

fn descending_order(values: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Full eigendecomposition of a symmetric matrix (the input is symmetrized first).
pub fn sym_eigen(m: &DMatrix<f64>) -> SymEigen {
    let n = m.nrows();
    if n == 0 {
        return SymEigen { values: DVector::zeros(0), vectors: DMatrix::zeros(0, 0) };
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let order = descending_order(&eig.eigenvalues);
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    fix_signs(&mut vectors);
    SymEigen { values, vectors }
}

/// Eigenvalues only, descending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let sym = (m + m.transpose()) * 0.5;
    let mut vals: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}

pub fn is_identity(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square()
        && m.iter()
            .enumerate()
            .all(|(idx, v)| {
                let (r, c) = (idx % m.nrows(), idx / m.nrows());
                let target = if r == c { 1.0 } else { 0.0 };
                (v - target).abs() <= tol
            })
}

/// Inverse square root of a symmetric positive-definite matrix.
pub fn inv_sqrt_spd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = sym_eigen(m);
    if eig.values.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let scale = DMatrix::from_diagonal(&eig.values.map(|v| v.sqrt().recip()));
    Some(&eig.vectors * scale * eig.vectors.transpose())
}

/// Moore–Penrose pseudo-inverse of a symmetric matrix; eigenvalues whose
/// magnitude falls below `rel_cutoff · max|λ|` are dropped.
pub fn pinv_sym(m: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    let eig = sym_eigen(m);
    let max = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cutoff = rel_cutoff * max;
    let inv = eig.values.map(|v| if v.abs() > cutoff && v != 0.0 { v.recip() } else { 0.0 });
    &eig.vectors * DMatrix::from_diagonal(&inv) * eig.vectors.transpose()
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}
