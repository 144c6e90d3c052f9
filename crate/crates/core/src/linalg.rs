//! Small dense helpers shared by the information, rank and optimizer code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Singular values at or below this fraction of the largest one do not count toward rank.
pub const RANK_REL_TOL: f64 = 1e-9;

/// Pivot ratio below which an equilibrated information matrix is treated as singular.
pub const SINGULAR_REL_TOL: f64 = 1e-12;

/// Numerical rank from singular values with a relative threshold.
pub fn numeric_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max <= f64::MIN_POSITIVE {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_REL_TOL * max).count()
}

/// Rows spanning the orthogonal complement of the row space of `m` inside R^ncols.
pub fn row_space_complement(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    // pad to at least n rows so the SVD returns a full right basis
    let rows = m.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| max <= f64::MIN_POSITIVE || svd.singular_values[k] <= RANK_REL_TOL * max)
        .collect();
    let mut out = DMatrix::zeros(keep.len(), n);
    for (r, &k) in keep.iter().enumerate() {
        out.row_mut(r).copy_from(&v_t.row(k));
    }
    out
}

/// Stacks matrices with equal column counts on top of each other.
pub fn vstack(blocks: &[&DMatrix<f64>], ncols: usize) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, ncols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), ncols)).copy_from(*b);
        r += b.nrows();
    }
    out
}

/// Log-determinant of a symmetric positive semidefinite matrix, `-inf` when singular.
///
/// The matrix is equilibrated by its diagonal before a fully pivoted LU factorization, so
/// the singularity test is insensitive to the scaling of individual parameters.
pub fn log_det_psd(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let diag: Vec<f64> = (0..n).map(|k| m[(k, k)]).collect();
    if diag.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return f64::NEG_INFINITY;
    }
    let inv_sqrt: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| m[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    let lu = scaled.full_piv_lu();
    let u = lu.u();
    let mut max_pivot = 0.0_f64;
    let mut min_pivot = f64::INFINITY;
    let mut sum = 0.0;
    for k in 0..n {
        let v = u[(k, k)].abs();
        max_pivot = max_pivot.max(v);
        min_pivot = min_pivot.min(v);
        sum += v.ln();
    }
    if !(min_pivot > SINGULAR_REL_TOL * max_pivot) {
        return f64::NEG_INFINITY;
    }
    // a PSD matrix with a negative determinant is singular up to roundoff
    if !(lu.determinant() > 0.0) {
        return f64::NEG_INFINITY;
    }
    sum + diag.iter().map(|d| d.ln()).sum::<f64>()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Symmetric part `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Solves `Σ_t coeff[t] * node_s^t = values[s]` for the coefficients.
pub fn solve_vandermonde(nodes: &[f64], values: &[f64]) -> Option<Vec<f64>> {
    let k = nodes.len();
    debug_assert_eq!(k, values.len());
    if k == 0 {
        return Some(Vec::new());
    }
    let a = DMatrix::from_fn(k, k, |s, t| nodes[s].powi(t as i32));
    let rhs = DVector::from_column_slice(values);
    a.lu().solve(&rhs).map(|v| v.iter().cloned().collect())
}

/// Frobenius norm, used for relative comparisons.
pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}
