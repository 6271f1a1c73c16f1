//! Minimum-norm least squares through a truncated SVD.

use nalgebra::{DMatrix, DVector, Dyn, SVD};

const RECONSTRUCTION_TOL: f64 = 1e-10;

/// Solves `min ‖A x − b‖₂` returning the minimum-norm minimiser.
///
/// Columns are scaled to unit norm before the decomposition; singular values
/// below `rel_tol · σ_max` are treated as zero. All-zero columns get a zero
/// coefficient.
pub fn min_norm_lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    assert_eq!(rows, b.nrows(), "row mismatch in least squares");
    let norms: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    let active: Vec<usize> = (0..cols).filter(|&j| norms[j] > 0.0).collect();
    let mut x = DMatrix::zeros(cols, b.ncols());
    if active.is_empty() || rows == 0 {
        return x;
    }
    let mut scaled = DMatrix::zeros(rows, active.len());
    for (k, &j) in active.iter().enumerate() {
        scaled.set_column(k, &(a.column(j) / norms[j]));
    }
    let y = match thin_svd(&scaled) {
        Some(svd) => {
            let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
            let cutoff = (rel_tol * smax).max(f64::MIN_POSITIVE);
            svd.solve(b, cutoff).expect("SVD computed with both factors")
        }
        None => normal_eigen_solve(&scaled, b, rel_tol),
    };
    for (k, &j) in active.iter().enumerate() {
        for c in 0..b.ncols() {
            x[(j, c)] = y[(k, c)] / norms[j];
        }
    }
    x
}

type Svd = SVD<f64, Dyn, Dyn>;

/// `U Σ Vᵀ` of `m`, accepted only if it reconstructs `m`.
///
/// The bidiagonal SVD can return a wrong factorisation on exactly
/// rank-deficient input, so a failed check retries on the triangular factor
/// of a QR decomposition.
fn thin_svd(m: &DMatrix<f64>) -> Option<Svd> {
    let tol = RECONSTRUCTION_TOL * m.norm().max(f64::MIN_POSITIVE);
    let accept = |m: &DMatrix<f64>, svd: Svd| -> Option<Svd> {
        let rebuilt = svd.clone().recompose().ok()?;
        ((rebuilt - m).norm() <= tol).then_some(svd)
    };
    if let Some(svd) = accept(m, m.clone().svd(true, true)) {
        return Some(svd);
    }
    let svd = if m.nrows() >= m.ncols() {
        let qr = m.clone().qr();
        let (q, r) = (qr.q(), qr.r());
        let inner = accept(&r, r.clone().svd(true, true))?;
        SVD {
            u: inner.u.map(|u| q * u),
            ..inner
        }
    } else {
        let qr = m.transpose().qr();
        let (q, r) = (qr.q(), qr.r().transpose());
        let inner = accept(&r, r.clone().svd(true, true))?;
        SVD {
            v_t: inner.v_t.map(|v_t| v_t * q.transpose()),
            ..inner
        }
    };
    Some(svd)
}

/// Pseudo-inverse solve through the eigenpairs of `mᵀm`; square-root
/// accuracy, used only when no SVD passes its check.
fn normal_eigen_solve(m: &DMatrix<f64>, b: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let eig = (m.transpose() * m).symmetric_eigen();
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let cutoff = (rel_tol * rel_tol * lmax).max(f64::MIN_POSITIVE);
    let mut proj = eig.eigenvectors.transpose() * (m.transpose() * b);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        let inv = if l > cutoff { 1.0 / l } else { 0.0 };
        proj.row_mut(i).scale_mut(inv);
    }
    &eig.eigenvectors * proj
}

/// Single right-hand-side convenience wrapper.
pub fn min_norm_lstsq_vec(a: &DMatrix<f64>, b: &[f64], rel_tol: f64) -> Vec<f64> {
    let rhs = DMatrix::from_column_slice(b.len(), 1, b);
    let x = min_norm_lstsq(a, &rhs, rel_tol);
    x.column(0).iter().copied().collect()
}

/// Row-major matrix product `A x` for a dense column vector.
pub fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (a * DVector::from_column_slice(x)).iter().copied().collect()
}
