//! Small dense linear-algebra helpers shared by the filter and stability code.

use nalgebra::{DMatrix, DVector};

/// Default threshold (relative to the largest singular value) below which a
/// matrix is treated as singular and inverted with the pseudo-inverse.
pub const SINGULAR_TOL: f64 = 1e-10;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    a.clone().svd(false, false).singular_values
}

/// True iff the smallest singular value is below `tol` times the largest one
/// (a zero matrix is always singular).
pub fn is_effectively_singular(a: &DMatrix<f64>, tol: f64) -> bool {
    if a.nrows() == 0 {
        return true;
    }
    let sv = singular_values(a);
    let smax = sv.max();
    let smin = sv.min();
    smax == 0.0 || !smin.is_finite() || smin < tol * smax
}

/// Inverse of `a`, falling back to the pseudo-inverse when `a` is effectively
/// singular. The flag reports whether the fallback was taken.
pub fn inverse_or_pinv(a: &DMatrix<f64>, tol: f64) -> (DMatrix<f64>, bool) {
    if !is_effectively_singular(a, tol) {
        if let Some(inv) = a.clone().try_inverse() {
            return (inv, false);
        }
    }
    (pinv(a, tol), true)
}

pub fn pinv(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let cutoff = tol * svd.singular_values.max();
    match svd.pseudo_inverse(cutoff.max(f64::MIN_POSITIVE)) {
        Ok(p) => p,
        Err(_) => DMatrix::zeros(a.ncols(), a.nrows()),
    }
}

/// Inverse of a symmetric positive semi-definite matrix, with the same
/// pseudo-inverse fallback as [`inverse_or_pinv`]. The result is symmetrized.
pub fn sym_inverse(a: &DMatrix<f64>, tol: f64) -> (DMatrix<f64>, bool) {
    let (inv, flagged) = inverse_or_pinv(a, tol);
    (symmetrize(&inv), flagged)
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    symmetrize(a).symmetric_eigenvalues().min()
}

pub fn max_eigenvalue(a: &DMatrix<f64>) -> f64 {
    symmetrize(a).symmetric_eigenvalues().max()
}

/// `a ⪰ 0` up to `tol` on the smallest eigenvalue.
pub fn is_psd(a: &DMatrix<f64>, tol: f64) -> bool {
    min_eigenvalue(a) >= -tol
}

pub fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    a.is_square() && (a - a.transpose()).amax() <= tol
}

/// Principal square root of a symmetric PSD matrix (negative eigenvalues from
/// round-off are clipped to zero).
pub fn psd_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = symmetrize(a).symmetric_eigen();
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

pub fn all_finite(a: &DMatrix<f64>) -> bool {
    a.iter().all(|v| v.is_finite())
}

pub fn vec_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}
