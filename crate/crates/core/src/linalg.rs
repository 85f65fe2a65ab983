//! Dense complex linear-algebra helpers shared by the solvers.

use faer::Mat;
use nalgebra::{DMatrix, DVector, Dyn, SVD};
use num_complex::Complex64;

use crate::error::{FlowError, Result};

pub type C64 = Complex64;

/// Smallest singular value below which an element is treated as singular.
pub const SINGULAR_TOL: f64 = 1e-10;

/// Thin SVD computed by faer. nalgebra's own SVD can stop early on the
/// highly structured commutator systems used here and return orthonormal
/// factors that do not reconstruct the matrix.
///
/// faer occasionally reports no convergence on an ordinary input while its
/// adjoint converges, so the adjoint is tried next and nalgebra last.
pub fn svd(a: &DMatrix<C64>, compute_u: bool, compute_v: bool) -> SVD<C64, Dyn, Dyn> {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return a.clone().svd(compute_u, compute_v);
    }
    let f = Mat::<C64>::from_fn(m, n, |i, j| a[(i, j)]);
    let (u, s, v) = match f.thin_svd() {
        Ok(t) => (t.U().to_owned(), t.S().column_vector().to_owned(), t.V().to_owned()),
        Err(_) => match f.adjoint().to_owned().thin_svd() {
            Ok(t) => (t.V().to_owned(), t.S().column_vector().to_owned(), t.U().to_owned()),
            Err(_) => return a.clone().svd(compute_u, compute_v),
        },
    };
    SVD {
        u: compute_u.then(|| DMatrix::from_fn(m, k, |i, j| u[(i, j)])),
        v_t: compute_v.then(|| DMatrix::from_fn(k, n, |i, j| v[(j, i)].conj())),
        singular_values: DVector::from_fn(k, |i, _| s[i].re),
    }
}

pub fn singular_values(a: &DMatrix<C64>) -> DVector<f64> {
    svd(a, false, false).singular_values
}

/// Right singular vectors of `a` whose singular values fall below
/// `rel_tol * sigma_max`, together with the full (descending) spectrum.
#[derive(Debug, Clone)]
pub struct NullSpace {
    pub basis: Vec<DVector<C64>>,
    pub singular_values: Vec<f64>,
}

fn padded(a: &DMatrix<C64>) -> DMatrix<C64> {
    if a.nrows() >= a.ncols() {
        a.clone()
    } else {
        let mut p = DMatrix::zeros(a.ncols(), a.ncols());
        p.rows_mut(0, a.nrows()).copy_from(a);
        p
    }
}

/// Singular values (descending) and matching right singular vectors.
pub fn right_singular_pairs(a: &DMatrix<C64>) -> Vec<(f64, DVector<C64>)> {
    let svd = svd(&padded(a), false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let mut pairs: Vec<(f64, DVector<C64>)> = svd
        .singular_values
        .iter()
        .enumerate()
        .map(|(k, &s)| (s, v_t.row(k).adjoint()))
        .collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    pairs
}

pub fn null_space(a: &DMatrix<C64>, rel_tol: f64) -> NullSpace {
    null_space_scaled(a, rel_tol, 0.0)
}

/// Like [`null_space`], with the cut taken relative to `max(σ_max, scale)`.
/// A `scale` from the size of the operands keeps systems that are zero up
/// to rounding from being read as full rank.
pub fn null_space_scaled(a: &DMatrix<C64>, rel_tol: f64, scale: f64) -> NullSpace {
    let pairs = right_singular_pairs(a);
    let sigma_max = pairs.first().map_or(0.0, |p| p.0);
    let cut = rel_tol * sigma_max.max(scale).max(f64::MIN_POSITIVE);
    let singular_values = pairs.iter().map(|p| p.0).collect();
    let basis = pairs
        .into_iter()
        .filter(|(s, _)| *s <= cut)
        .map(|(_, v)| v)
        .collect();
    NullSpace {
        basis,
        singular_values,
    }
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn lstsq(a: &DMatrix<C64>, b: &DVector<C64>) -> DVector<C64> {
    let svd = svd(a, true, true);
    let sigma_max = svd.singular_values.max();
    let eps = 1e-13 * sigma_max.max(f64::MIN_POSITIVE);
    svd.solve(b, eps).expect("u and v_t were computed")
}

pub fn min_singular_value(a: &DMatrix<C64>) -> f64 {
    singular_values(a).min()
}

/// Inverse with a singularity check on the smallest singular value.
pub fn checked_inverse(a: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let smin = min_singular_value(a);
    if !(smin > SINGULAR_TOL) {
        return Err(FlowError::Singular(smin));
    }
    a.clone()
        .try_inverse()
        .ok_or(FlowError::Singular(smin))
}

/// Largest eigenvalue of the Hermitian part `(a + a^H) / 2`.
pub fn log_norm(a: &DMatrix<C64>) -> f64 {
    let h = (a + a.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigenvalues().max()
}

pub fn frobenius(a: &DMatrix<C64>) -> f64 {
    a.norm()
}
