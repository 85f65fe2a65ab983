//! Finite-dimensional algebras: the full matrix algebra and block
//! upper-triangular nest algebras, with norms and commutant computation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::linalg::{null_space, C64};

/// Dense complex square matrix. Every state, observable and cocycle value
/// in the crate is one of these.
pub type Element = DMatrix<C64>;

/// Default membership tolerance, relative to the Frobenius norm of the element.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-10;

pub fn identity(dim: usize) -> Element {
    Element::identity(dim, dim)
}

/// Matrix unit `E_ij` (zero-based).
pub fn matrix_unit(dim: usize, i: usize, j: usize) -> Element {
    let mut e = Element::zeros(dim, dim);
    e[(i, j)] = C64::new(1.0, 0.0);
    e
}

pub fn check_element(a: &Element) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(FlowError::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if a.nrows() == 0 {
        return Err(FlowError::InvalidArgument("element of dimension 0".into()));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(FlowError::NonFinite);
    }
    Ok(())
}

pub(crate) fn check_dim(a: &Element, dim: usize) -> Result<()> {
    if a.nrows() != dim || a.ncols() != dim {
        return Err(FlowError::DimensionMismatch {
            expected: dim,
            found: a.nrows(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Spectral,
    Frobenius,
}

pub fn norm(a: &Element, kind: NormKind) -> f64 {
    match kind {
        NormKind::Frobenius => a.norm(),
        NormKind::Spectral => {
            if a.is_empty() {
                0.0
            } else {
                crate::linalg::singular_values(a).max()
            }
        }
    }
}

/// Block upper-triangular algebra induced by a finite nest of coordinate
/// subspaces `span(e_0 .. e_{d_m - 1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NestLiteral", into = "NestLiteral")]
pub struct NestAlgebra {
    dim: usize,
    nest_dims: Vec<usize>,
    membership_tol: f64,
    block: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NestLiteral {
    dim: usize,
    nest_dims: Vec<usize>,
    #[serde(default = "default_tol")]
    membership_tol: f64,
}

fn default_tol() -> f64 {
    DEFAULT_MEMBERSHIP_TOL
}

impl TryFrom<NestLiteral> for NestAlgebra {
    type Error = FlowError;
    fn try_from(lit: NestLiteral) -> Result<Self> {
        Ok(NestAlgebra::new(lit.dim, &lit.nest_dims)?.with_membership_tol(lit.membership_tol))
    }
}

impl From<NestAlgebra> for NestLiteral {
    fn from(a: NestAlgebra) -> Self {
        NestLiteral {
            dim: a.dim,
            nest_dims: a.nest_dims,
            membership_tol: a.membership_tol,
        }
    }
}

impl NestAlgebra {
    pub fn new(dim: usize, nest_dims: &[usize]) -> Result<Self> {
        let invalid = |reason| FlowError::InvalidNest {
            dim,
            dims: nest_dims.to_vec(),
            reason,
        };
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if nest_dims.first() != Some(&0) || nest_dims.last() != Some(&dim) {
            return Err(invalid("nest must start at 0 and end at the dimension"));
        }
        if nest_dims.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("nest dimensions must be strictly increasing"));
        }
        let mut block = vec![0; dim];
        for (p, w) in nest_dims.windows(2).enumerate() {
            for b in &mut block[w[0]..w[1]] {
                *b = p;
            }
        }
        Ok(NestAlgebra {
            dim,
            nest_dims: nest_dims.to_vec(),
            membership_tol: DEFAULT_MEMBERSHIP_TOL,
            block,
        })
    }

    /// Trivial nest `{0, H}`: the full matrix algebra.
    pub fn full(dim: usize) -> Result<Self> {
        Self::new(dim, &[0, dim])
    }

    /// Maximal nest: upper-triangular matrices.
    pub fn upper_triangular(dim: usize) -> Result<Self> {
        Self::new(dim, &(0..=dim).collect::<Vec<_>>())
    }

    pub fn with_membership_tol(mut self, tol: f64) -> Self {
        self.membership_tol = tol.max(0.0);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nest_dims(&self) -> &[usize] {
        &self.nest_dims
    }

    pub fn membership_tol(&self) -> f64 {
        self.membership_tol
    }

    pub fn in_pattern(&self, i: usize, j: usize) -> bool {
        self.block[i] <= self.block[j]
    }

    /// Positions `(i, j)` of the matrix units spanning the algebra,
    /// in column-major order.
    pub fn pattern(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for j in 0..self.dim {
            for i in 0..self.dim {
                if self.in_pattern(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Dimension of the algebra as a complex linear space.
    pub fn linear_dim(&self) -> usize {
        self.pattern().len()
    }

    pub fn basis(&self) -> Vec<Element> {
        self.pattern()
            .into_iter()
            .map(|(i, j)| matrix_unit(self.dim, i, j))
            .collect()
    }

    /// Orthogonal projection `Q_m` onto the first `d_m` coordinates, for
    /// every nest subspace.
    pub fn nest_projections(&self) -> Vec<Element> {
        self.nest_dims
            .iter()
            .map(|&d| {
                let mut q = Element::zeros(self.dim, self.dim);
                for k in 0..d {
                    q[(k, k)] = C64::new(1.0, 0.0);
                }
                q
            })
            .collect()
    }

    /// True iff every entry outside the block pattern has modulus `<= tol`.
    pub fn contains(&self, a: &Element, tol: f64) -> Result<bool> {
        check_dim(a, self.dim)?;
        for j in 0..self.dim {
            for i in 0..self.dim {
                if !self.in_pattern(i, j) && a[(i, j)].norm() > tol {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Membership with the configured tolerance scaled by `max(1, ||a||_F)`.
    pub fn contains_default(&self, a: &Element) -> Result<bool> {
        self.contains(a, self.membership_tol * a.norm().max(1.0))
    }

    pub fn project(&self, a: &Element) -> Result<Element> {
        check_dim(a, self.dim)?;
        let mut out = a.clone();
        for j in 0..self.dim {
            for i in 0..self.dim {
                if !self.in_pattern(i, j) {
                    out[(i, j)] = C64::new(0.0, 0.0);
                }
            }
        }
        Ok(out)
    }

    /// Coefficients of `a` on the pattern basis (entries outside are dropped).
    pub fn coordinates(&self, a: &Element) -> DVector<C64> {
        DVector::from_iterator(
            self.linear_dim(),
            self.pattern().into_iter().map(|(i, j)| a[(i, j)]),
        )
    }

    pub fn from_coordinates(&self, v: &DVector<C64>) -> Element {
        let mut a = Element::zeros(self.dim, self.dim);
        for ((i, j), z) in self.pattern().into_iter().zip(v.iter()) {
            a[(i, j)] = *z;
        }
        a
    }

    /// Orthonormal (Frobenius) basis of the centre `{X in A : XA = AX for all A}`.
    pub fn commutant_basis(&self) -> Vec<Element> {
        let basis = self.basis();
        let n2 = self.dim * self.dim;
        let m = basis.len();
        let mut system = DMatrix::<C64>::zeros(m * n2, m);
        for (c, x) in basis.iter().enumerate() {
            for (b, e) in basis.iter().enumerate() {
                let comm = x * e - e * x;
                system
                    .view_mut((b * n2, c), (n2, 1))
                    .copy_from_slice(comm.as_slice());
            }
        }
        null_space(&system, 1e-10)
            .basis
            .iter()
            .map(|v| self.from_coordinates(v))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn nest_validation() {
        assert!(NestAlgebra::new(2, &[0, 2]).is_ok());
        assert!(NestAlgebra::new(3, &[0, 2, 1, 3]).is_err());
        assert!(NestAlgebra::new(3, &[1, 3]).is_err());
        assert!(NestAlgebra::new(3, &[0, 2]).is_err());
        assert!(NestAlgebra::new(3, &[0, 1, 1, 3]).is_err());
        assert!(NestAlgebra::new(0, &[0]).is_err());
    }

    #[test]
    fn linear_dimensions() {
        assert_eq!(NestAlgebra::new(2, &[0, 2]).unwrap().linear_dim(), 4);
        assert_eq!(NestAlgebra::new(2, &[0, 1, 2]).unwrap().linear_dim(), 3);
        assert_eq!(NestAlgebra::new(4, &[0, 2, 4]).unwrap().linear_dim(), 12);
    }

    #[test]
    fn pattern_matches_nest_invariance() {
        let alg = NestAlgebra::new(5, &[0, 1, 3, 5]).unwrap();
        let qs = alg.nest_projections();
        for i in 0..5 {
            for j in 0..5 {
                let e = matrix_unit(5, i, j);
                let invariant = qs.iter().all(|q| (q * &e * q - &e * q).norm() == 0.0);
                assert_eq!(invariant, alg.in_pattern(i, j), "({i},{j})");
            }
        }
    }

    #[test]
    fn project_masks_lower_entries() {
        let alg = NestAlgebra::upper_triangular(2).unwrap();
        let a = Element::from_row_slice(2, 2, &[c(1.0), c(2.0), c(3.0), c(4.0)]);
        let p = alg.project(&a).unwrap();
        assert_eq!(p, Element::from_row_slice(2, 2, &[c(1.0), c(2.0), c(0.0), c(4.0)]));
        assert_eq!(alg.project(&p).unwrap(), p);
    }

    #[test]
    fn membership() {
        let alg = NestAlgebra::upper_triangular(2).unwrap();
        assert!(alg.contains(&identity(2), 0.0).unwrap());
        assert!(!alg.contains(&matrix_unit(2, 1, 0), 1e-12).unwrap());
        assert!(alg.contains(&matrix_unit(3, 1, 0), 0.0).is_err());
    }

    #[test]
    fn commutants_are_scalar() {
        for alg in [
            NestAlgebra::upper_triangular(2).unwrap(),
            NestAlgebra::full(3).unwrap(),
            NestAlgebra::new(4, &[0, 2, 4]).unwrap(),
        ] {
            let comm = alg.commutant_basis();
            assert_eq!(comm.len(), 1);
            let x = &comm[0];
            let lambda = x[(0, 0)];
            assert!((x - identity(alg.dim()) * lambda).norm() < 1e-10);
        }
    }

    #[test]
    fn norm_examples() {
        assert!((norm(&identity(3), NormKind::Frobenius) - 3f64.sqrt()).abs() < 1e-15);
        let d = Element::from_row_slice(2, 2, &[c(3.0), c(0.0), c(0.0), C64::new(0.0, -4.0)]);
        assert!((norm(&d, NormKind::Spectral) - 4.0).abs() < 1e-14);
        let r = matrix_unit(2, 0, 1) * c(2.0);
        assert!((norm(&r, NormKind::Spectral) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn check_element_rejects_nan() {
        let mut a = identity(2);
        a[(0, 1)] = C64::new(f64::NAN, 0.0);
        assert_eq!(check_element(&a), Err(FlowError::NonFinite));
    }
}
