//! Linear maps on elements, stored as `n^2 x n^2` matrices acting on
//! column-major vectorizations: `vec(X A Y) = (Y^T (x) X) vec(A)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{check_dim, matrix_unit, Element};
use crate::error::{FlowError, Result};
use crate::linalg::{self, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct SuperOp {
    dim: usize,
    matrix: DMatrix<C64>,
}

fn kron(a: &Element, b: &Element) -> DMatrix<C64> {
    a.kronecker(b)
}

pub(crate) fn vec_of(a: &Element) -> DVector<C64> {
    DVector::from_column_slice(a.as_slice())
}

pub(crate) fn unvec(v: &DVector<C64>, dim: usize) -> Element {
    Element::from_column_slice(dim, dim, v.as_slice())
}

impl SuperOp {
    pub fn from_matrix(dim: usize, matrix: DMatrix<C64>) -> Result<Self> {
        let n2 = dim * dim;
        if matrix.nrows() != n2 || matrix.ncols() != n2 {
            return Err(FlowError::DimensionMismatch {
                expected: n2,
                found: matrix.nrows(),
            });
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(FlowError::NonFinite);
        }
        Ok(SuperOp { dim, matrix })
    }

    pub fn identity(dim: usize) -> Self {
        SuperOp {
            dim,
            matrix: DMatrix::identity(dim * dim, dim * dim),
        }
    }

    pub fn zero(dim: usize) -> Self {
        SuperOp {
            dim,
            matrix: DMatrix::zeros(dim * dim, dim * dim),
        }
    }

    /// Superoperator of an arbitrary linear map, assembled column by column
    /// from its action on the matrix units.
    pub fn from_linear_map<F>(dim: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&Element) -> Result<Element>,
    {
        let n2 = dim * dim;
        let mut matrix = DMatrix::zeros(n2, n2);
        for j in 0..dim {
            for i in 0..dim {
                let image = f(&matrix_unit(dim, i, j))?;
                check_dim(&image, dim)?;
                matrix.column_mut(i + j * dim).copy_from_slice(image.as_slice());
            }
        }
        Self::from_matrix(dim, matrix)
    }

    /// `A -> X A Y`.
    pub fn left_right(x: &Element, y: &Element) -> Self {
        SuperOp {
            dim: x.nrows(),
            matrix: kron(&y.transpose(), x),
        }
    }

    /// `A -> X A X^{-1}` given both factors.
    pub fn conjugation(x: &Element, x_inv: &Element) -> Self {
        Self::left_right(x, x_inv)
    }

    /// `A -> X A - A X`.
    pub fn commutator(x: &Element) -> Self {
        let n = x.nrows();
        let id = Element::identity(n, n);
        SuperOp {
            dim: n,
            matrix: kron(&id, x) - kron(&x.transpose(), &id),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn apply(&self, a: &Element) -> Result<Element> {
        check_dim(a, self.dim)?;
        Ok(unvec(&(&self.matrix * vec_of(a)), self.dim))
    }

    /// Action of the Hilbert-Schmidt adjoint map.
    pub fn apply_adjoint(&self, a: &Element) -> Result<Element> {
        check_dim(a, self.dim)?;
        Ok(unvec(&(self.matrix.adjoint() * vec_of(a)), self.dim))
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &SuperOp) -> Result<SuperOp> {
        if self.dim != other.dim {
            return Err(FlowError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(SuperOp {
            dim: self.dim,
            matrix: &self.matrix * &other.matrix,
        })
    }

    pub fn add(&self, other: &SuperOp) -> Result<SuperOp> {
        self.combine(other, C64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &SuperOp) -> Result<SuperOp> {
        self.combine(other, C64::new(-1.0, 0.0))
    }

    fn combine(&self, other: &SuperOp, sign: C64) -> Result<SuperOp> {
        if self.dim != other.dim {
            return Err(FlowError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(SuperOp {
            dim: self.dim,
            matrix: &self.matrix + &other.matrix * sign,
        })
    }

    pub fn scale(&self, z: C64) -> SuperOp {
        SuperOp {
            dim: self.dim,
            matrix: &self.matrix * z,
        }
    }

    /// Frobenius norm of the `n^2 x n^2` matrix (not an operator norm).
    pub fn matrix_frobenius(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn norm(&self, kind: SuperOpNormKind) -> SuperOpNorm {
        superop_norm(self, kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuperOpNormKind {
    /// Exact operator norm induced by the Frobenius norm on elements.
    FrobeniusInduced,
    /// Lower bound on the operator norm induced by the spectral norm,
    /// from random trial elements refined by local ascent.
    SpectralSampled { trials: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperOpNorm {
    pub value: f64,
    /// Number of trial elements evaluated (zero for exact norms).
    pub trials: usize,
}

const SAMPLER_SEED: u64 = 0x5eed_f10a;
const ASCENT_STEPS: usize = 25;

pub fn superop_norm(s: &SuperOp, kind: SuperOpNormKind) -> SuperOpNorm {
    match kind {
        SuperOpNormKind::FrobeniusInduced => SuperOpNorm {
            value: if s.matrix.is_empty() {
                0.0
            } else {
                linalg::singular_values(&s.matrix).max()
            },
            trials: 0,
        },
        SuperOpNormKind::SpectralSampled { trials } => spectral_sampled(s, trials),
    }
}

fn spectral(a: &Element) -> f64 {
    linalg::singular_values(a).max()
}

/// Unitary polar factor of `g`: the maximizer of `Re tr(g^H A)` over the
/// unit ball of the spectral norm.
fn polar_factor(g: &Element) -> Option<Element> {
    let svd = linalg::svd(g, true, true);
    Some(svd.u? * svd.v_t?)
}

fn spectral_sampled(s: &SuperOp, trials: usize) -> SuperOpNorm {
    let n = s.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLER_SEED);
    let ratio = |a: &Element| -> f64 {
        let na = spectral(a);
        if na == 0.0 {
            0.0
        } else {
            spectral(&s.apply(a).expect("dimension checked")) / na
        }
    };
    let mut best = ratio(&Element::identity(n, n));
    let mut evaluated = 1;
    for _ in 0..trials {
        let mut a = Element::from_fn(n, n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        for _ in 0..ASCENT_STEPS {
            let r = ratio(&a);
            evaluated += 1;
            best = best.max(r);
            let image = s.apply(&a).expect("dimension checked");
            let svd = linalg::svd(&image, true, true);
            let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
                break;
            };
            let k = svd
                .singular_values
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.total_cmp(y.1))
                .map(|(k, _)| k)
                .unwrap_or(0);
            let top = u.column(k) * v_t.row(k);
            let grad = s.apply_adjoint(&top).expect("dimension checked");
            match polar_factor(&grad) {
                Some(next) if grad.norm() > 0.0 => a = next,
                _ => break,
            }
        }
        best = best.max(ratio(&a));
        evaluated += 1;
    }
    SuperOpNorm {
        value: best,
        trials: evaluated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::identity;
    use crate::expm::matrix_exponential;

    fn rc(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn conjugation_matches_direct_product() {
        let x = Element::from_row_slice(2, 2, &[rc(1.0), rc(2.0), C64::new(0.0, 1.0), rc(3.0)]);
        let y = Element::from_row_slice(2, 2, &[rc(0.5), rc(0.0), rc(1.0), rc(-1.0)]);
        let a = Element::from_row_slice(2, 2, &[rc(1.0), C64::new(2.0, 1.0), rc(-3.0), rc(4.0)]);
        let s = SuperOp::left_right(&x, &y);
        assert!((s.apply(&a).unwrap() - &x * &a * &y).norm() < 1e-14);
    }

    #[test]
    fn commutator_superop() {
        let x = Element::from_row_slice(2, 2, &[rc(1.0), rc(2.0), rc(3.0), C64::new(0.0, 4.0)]);
        let a = Element::from_row_slice(2, 2, &[rc(0.0), rc(1.0), C64::new(2.0, -1.0), rc(1.0)]);
        let s = SuperOp::commutator(&x);
        assert!((s.apply(&a).unwrap() - (&x * &a - &a * &x)).norm() < 1e-14);
    }

    #[test]
    fn from_linear_map_reproduces_map() {
        let x = Element::from_row_slice(2, 2, &[rc(1.0), rc(2.0), rc(0.0), rc(1.0)]);
        let s = SuperOp::from_linear_map(2, |a| Ok(&x * a)).unwrap();
        assert_eq!(s, SuperOp::left_right(&x, &identity(2)));
    }

    #[test]
    fn identity_norms() {
        let id = SuperOp::identity(3);
        assert!((id.norm(SuperOpNormKind::FrobeniusInduced).value - 1.0).abs() < 1e-14);
        let sampled = id.norm(SuperOpNormKind::SpectralSampled { trials: 4 });
        assert!((sampled.value - 1.0).abs() < 1e-14);
        assert!(sampled.trials > 4);
    }

    #[test]
    fn unitary_conjugation_is_isometric() {
        let h = Element::from_row_slice(2, 2, &[rc(0.3), C64::new(0.1, 0.4), C64::new(0.1, -0.4), rc(-0.7)]);
        let u = matrix_exponential(&(&h * C64::new(0.0, 1.0))).unwrap();
        let s = SuperOp::conjugation(&u, &u.adjoint());
        assert!((s.norm(SuperOpNormKind::FrobeniusInduced).value - 1.0).abs() < 1e-12);
        let sampled = s.norm(SuperOpNormKind::SpectralSampled { trials: 8 }).value;
        assert!((sampled - 1.0).abs() < 1e-10);
    }

    #[test]
    fn diagonal_conjugation_frobenius_norm() {
        let mut d = identity(2);
        d[(0, 0)] = rc(2.0);
        d[(1, 1)] = rc(0.5);
        let d_inv = d.clone().try_inverse().unwrap();
        let s = SuperOp::conjugation(&d, &d_inv);
        assert!((s.norm(SuperOpNormKind::FrobeniusInduced).value - 4.0).abs() < 1e-12);
    }
}
