//! Similarities implementing automorphisms, inner derivations, and
//! relations between flows on a nest algebra.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebra::{check_dim, identity, Element, NestAlgebra};
use crate::dyson::{closed_form_from_generator, default_ode_steps, ode_cocycle};
use crate::error::{FlowError, Result};
use crate::expm::matrix_exponential;
use crate::flow::{generator_superop, Flow};
use crate::linalg::{checked_inverse, lstsq, min_singular_value, null_space_scaled, C64};
use crate::superop::{SuperOp, SuperOpNormKind};

const INVARIANCE_TOL: f64 = 1e-9;
const MULTIPLICATIVE_TOL: f64 = 1e-8;
const LEIBNIZ_TOL: f64 = 1e-7;
const SOLVE_TOL: f64 = 1e-6;
const NULL_REL_TOL: f64 = 1e-8;
const SPECTRAL_TRIALS: usize = 4;
/// Times at which extracted generators and flow relations are re-verified.
pub const CHECK_TIMES: [f64; 2] = [0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityGauge {
    UnitTopLeft,
    DetOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    /// `min_λ ||λT - I||_F`.
    pub lhs: f64,
    /// `4 ||σ - id||` in the Frobenius-induced norm.
    pub rhs: f64,
    /// `4 ||σ - id||` in the spectral-induced norm (sampled lower bound).
    pub rhs_spectral: f64,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilaritySolution {
    pub t: Element,
    pub residual: f64,
    pub normalization: SimilarityGauge,
    pub bound_check: Option<BoundCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivationGauge {
    TraceFree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivationSolution {
    pub p: Element,
    pub residual: f64,
    pub gauge: DerivationGauge,
}

fn scale_of(a: &Element) -> f64 {
    a.norm().max(1.0)
}

fn check_invariant(map: &SuperOp, algebra: &NestAlgebra, what: fn(String) -> FlowError) -> Result<Vec<Element>> {
    if map.dim() != algebra.dim() {
        return Err(FlowError::DimensionMismatch {
            expected: algebra.dim(),
            found: map.dim(),
        });
    }
    let images = algebra
        .basis()
        .iter()
        .map(|e| map.apply(e))
        .collect::<Result<Vec<_>>>()?;
    for (img, (i, j)) in images.iter().zip(algebra.pattern()) {
        if !algebra.contains(img, INVARIANCE_TOL * scale_of(img))? {
            return Err(what(format!("image of E_{i}{j} leaves the algebra")));
        }
    }
    Ok(images)
}

fn basis_index(algebra: &NestAlgebra) -> impl Fn(usize, usize) -> Option<usize> {
    let dim = algebra.dim();
    let mut index = vec![None; dim * dim];
    for (k, (i, j)) in algebra.pattern().into_iter().enumerate() {
        index[i + j * dim] = Some(k);
    }
    move |i, j| index[i + j * dim]
}

/// Largest deviation from multiplicativity over pairs of basis units.
pub fn multiplicative_defect(sigma: &SuperOp, algebra: &NestAlgebra) -> Result<f64> {
    let basis = algebra.basis();
    let images = basis.iter().map(|e| sigma.apply(e)).collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    for (a, ea) in basis.iter().enumerate() {
        for (b, eb) in basis.iter().enumerate() {
            let lhs = sigma.apply(&(ea * eb))?;
            let rhs = &images[a] * &images[b];
            worst = worst.max((lhs - &rhs).norm() / scale_of(&rhs));
        }
    }
    Ok(worst)
}

/// Invertible `T` in the algebra with `σ(A) = T A T^{-1}`.
pub fn automorphism_similarity(sigma: &SuperOp, algebra: &NestAlgebra) -> Result<SimilaritySolution> {
    let images = check_invariant(sigma, algebra, FlowError::NotAutomorphism)?;
    let mult = multiplicative_defect(sigma, algebra)?;
    if mult > MULTIPLICATIVE_TOL {
        return Err(FlowError::NotAutomorphism(format!("multiplicative defect {mult:e}")));
    }

    let basis = algebra.basis();
    let n = algebra.dim();
    let n2 = n * n;
    let m = basis.len();
    let mut system = DMatrix::<C64>::zeros(m * n2, m);
    for (b, (e, img)) in basis.iter().zip(&images).enumerate() {
        for (k, bk) in basis.iter().enumerate() {
            let block = img * bk - bk * e;
            system.view_mut((b * n2, k), (n2, 1)).copy_from_slice(block.as_slice());
        }
    }
    let operand_scale = basis
        .iter()
        .zip(&images)
        .map(|(e, img)| e.norm_squared() + img.norm_squared())
        .sum::<f64>()
        .sqrt();
    let kernel = null_space_scaled(&system, NULL_REL_TOL, operand_scale);
    if kernel.basis.len() != 1 {
        return Err(FlowError::AmbiguousSimilarity(kernel.basis.len()));
    }
    let mut t = algebra.from_coordinates(&kernel.basis[0]);

    let normalization = if t[(0, 0)].norm() >= 1e-8 {
        t /= t[(0, 0)];
        SimilarityGauge::UnitTopLeft
    } else {
        let det = t.determinant();
        if det.norm() == 0.0 {
            return Err(FlowError::Singular(0.0));
        }
        t *= det.powf(-1.0 / n as f64);
        SimilarityGauge::DetOne
    };
    let smin = min_singular_value(&t);
    if !(smin > 1e-10) {
        return Err(FlowError::Singular(smin));
    }

    let t_scale = 1.0 + t.norm();
    let residual = basis
        .iter()
        .zip(&images)
        .map(|(e, img)| (img * &t - &t * e).norm() / t_scale)
        .fold(0.0f64, f64::max);
    if residual > SOLVE_TOL {
        return Err(FlowError::NotAutomorphism(format!("similarity residual {residual:e}")));
    }

    let deviation = sigma.sub(&SuperOp::identity(n))?;
    let dist = deviation.norm(SuperOpNormKind::FrobeniusInduced).value;
    let bound_check = if dist < 1.0 {
        let lambda = t.trace().conj() / t.norm_squared();
        Some(BoundCheck {
            lhs: (&t * lambda - identity(n)).norm(),
            rhs: 4.0 * dist,
            rhs_spectral: 4.0
                * deviation
                    .norm(SuperOpNormKind::SpectralSampled {
                        trials: SPECTRAL_TRIALS,
                    })
                    .value,
        })
    } else {
        None
    };
    Ok(SimilaritySolution {
        t,
        residual,
        normalization,
        bound_check,
    })
}

/// Largest Leibniz defect `||D(AB) - D(A)B - A D(B)||` over basis pairs,
/// relative to `max(1, ||D||)`.
pub fn leibniz_defect(d: &SuperOp, algebra: &NestAlgebra) -> Result<f64> {
    let basis = algebra.basis();
    let images = basis.iter().map(|e| d.apply(e)).collect::<Result<Vec<_>>>()?;
    let scale = d.matrix_frobenius().max(1.0);
    let mut worst = 0.0f64;
    for (a, ea) in basis.iter().enumerate() {
        for (b, eb) in basis.iter().enumerate() {
            let defect = d.apply(&(ea * eb))? - &images[a] * eb - ea * &images[b];
            worst = worst.max(defect.norm() / scale);
        }
    }
    Ok(worst)
}

/// Trace-free `P` in the algebra with `D(B) = PB - BP` on the algebra.
pub fn inner_derivation_solve(d: &SuperOp, algebra: &NestAlgebra) -> Result<DerivationSolution> {
    let images = check_invariant(d, algebra, FlowError::NotDerivation)?;
    let leibniz = leibniz_defect(d, algebra)?;
    if leibniz > LEIBNIZ_TOL {
        return Err(FlowError::NotDerivation(format!("Leibniz defect {leibniz:e}")));
    }

    let basis = algebra.basis();
    let n = algebra.dim();
    let n2 = n * n;
    let m = basis.len();
    let mut system = DMatrix::<C64>::zeros(m * n2, m);
    let mut rhs = DVector::<C64>::zeros(m * n2);
    for (b, (e, img)) in basis.iter().zip(&images).enumerate() {
        for (k, bk) in basis.iter().enumerate() {
            let block = bk * e - e * bk;
            system.view_mut((b * n2, k), (n2, 1)).copy_from_slice(block.as_slice());
        }
        rhs.rows_mut(b * n2, n2).copy_from_slice(img.as_slice());
    }
    // Minimum-norm coordinates are orthogonal to the identity, hence
    // trace-free; the explicit shift removes rounding.
    let mut p = algebra.from_coordinates(&lstsq(&system, &rhs));
    let shift = p.trace() / n as f64;
    for k in 0..n {
        p[(k, k)] -= shift;
    }
    let p_scale = 1.0 + p.norm();
    let residual = basis
        .iter()
        .zip(&images)
        .map(|(e, img)| (img - (&p * e - e * &p)).norm() / p_scale)
        .fold(0.0f64, f64::max);
    if residual > SOLVE_TOL {
        return Err(FlowError::NotInnerDerivation(residual));
    }
    Ok(DerivationSolution {
        p,
        residual,
        gauge: DerivationGauge::TraceFree,
    })
}

/// Basis of the space of derivations of the algebra, each given by its
/// coordinate matrix `d` with `D(E_k) = Σ_j d[(j, k)] E_j`.
///
/// The Leibniz constraint has integer coefficients, so the kernel is computed
/// from its real normal matrix.
pub fn derivation_space(algebra: &NestAlgebra) -> Vec<DMatrix<C64>> {
    let pattern = algebra.pattern();
    let m = pattern.len();
    let index = basis_index(algebra);
    let unknown = |row: usize, col: usize| row + col * m;
    let mut gram = DMatrix::<f64>::zeros(m * m, m * m);
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(3);

    for (a, &(i, j)) in pattern.iter().enumerate() {
        for (b, &(k, l)) in pattern.iter().enumerate() {
            // product E_ij E_kl = δ_jk E_il
            let product = if j == k { index(i, l) } else { None };
            for &(r, s) in &pattern {
                row.clear();
                let out = index(r, s).expect("pattern entry");
                if let Some(c) = product {
                    row.push((unknown(out, c), 1.0));
                }
                // D(E_a) E_kl: contributions d[(r,k), a] E_rk E_kl = E_rl
                if s == l {
                    if let Some(rk) = index(r, k) {
                        row.push((unknown(rk, a), -1.0));
                    }
                }
                // E_ij D(E_b): contributions d[(j,s), b] E_ij E_js = E_is
                if r == i {
                    if let Some(js) = index(j, s) {
                        row.push((unknown(js, b), -1.0));
                    }
                }
                for &(x, vx) in &row {
                    for &(y, vy) in &row {
                        gram[(x, y)] += vx * vy;
                    }
                }
            }
        }
    }
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max).max(1.0);
    eig.eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &lambda)| lambda.abs() <= 1e-9 * top)
        .map(|(c, _)| {
            let v = eig.eigenvectors.column(c);
            DMatrix::from_fn(m, m, |r, col| C64::new(v[unknown(r, col)], 0.0))
        })
        .collect()
}

/// Superoperator of the derivation with coordinate matrix `d` (zero off the
/// algebra).
pub fn derivation_superop(algebra: &NestAlgebra, d: &DMatrix<C64>) -> Result<SuperOp> {
    let pattern = algebra.pattern();
    let n = algebra.dim();
    let n2 = n * n;
    let mut matrix = DMatrix::<C64>::zeros(n2, n2);
    for (k, &(i, j)) in pattern.iter().enumerate() {
        let image = algebra.from_coordinates(&d.column(k).into_owned());
        matrix.column_mut(i + j * n).copy_from_slice(image.as_slice());
    }
    SuperOp::from_matrix(n, matrix)
}

/// Trace-free generator `P` of the flow, with `α_t ≈ Ad e^{tP}`.
pub fn extract_flow_generator(flow: &Flow, algebra: &NestAlgebra, h_step: f64) -> Result<DerivationSolution> {
    check_dim(&identity(algebra.dim()), flow.dim())?;
    let d = generator_superop(flow, h_step)?;
    inner_derivation_solve(&d, algebra)
}

/// Largest `||α_t(E) - e^{tP} E e^{-tP}||_F` over basis units and
/// `t ∈ CHECK_TIMES`.
pub fn reconjugation_residual(flow: &Flow, p: &Element, algebra: &NestAlgebra) -> Result<f64> {
    let mut worst = 0.0f64;
    for &t in &CHECK_TIMES {
        let x = matrix_exponential(&(p * C64::new(t, 0.0)))?;
        let x_inv = matrix_exponential(&(p * C64::new(-t, 0.0)))?;
        for e in algebra.basis() {
            worst = worst.max((flow.eval(t, &e)? - &x * &e * &x_inv).norm());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowRelation {
    pub solution: DerivationSolution,
    /// Largest `||α_t(E) - e^{tP} β_t(E) e^{-tP}||_F` at `t ∈ CHECK_TIMES`.
    pub literal_residual: f64,
    /// Largest `||α_t(E) - u_t β_t(E) u_t^{-1}||_F` with `u` the cocycle of
    /// `β` for the perturbation `-iP`.
    pub cocycle_residual: f64,
}

/// `P` with `δ_α = δ_β + ad P`, plus both reconjugation checks.
pub fn relate_flows(flow_a: &Flow, flow_b: &Flow, algebra: &NestAlgebra, h_step: f64) -> Result<FlowRelation> {
    if flow_a.dim() != flow_b.dim() {
        return Err(FlowError::DimensionMismatch {
            expected: flow_a.dim(),
            found: flow_b.dim(),
        });
    }
    let d = generator_superop(flow_a, h_step)?.sub(&generator_superop(flow_b, h_step)?)?;
    let solution = inner_derivation_solve(&d, algebra)?;
    let p = &solution.p;
    let perturbation = p * C64::new(0.0, -1.0);

    let mut literal_residual = 0.0f64;
    let mut cocycle_residual = 0.0f64;
    for &t in &CHECK_TIMES {
        let x = matrix_exponential(&(p * C64::new(t, 0.0)))?;
        let x_inv = matrix_exponential(&(p * C64::new(-t, 0.0)))?;
        let u = match flow_b.inner_generator() {
            Some(g) => closed_form_from_generator(&g, &perturbation, t)?,
            None => ode_cocycle(flow_b, &perturbation, t, default_ode_steps(t))?,
        };
        let u_inv = checked_inverse(&u)?;
        for e in algebra.basis() {
            let a = flow_a.eval(t, &e)?;
            let b = flow_b.eval(t, &e)?;
            literal_residual = literal_residual.max((&a - &x * &b * &x_inv).norm());
            cocycle_residual = cocycle_residual.max((&a - &u * &b * &u_inv).norm());
        }
    }
    Ok(FlowRelation {
        solution,
        literal_residual,
        cocycle_residual,
    })
}

/// `t -> σ ∘ α_t ∘ σ^{-1}`; inner again (generator `σ(G)`) when `α` is inner
/// and `σ` is multiplicative.
pub fn conjugate_flow(sigma: &SuperOp, sigma_inv: &SuperOp, flow: &Flow) -> Result<Flow> {
    let n = flow.dim();
    if sigma.dim() != n || sigma_inv.dim() != n {
        return Err(FlowError::DimensionMismatch {
            expected: n,
            found: sigma.dim(),
        });
    }
    let product = sigma.compose(sigma_inv)?;
    let defect = product.sub(&SuperOp::identity(n))?.matrix_frobenius();
    if defect > 1e-10 * (n as f64) {
        return Err(FlowError::InvalidArgument(format!(
            "sigma_inv is not an inverse of sigma (defect {defect:e})"
        )));
    }
    if let Flow::Inner { generator } = flow {
        let full = NestAlgebra::full(n)?;
        if multiplicative_defect(sigma, &full)? <= MULTIPLICATIVE_TOL {
            return Flow::inner(sigma.apply(generator)?);
        }
    }
    Ok(Flow::Conjugated {
        sigma: sigma.clone(),
        sigma_inv: sigma_inv.clone(),
        flow: Box::new(flow.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::matrix_unit;

    fn i() -> C64 {
        C64::new(0.0, 1.0)
    }

    fn ad_of(p: &Element) -> SuperOp {
        SuperOp::commutator(p)
    }

    fn conj_by(t: &Element) -> SuperOp {
        SuperOp::conjugation(t, &checked_inverse(t).unwrap())
    }

    #[test]
    fn identity_similarity() {
        let alg = NestAlgebra::new(3, &[0, 1, 3]).unwrap();
        let sol = automorphism_similarity(&SuperOp::identity(3), &alg).unwrap();
        assert!((sol.t - identity(3)).norm() < 1e-12);
        assert!(sol.residual < 1e-12);
        assert_eq!(sol.normalization, SimilarityGauge::UnitTopLeft);
        let check = sol.bound_check.unwrap();
        assert!(check.lhs < 1e-12 && check.rhs == 0.0);
    }

    #[test]
    fn recovers_unipotent_similarity() {
        let alg = NestAlgebra::new(2, &[0, 1, 2]).unwrap();
        let t0 = identity(2) + matrix_unit(2, 0, 1);
        let sol = automorphism_similarity(&conj_by(&t0), &alg).unwrap();
        assert!((sol.t - t0).norm() < 1e-12);
    }

    #[test]
    fn one_dimensional_rounding_noise() {
        // Ad e^c on a 1x1 algebra is the identity up to rounding.
        let alg = NestAlgebra::new(1, &[0, 1]).unwrap();
        let c = Element::from_element(1, 1, C64::new(0.37, 0.0));
        let sigma = SuperOp::conjugation(&matrix_exponential(&c).unwrap(), &matrix_exponential(&(-c)).unwrap());
        let sol = automorphism_similarity(&sigma, &alg).unwrap();
        assert_eq!(sol.t[(0, 0)], C64::new(1.0, 0.0));
    }

    #[test]
    fn small_similarity_bound() {
        let alg = NestAlgebra::upper_triangular(2).unwrap();
        let t0 = matrix_exponential(&(matrix_unit(2, 0, 1) * C64::new(0.1, 0.0))).unwrap();
        let check = automorphism_similarity(&conj_by(&t0), &alg).unwrap().bound_check.unwrap();
        assert!(check.holds(), "{check:?}");
    }

    #[test]
    fn rejects_non_automorphism() {
        let alg = NestAlgebra::upper_triangular(2).unwrap();
        let twice = SuperOp::identity(2).scale(C64::new(2.0, 0.0));
        assert!(matches!(
            automorphism_similarity(&twice, &alg),
            Err(FlowError::NotAutomorphism(_))
        ));
        // transpose moves E_12 out of the algebra
        let transpose = SuperOp::from_linear_map(2, |a| Ok(a.transpose())).unwrap();
        assert!(automorphism_similarity(&transpose, &alg).is_err());
    }

    #[test]
    fn zero_derivation() {
        let alg = NestAlgebra::upper_triangular(3).unwrap();
        let sol = inner_derivation_solve(&SuperOp::zero(3), &alg).unwrap();
        assert_eq!(sol.p.norm(), 0.0);
    }

    #[test]
    fn recovers_known_inner_derivation() {
        let alg = NestAlgebra::upper_triangular(2).unwrap();
        let p0 = matrix_unit(2, 0, 1) * i();
        let sol = inner_derivation_solve(&ad_of(&p0), &alg).unwrap();
        assert!((sol.p - p0).norm() < 1e-12);
        assert!(sol.residual < 1e-10);
    }

    #[test]
    fn trace_gauge() {
        let alg = NestAlgebra::new(3, &[0, 1, 3]).unwrap();
        let mut p0 = matrix_unit(3, 0, 2) + matrix_unit(3, 1, 1) * C64::new(2.0, 0.0);
        p0[(0, 0)] = C64::new(1.0, 1.0);
        let sol = inner_derivation_solve(&ad_of(&p0), &alg).unwrap();
        let expected = &p0 - identity(3) * (p0.trace() / 3.0);
        assert!((sol.p.clone() - expected).norm() < 1e-12);
        assert!(sol.p.trace().norm() < 1e-14);
    }

    #[test]
    fn derivation_space_dimension_is_inner() {
        for (n, dims) in [(3usize, vec![0usize, 1, 2, 3]), (4, vec![0, 2, 4]), (3, vec![0, 3])] {
            let alg = NestAlgebra::new(n, &dims).unwrap();
            let space = derivation_space(&alg);
            assert_eq!(space.len(), alg.linear_dim() - 1, "{dims:?}");
            for d in &space {
                let s = derivation_superop(&alg, d).unwrap();
                assert!(leibniz_defect(&s, &alg).unwrap() < 1e-12);
                assert!(inner_derivation_solve(&s, &alg).unwrap().residual < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_non_derivation() {
        let alg = NestAlgebra::upper_triangular(2).unwrap();
        assert!(matches!(
            inner_derivation_solve(&SuperOp::identity(2), &alg),
            Err(FlowError::NotDerivation(_))
        ));
    }

    #[test]
    fn extract_generator_round_trip() {
        let alg = NestAlgebra::upper_triangular(3).unwrap();
        assert!(extract_flow_generator(&Flow::identity(3), &alg, 1e-2).unwrap().p.norm() < 1e-12);
        let mut p0 = matrix_unit(3, 0, 1) * C64::new(0.4, 0.2) + matrix_unit(3, 1, 2) * C64::new(-0.3, 0.0);
        p0[(0, 0)] = C64::new(0.5, 0.0);
        p0[(2, 2)] = C64::new(0.1, -0.2);
        let flow = Flow::inner(p0.clone()).unwrap();
        let sol = extract_flow_generator(&flow, &alg, 1e-2).unwrap();
        let expected = &p0 - identity(3) * (p0.trace() / 3.0);
        assert!((sol.p.clone() - expected).norm() < 1e-7);
        assert!(reconjugation_residual(&flow, &sol.p, &alg).unwrap() < 1e-6);
    }

    #[test]
    fn relate_identical_and_identity() {
        let alg = NestAlgebra::upper_triangular(2).unwrap();
        let p0 = matrix_unit(2, 0, 1) * C64::new(0.7, 0.0) + matrix_unit(2, 0, 0) * C64::new(0.0, 0.4);
        let flow = Flow::inner(p0.clone()).unwrap();
        let same = relate_flows(&flow, &flow, &alg, 1e-2).unwrap();
        assert!(same.solution.p.norm() < 1e-12);
        let rel = relate_flows(&flow, &Flow::identity(2), &alg, 1e-2).unwrap();
        let expected = &p0 - identity(2) * (p0.trace() / 2.0);
        assert!((rel.solution.p - expected).norm() < 1e-7);
        assert!(rel.literal_residual < 1e-6);
        assert!(rel.cocycle_residual < 1e-6);
    }

    #[test]
    fn conjugated_inner_flow_is_inner() {
        let s = identity(2) + matrix_unit(2, 0, 1) * C64::new(0.5, 0.0);
        let sigma = conj_by(&s);
        let sigma_inv = SuperOp::conjugation(&checked_inverse(&s).unwrap(), &s);
        let g = matrix_unit(2, 0, 0) * i() + matrix_unit(2, 1, 0) * C64::new(0.2, 0.0);
        let flow = Flow::inner(g.clone()).unwrap();
        let out = conjugate_flow(&sigma, &sigma_inv, &flow).unwrap();
        let expected = &s * &g * checked_inverse(&s).unwrap();
        match &out {
            Flow::Inner { generator } => assert!((generator - expected).norm() < 1e-12),
            other => panic!("expected inner flow, got {other:?}"),
        }
        let b = matrix_unit(2, 0, 1) + matrix_unit(2, 1, 1);
        let direct = sigma.apply(&flow.eval(0.7, &sigma_inv.apply(&b).unwrap()).unwrap()).unwrap();
        assert!((out.eval(0.7, &b).unwrap() - direct).norm() < 1e-10);
    }

    #[test]
    fn conjugate_by_identity() {
        let flow = Flow::inner(matrix_unit(2, 0, 1) * i()).unwrap();
        let id = SuperOp::identity(2);
        assert_eq!(conjugate_flow(&id, &id, &flow).unwrap(), flow);
    }
}
