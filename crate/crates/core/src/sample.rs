//! Seeded random corpora for property sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{Element, NestAlgebra};
use crate::dyson::{Cocycle, TabulatedCocycle};
use crate::error::Result;
use crate::linalg::C64;

/// Name of the generator every corpus is drawn from, recorded in reports.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64";

pub type CorpusRng = ChaCha8Rng;

pub fn corpus_rng(seed: u64) -> CorpusRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussianish<R: Rng>(rng: &mut R) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Random element of the given Frobenius norm.
pub fn random_element<R: Rng>(rng: &mut R, dim: usize, norm: f64) -> Element {
    let a = Element::from_fn(dim, dim, |_, _| gaussianish(rng));
    let scale = a.norm();
    if scale == 0.0 {
        return a;
    }
    a * C64::new(norm / scale, 0.0)
}

/// Random Hermitian element of the given Frobenius norm.
pub fn random_hermitian<R: Rng>(rng: &mut R, dim: usize, norm: f64) -> Element {
    let a = Element::from_fn(dim, dim, |_, _| gaussianish(rng));
    let h = &a + a.adjoint();
    let scale = h.norm();
    if scale == 0.0 {
        return h;
    }
    h * C64::new(norm / scale, 0.0)
}

/// Random element of the algebra with the given Frobenius norm.
pub fn random_in_algebra<R: Rng>(rng: &mut R, algebra: &NestAlgebra, norm: f64) -> Element {
    let a = random_element(rng, algebra.dim(), 1.0);
    let a = algebra.project(&a).expect("dimension matches");
    let scale = a.norm();
    a * C64::new(norm / scale.max(f64::MIN_POSITIVE), 0.0)
}

/// Random nest on `dim`: `0`, `dim` and each intermediate dimension with
/// probability one half.
pub fn random_nest<R: Rng>(rng: &mut R, dim: usize) -> NestAlgebra {
    let mut dims = vec![0];
    dims.extend((1..dim).filter(|_| rng.random_bool(0.5)));
    dims.push(dim);
    NestAlgebra::new(dim, &dims).expect("valid nest")
}

/// One entry of the perturbation corpus: base flow `Ad e^{ith}` and
/// perturbation `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationCase {
    pub h: Element,
    pub p: Element,
}

impl PerturbationCase {
    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn generator(&self) -> Element {
        &self.h * C64::new(0.0, 1.0)
    }
}

/// Hermitian `h` and complex `P` with Frobenius norms in `[0.1, max_norm]`,
/// dimension uniform in `dims`.
pub fn perturbation_case<R: Rng>(rng: &mut R, dims: std::ops::RangeInclusive<usize>, max_norm: f64) -> PerturbationCase {
    let dim = rng.random_range(dims);
    let h_norm = rng.random_range(0.1..=max_norm);
    let p_norm = rng.random_range(0.1..=max_norm);
    PerturbationCase {
        h: random_hermitian(rng, dim, h_norm),
        p: random_element(rng, dim, p_norm),
    }
}

/// Tabulates `u` on `[-radius, radius]` with the given step and adds
/// continuous noise of Frobenius size `amplitude` at every node off the
/// lattice `0.5 Z`, where the table stays exact.
pub fn roughened_cocycle<R: Rng>(rng: &mut R, u: &Cocycle, radius: f64, step: f64, amplitude: f64) -> Result<Cocycle> {
    let dim = u.dim();
    let table = TabulatedCocycle::sample(-radius, radius, step, |t| {
        let exact = u.eval(t)?;
        let on_lattice = ((2.0 * t).round() - 2.0 * t).abs() < 1e-12;
        Ok(if on_lattice {
            exact
        } else {
            exact + random_element(rng, dim, amplitude)
        })
    })?;
    Ok(Cocycle::Tabulated(table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_streams_repeat() {
        let a = random_element(&mut corpus_rng(7), 3, 1.0);
        let b = random_element(&mut corpus_rng(7), 3, 1.0);
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn corpus_shapes() {
        let mut rng = corpus_rng(3);
        for _ in 0..50 {
            let case = perturbation_case(&mut rng, 2..=5, 1.5);
            assert!((2..=5).contains(&case.dim()));
            assert!(case.h.norm() <= 1.5 + 1e-12 && case.p.norm() <= 1.5 + 1e-12);
            assert!((&case.h - case.h.adjoint()).norm() < 1e-14);
        }
        let alg = random_nest(&mut rng, 4);
        let x = random_in_algebra(&mut rng, &alg, 0.5);
        assert!(alg.contains(&x, 0.0).unwrap());
    }
}
