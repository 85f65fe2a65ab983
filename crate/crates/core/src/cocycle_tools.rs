//! Decomposition `u_t = w v_t α_t(w^{-1})` of a cocycle and finite-difference
//! differentiability diagnostics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::algebra::{check_dim, check_element, identity, Element};
use crate::dyson::{max_defect_on_grid, Cocycle, CocycleDefect};
use crate::error::{FlowError, Result};
use crate::flow::Flow;
use crate::linalg::{checked_inverse, min_singular_value, C64};
use crate::quadrature::hermite_rule;

const W_SINGULAR_TOL: f64 = 1e-8;

/// `w = √(n/π) ∫ u_t e^{-nt²} dt` by Gauss-Hermite. Nodes whose time falls
/// outside a tabulated cocycle's range are skipped (their weights are
/// negligible once the range covers `±8/√n`).
pub fn mollified_similarity(u: &Cocycle, n: f64, nodes: usize) -> Result<Element> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(FlowError::InvalidArgument(format!("n must be positive, got {n}")));
    }
    let range = match u {
        Cocycle::Tabulated(tab) => Some((tab.times()[0], *tab.times().last().expect("nonempty"))),
        _ => None,
    };
    let scale = 1.0 / n.sqrt();
    let mut w = Element::zeros(u.dim(), u.dim());
    for &(s, weight) in hermite_rule(nodes).iter() {
        let t = s * scale;
        if let Some((lo, hi)) = range {
            if t < lo || t > hi {
                continue;
            }
        }
        w += u.eval(t)? * C64::new(weight, 0.0);
    }
    w *= C64::new(1.0 / PI.sqrt(), 0.0);
    let smin = min_singular_value(&w);
    if !(smin > W_SINGULAR_TOL) {
        return Err(FlowError::IncreaseN(smin));
    }
    Ok(w)
}

/// `v_t = w^{-1} u_t α_t(w)`.
pub fn similar_cocycle(w: &Element, u: &Cocycle, flow: &Flow) -> Result<Cocycle> {
    check_element(w)?;
    check_dim(w, u.dim())?;
    let w_inv = checked_inverse(w)?;
    Ok(Cocycle::Similar {
        w: w.clone(),
        w_inv,
        cocycle: Box::new(u.clone()),
        flow: flow.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifferentiabilityEstimate {
    /// Central difference at the finest step.
    pub derivative: Element,
    /// Largest pairwise distance among the last three estimates.
    pub stability: f64,
    /// One Richardson step on the last two estimates when their steps halve.
    pub extrapolated: Option<Element>,
    pub estimates: Vec<Element>,
}

pub fn differentiability_estimate(u: &Cocycle, t0: f64, h_list: &[f64]) -> Result<DifferentiabilityEstimate> {
    if h_list.is_empty() {
        return Err(FlowError::EmptyGrid);
    }
    if h_list.iter().any(|h| !(*h > 0.0)) || h_list.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(FlowError::InvalidArgument("h_list must be positive and decreasing".into()));
    }
    let estimates = h_list
        .iter()
        .map(|&h| Ok((u.eval(t0 + h)? - u.eval(t0 - h)?) * C64::new(0.5 / h, 0.0)))
        .collect::<Result<Vec<_>>>()?;
    let tail = &estimates[estimates.len().saturating_sub(3)..];
    let mut stability = 0.0f64;
    for (k, a) in tail.iter().enumerate() {
        for b in &tail[k + 1..] {
            stability = stability.max((a - b).norm());
        }
    }
    let extrapolated = match h_list {
        [.., h1, h2] if (h1 / h2 - 2.0).abs() < 1e-12 => {
            let k = estimates.len();
            Some((&estimates[k - 1] * C64::new(4.0, 0.0) - &estimates[k - 2]) * C64::new(1.0 / 3.0, 0.0))
        }
        _ => None,
    };
    Ok(DifferentiabilityEstimate {
        derivative: estimates.last().expect("nonempty").clone(),
        stability,
        extrapolated,
        estimates,
    })
}

/// Doubles `n` from `n_start` until `||w - 1||_F < eps`.
pub fn similarity_threshold(u: &Cocycle, eps: f64, n_start: f64, n_max: f64, nodes: usize) -> Result<(f64, Element)> {
    let mut n = n_start;
    while n <= n_max {
        if let Ok(w) = mollified_similarity(u, n, nodes) {
            if (&w - identity(u.dim())).norm() < eps {
                return Ok((n, w));
            }
        }
        n *= 2.0;
    }
    Err(FlowError::InvalidArgument(format!(
        "no n up to {n_max} gives ||w - 1|| < {eps}"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub n: f64,
    pub norm_w_minus_1: f64,
    pub stability_u: f64,
    pub stability_v: f64,
    pub defect_v: f64,
    pub round_trip: f64,
}

/// Largest `||w v_t α_t(w^{-1}) - u_t||_F` over `times`.
pub fn round_trip_error(w: &Element, v: &Cocycle, u: &Cocycle, flow: &Flow, times: &[f64]) -> Result<f64> {
    let w_inv = checked_inverse(w)?;
    let mut worst = 0.0f64;
    for &t in times {
        let rebuilt = w * v.eval(t)? * flow.eval(t, &w_inv)?;
        worst = worst.max((rebuilt - u.eval(t)?).norm());
    }
    Ok(worst)
}

/// Mollify, form `v`, and measure everything the decomposition promises.
pub fn decompose(
    u: &Cocycle,
    flow: &Flow,
    n: f64,
    nodes: usize,
    t0: f64,
    h_list: &[f64],
    grid: &[f64],
) -> Result<(Element, Cocycle, DecompositionReport)> {
    let w = mollified_similarity(u, n, nodes)?;
    let v = similar_cocycle(&w, u, flow)?;
    let stability_u = differentiability_estimate(u, t0, h_list)?.stability;
    let stability_v = differentiability_estimate(&v, t0, h_list)?.stability;
    let CocycleDefect {
        lemma_order,
        companion_order,
    } = max_defect_on_grid(flow, &v, grid)?;
    let round_trip = round_trip_error(&w, &v, u, flow, grid)?;
    let report = DecompositionReport {
        n,
        norm_w_minus_1: (&w - identity(u.dim())).norm(),
        stability_u,
        stability_v,
        defect_v: lemma_order.max(companion_order),
        round_trip,
    };
    Ok((w, v, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::matrix_unit;
    use crate::dyson::TabulatedCocycle;
    use crate::flow::symmetric_grid;

    fn i() -> C64 {
        C64::new(0.0, 1.0)
    }

    fn sample_pair() -> (Flow, Cocycle, Element) {
        let h = Element::from_fn(2, 2, |r, c| {
            if r == c {
                C64::new(0.3 * r as f64 - 0.1, 0.0)
            } else if r < c {
                C64::new(0.2, 0.1)
            } else {
                C64::new(0.2, -0.1)
            }
        });
        let p = Element::from_fn(2, 2, |r, c| C64::new(0.4 - 0.1 * (r + c) as f64, 0.2 * r as f64));
        (Flow::inner(&h * i()).unwrap(), Cocycle::ClosedForm { h, p: p.clone() }, p)
    }

    #[test]
    fn constant_cocycle() {
        let one = Cocycle::Tabulated(TabulatedCocycle::sample(-10.0, 10.0, 1.0, |_| Ok(identity(2))).unwrap());
        let w = mollified_similarity(&one, 3.0, 64).unwrap();
        assert!((w - identity(2)).norm() < 1e-13);
        let d = differentiability_estimate(&one, 0.3, &[0.1, 0.05]).unwrap();
        assert_eq!(d.derivative.norm(), 0.0);
    }

    #[test]
    fn w_approaches_identity() {
        let (_, u, _) = sample_pair();
        let dist: Vec<f64> = [1.0, 10.0, 100.0]
            .iter()
            .map(|&n| (mollified_similarity(&u, n, 64).unwrap() - identity(2)).norm())
            .collect();
        assert!(dist[0] > dist[1] && dist[1] > dist[2], "{dist:?}");
        let (n, _) = similarity_threshold(&u, 1e-2, 1.0, 1e8, 64).unwrap();
        assert!(n > 1.0);
    }

    #[test]
    fn similar_cocycle_identity_and_law() {
        let (flow, u, _) = sample_pair();
        let v = similar_cocycle(&identity(2), &u, &flow).unwrap();
        assert!((v.eval(0.8).unwrap() - u.eval(0.8).unwrap()).norm() < 1e-14);

        let w = identity(2) + matrix_unit(2, 0, 1) * C64::new(0.7, 0.2);
        let v = similar_cocycle(&w, &u, &flow).unwrap();
        let grid = symmetric_grid(2.0, 0.5);
        assert!(max_defect_on_grid(&flow, &v, &grid).unwrap().max() < 1e-8);
        assert!(round_trip_error(&w, &v, &u, &flow, &grid).unwrap() < 1e-10);
    }

    #[test]
    fn derivative_at_zero() {
        let (_, u, p) = sample_pair();
        let d = differentiability_estimate(&u, 0.0, &[1e-2, 5e-3, 2.5e-3]).unwrap();
        assert!((d.derivative.clone() - &p * i()).norm() < 1e-4);
        assert!(d.stability < 1e-4);
        assert!((d.extrapolated.unwrap() - &p * i()).norm() < 1e-9);
    }

    #[test]
    fn cusp_is_not_differentiable() {
        let cusp = Cocycle::Tabulated(
            TabulatedCocycle::sample(-1.0, 1.0, 1.0 / 4096.0, |t| {
                Ok(identity(2) + matrix_unit(2, 0, 1) * C64::new(t.signum() * t.abs().sqrt(), 0.0))
            })
            .unwrap(),
        );
        let d = differentiability_estimate(&cusp, 0.0, &[0.1, 0.05, 0.025, 0.0125]).unwrap();
        assert!(d.stability > 0.1, "{}", d.stability);
    }

    #[test]
    fn rejects_bad_steps() {
        let (_, u, _) = sample_pair();
        assert!(differentiability_estimate(&u, 0.0, &[]).is_err());
        assert!(differentiability_estimate(&u, 0.0, &[0.1, 0.2]).is_err());
    }
}
