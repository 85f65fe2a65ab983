//! Gaussian mollification of flow orbits:
//! `A_n = √(n/π) ∫ α_t(A) e^{-nt² - ξt} dt`.
//!
//! Completing the square, `t = s/√n - ξ/(2n)` turns the weight into
//! `e^{ξ²/(4n)} e^{-s²}/√n`, which Gauss-Hermite integrates directly.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::algebra::{check_dim, check_element, Element};
use crate::error::{FlowError, Result};
use crate::expm::matrix_exponential;
use crate::flow::{Flow, GrowthBound};
use crate::linalg::C64;
use crate::quadrature::{adaptive_integrate, hermite_rule};

pub const DEFAULT_SMOOTHING_NODES: usize = 64;
/// Hermite nodes beyond this radius carry weights below `e^{-64}` and are
/// skipped for flows with a bounded time range.
const SUPPORT_RADIUS: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingResult {
    pub a_n: Element,
    pub n: f64,
    pub xi: f64,
    pub quad_error_estimate: f64,
    pub weight_integral: f64,
}

fn check_n(n: f64) -> Result<()> {
    if n > 0.0 && n.is_finite() {
        Ok(())
    } else {
        Err(FlowError::InvalidArgument(format!("n must be positive, got {n}")))
    }
}

/// `∫ e^{-nt² - ξt} dt = e^{ξ²/(4n)} √(π/n)`.
pub fn gaussian_weight_integral(n: f64, xi: f64) -> Result<f64> {
    check_n(n)?;
    Ok((xi * xi / (4.0 * n)).exp() * (PI / n).sqrt())
}

/// The same integral by adaptive Gauss-Legendre on the effective support.
pub fn gaussian_weight_integral_quadrature(n: f64, xi: f64, tol: f64) -> Result<f64> {
    check_n(n)?;
    let centre = -xi / (2.0 * n);
    let half_width = 40.0 / n.sqrt();
    Ok(adaptive_integrate(
        &|t: f64| (-n * t * t - xi * t).exp(),
        centre - half_width,
        centre + half_width,
        tol,
    ))
}

/// `Σ_k w_k f(s_k) c_k` over the Hermite rule, restricted to the support
/// when the flow has a bounded time range.
fn hermite_sum<F>(nodes: usize, bounded: bool, mut f: F) -> Result<Element>
where
    F: FnMut(f64) -> Result<Element>,
{
    let rule = hermite_rule(nodes);
    let mut acc: Option<Element> = None;
    for &(s, w) in rule.iter() {
        if bounded && s.abs() > SUPPORT_RADIUS {
            continue;
        }
        let term = f(s)? * C64::new(w, 0.0);
        acc = Some(match acc {
            Some(a) => a + term,
            None => term,
        });
    }
    acc.ok_or(FlowError::EmptyGrid)
}

fn smooth_with(flow: &Flow, a: &Element, n: f64, xi: f64, nodes: usize) -> Result<Element> {
    let shift = -xi / (2.0 * n);
    let scale = 1.0 / n.sqrt();
    let factor = (xi * xi / (4.0 * n)).exp() / PI.sqrt();
    let bounded = flow.time_range().is_some();
    Ok(hermite_sum(nodes, bounded, |s| flow.eval(s * scale + shift, a))? * C64::new(factor, 0.0))
}

/// `A_n` with `nodes` Hermite nodes; the error estimate is the change under
/// node doubling and the returned value is the refined one.
pub fn analytic_smooth(flow: &Flow, a: &Element, n: f64, xi: f64, nodes: usize) -> Result<SmoothingResult> {
    check_n(n)?;
    check_element(a)?;
    check_dim(a, flow.dim())?;
    if nodes < 8 {
        return Err(FlowError::InvalidArgument("at least 8 Hermite nodes are required".into()));
    }
    if xi.abs() > n.sqrt() {
        return Err(FlowError::GrowthAlarm { xi, sqrt_n: n.sqrt() });
    }
    let coarse = smooth_with(flow, a, n, xi, nodes)?;
    let fine = smooth_with(flow, a, n, xi, 2 * nodes)?;
    Ok(SmoothingResult {
        quad_error_estimate: (&fine - &coarse).norm(),
        a_n: fine,
        n,
        xi,
        weight_integral: gaussian_weight_integral(n, xi)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub n: f64,
    pub diff_frobenius: f64,
    pub norm_frobenius: f64,
    pub quad_error_estimate: f64,
}

pub fn smoothing_convergence_profile(flow: &Flow, a: &Element, n_list: &[f64], xi: f64) -> Result<Vec<ProfileRow>> {
    if n_list.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(FlowError::InvalidArgument("n_list must be increasing".into()));
    }
    n_list
        .iter()
        .map(|&n| {
            let r = analytic_smooth(flow, a, n, xi, DEFAULT_SMOOTHING_NODES)?;
            Ok(ProfileRow {
                n,
                diff_frobenius: (&r.a_n - a).norm(),
                norm_frobenius: r.a_n.norm(),
                quad_error_estimate: r.quad_error_estimate,
            })
        })
        .collect()
}

/// Norm bound on `||A_n||_F`: `M ||A||_F` at `ξ = 0`, and
/// `2 M e^{ξ²/n} ||A||_F` otherwise.
pub fn smoothed_norm_bound(bound: &GrowthBound, a: &Element, n: f64, xi: f64) -> f64 {
    if xi == 0.0 {
        bound.m * a.norm()
    } else {
        2.0 * bound.m * (xi * xi / n).exp() * a.norm()
    }
}

/// `f_n(z) = √(n/π) ∫ α_t(A) e^{-n(t-z)² - ξ(t-z)} dt` for complex `z`,
/// the shifted-contour form of `α_z(A_n)`.
pub fn shifted_integral(flow: &Flow, a: &Element, n: f64, xi: f64, z: C64, nodes: usize) -> Result<Element> {
    check_n(n)?;
    let c = z - C64::new(xi / (2.0 * n), 0.0);
    let scale = 1.0 / n.sqrt();
    let bounded = flow.time_range().is_some();
    let rule = hermite_rule(nodes);
    let mut acc = Element::zeros(a.nrows(), a.ncols());
    for &(s, w) in rule.iter() {
        if bounded && s.abs() > SUPPORT_RADIUS {
            continue;
        }
        let phase = C64::new(n * c.im * c.im, 2.0 * n.sqrt() * c.im * s).exp();
        acc += flow.eval(c.re + s * scale, a)? * (phase * w);
    }
    Ok(acc * C64::new((xi * xi / (4.0 * n)).exp() / PI.sqrt(), 0.0))
}

/// Largest `||α_z(A_n) - f_n(z)||_F` over `z` and `radius_samples` points on
/// the circle of radius `|Im z|` about `Re z`; `α_z = Ad e^{zG}` needs an
/// inner flow.
pub fn analyticity_check(
    flow: &Flow,
    a: &Element,
    smoothed: &SmoothingResult,
    z: C64,
    radius_samples: usize,
    nodes: usize,
) -> Result<f64> {
    let g = flow.inner_generator().ok_or(FlowError::RequiresInnerFlow)?;
    let mut points = vec![z];
    let radius = z.im.abs();
    if radius > 0.0 {
        points.extend((0..radius_samples).map(|k| {
            let theta = 2.0 * PI * k as f64 / radius_samples as f64;
            C64::new(z.re, 0.0) + C64::from_polar(radius, theta)
        }));
    }
    let mut worst = 0.0f64;
    for p in points {
        let x = matrix_exponential(&(&g * p))?;
        let x_inv = matrix_exponential(&(&g * -p))?;
        let direct = &x * &smoothed.a_n * &x_inv;
        let shifted = shifted_integral(flow, a, smoothed.n, smoothed.xi, p, nodes)?;
        worst = worst.max((direct - shifted).norm());
    }
    Ok(worst)
}
