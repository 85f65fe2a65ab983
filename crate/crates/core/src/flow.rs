//! One-parameter automorphism groups ("flows"): evaluation, superoperators,
//! generators and exponential growth bounds.

use serde::{Deserialize, Serialize};

use crate::algebra::{check_dim, check_element, Element};
use crate::dyson;
use crate::error::{FlowError, Result};
use crate::expm::matrix_exponential;
use crate::linalg::{checked_inverse, log_norm, C64};
use crate::literal::MatrixLiteral;
use crate::superop::{SuperOp, SuperOpNormKind};

/// How the cocycle of a perturbed flow is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CocycleMethod {
    Dyson,
    Ode,
    ClosedForm,
}

impl CocycleMethod {
    pub fn name(self) -> &'static str {
        match self {
            CocycleMethod::Dyson => "dyson",
            CocycleMethod::Ode => "ode",
            CocycleMethod::ClosedForm => "closed_form",
        }
    }
}

/// Superoperators sampled on a strictly increasing time grid and
/// interpolated linearly in between.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedFlow {
    dim: usize,
    times: Vec<f64>,
    superops: Vec<SuperOp>,
}

impl TabulatedFlow {
    pub fn new(times: Vec<f64>, superops: Vec<SuperOp>) -> Result<Self> {
        if times.is_empty() {
            return Err(FlowError::EmptyGrid);
        }
        if times.len() != superops.len() {
            return Err(FlowError::InvalidArgument(format!(
                "{} times but {} superoperators",
                times.len(),
                superops.len()
            )));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) || times.iter().any(|t| !t.is_finite()) {
            return Err(FlowError::InvalidArgument("tabulated times must be finite and strictly increasing".into()));
        }
        let dim = superops[0].dim();
        if let Some(bad) = superops.iter().find(|s| s.dim() != dim) {
            return Err(FlowError::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        Ok(TabulatedFlow { dim, times, superops })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().expect("nonempty"))
    }

    pub fn superoperator(&self, t: f64) -> Result<SuperOp> {
        let (lo, hi) = self.range();
        if !(t >= lo && t <= hi) {
            return Err(FlowError::OutOfRange { t, lo, hi });
        }
        let k = self.times.partition_point(|&x| x <= t);
        if k == self.times.len() {
            return Ok(self.superops[k - 1].clone());
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let lambda = (t - t0) / (t1 - t0);
        let a = self.superops[k - 1].scale(C64::new(1.0 - lambda, 0.0));
        a.add(&self.superops[k].scale(C64::new(lambda, 0.0)))
    }
}

/// A flow `t -> α_t` on `dim x dim` matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum Flow {
    /// `α_t(A) = e^{tG} A e^{-tG}`.
    Inner { generator: Element },
    /// `α^P_t(B) = u_t α_t(B) u_t^{-1}` with `u` the cocycle of the base
    /// flow generated by `P` (`du/dt = i u α_t(P)`).
    Perturbed {
        base: Box<Flow>,
        perturbation: Element,
        method: CocycleMethod,
    },
    Tabulated(TabulatedFlow),
    /// `t -> σ ∘ α_t ∘ σ^{-1}`.
    Conjugated {
        sigma: SuperOp,
        sigma_inv: SuperOp,
        flow: Box<Flow>,
    },
}

impl Flow {
    pub fn inner(generator: Element) -> Result<Self> {
        check_element(&generator)?;
        Ok(Flow::Inner { generator })
    }

    pub fn identity(dim: usize) -> Self {
        Flow::Inner {
            generator: Element::zeros(dim, dim),
        }
    }

    pub fn perturbed(base: Flow, perturbation: Element, method: CocycleMethod) -> Result<Self> {
        check_element(&perturbation)?;
        check_dim(&perturbation, base.dim())?;
        if method == CocycleMethod::ClosedForm && base.inner_generator().is_none() {
            return Err(FlowError::RequiresInnerFlow);
        }
        Ok(Flow::Perturbed {
            base: Box::new(base),
            perturbation,
            method,
        })
    }

    pub fn tabulated(times: Vec<f64>, superops: Vec<SuperOp>) -> Result<Self> {
        Ok(Flow::Tabulated(TabulatedFlow::new(times, superops)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            Flow::Inner { generator } => generator.nrows(),
            Flow::Perturbed { base, .. } => base.dim(),
            Flow::Tabulated(t) => t.dim,
            Flow::Conjugated { flow, .. } => flow.dim(),
        }
    }

    /// `G` with `α_t = Ad e^{tG}`, when the flow is known to be inner.
    /// A perturbation of an inner flow `Ad e^{tG}` by `P` is `Ad e^{t(G + iP)}`.
    pub fn inner_generator(&self) -> Option<Element> {
        match self {
            Flow::Inner { generator } => Some(generator.clone()),
            Flow::Perturbed {
                base, perturbation, ..
            } => base
                .inner_generator()
                .map(|g| g + perturbation * C64::new(0.0, 1.0)),
            Flow::Tabulated(_) | Flow::Conjugated { .. } => None,
        }
    }

    /// Exact generator superoperator where it is known in closed form.
    pub fn exact_generator(&self) -> Option<SuperOp> {
        match self {
            Flow::Inner { generator } => Some(SuperOp::commutator(generator)),
            Flow::Perturbed {
                base, perturbation, ..
            } => {
                let shift = SuperOp::commutator(perturbation).scale(C64::new(0.0, 1.0));
                base.exact_generator().map(|d| d.add(&shift).expect("same dimension"))
            }
            Flow::Tabulated(_) => None,
            Flow::Conjugated {
                sigma,
                sigma_inv,
                flow,
            } => flow.exact_generator().map(|d| {
                sigma
                    .compose(&d)
                    .and_then(|x| x.compose(sigma_inv))
                    .expect("same dimension")
            }),
        }
    }

    /// Closed interval on which the flow can be evaluated, if bounded.
    pub fn time_range(&self) -> Option<(f64, f64)> {
        match self {
            Flow::Tabulated(t) => Some(t.range()),
            Flow::Perturbed { base, .. } => base.time_range(),
            Flow::Conjugated { flow, .. } => flow.time_range(),
            Flow::Inner { .. } => None,
        }
    }

    pub fn eval(&self, t: f64, a: &Element) -> Result<Element> {
        check_dim(a, self.dim())?;
        match self {
            Flow::Inner { generator } => {
                let x = matrix_exponential(&(generator * C64::new(t, 0.0)))?;
                let x_inv = matrix_exponential(&(generator * C64::new(-t, 0.0)))?;
                Ok(&x * a * &x_inv)
            }
            Flow::Perturbed {
                base,
                perturbation,
                method,
            } => dyson::perturbed_flow_eval(base, perturbation, t, a, *method),
            Flow::Tabulated(tab) => tab.superoperator(t)?.apply(a),
            Flow::Conjugated {
                sigma,
                sigma_inv,
                flow,
            } => sigma.apply(&flow.eval(t, &sigma_inv.apply(a)?)?),
        }
    }

    /// Matrix of `α_t` acting on column-vectorized elements.
    pub fn superoperator(&self, t: f64) -> Result<SuperOp> {
        match self {
            Flow::Inner { generator } => {
                let x = matrix_exponential(&(generator * C64::new(t, 0.0)))?;
                let x_inv = matrix_exponential(&(generator * C64::new(-t, 0.0)))?;
                Ok(SuperOp::conjugation(&x, &x_inv))
            }
            Flow::Perturbed {
                base,
                perturbation,
                method,
            } => {
                let u = dyson::cocycle_value(base, perturbation, t, *method)?;
                let u_inv = checked_inverse(&u)?;
                SuperOp::conjugation(&u, &u_inv).compose(&base.superoperator(t)?)
            }
            Flow::Tabulated(tab) => tab.superoperator(t),
            Flow::Conjugated {
                sigma,
                sigma_inv,
                flow,
            } => sigma.compose(&flow.superoperator(t)?)?.compose(sigma_inv),
        }
    }
}

/// Flow descriptions as they appear in scenario configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FlowSpec {
    Inner {
        generator: MatrixLiteral,
    },
    Perturbed {
        base: Box<FlowSpec>,
        #[serde(rename = "P")]
        p: MatrixLiteral,
        #[serde(default = "default_method")]
        method: CocycleMethod,
    },
}

fn default_method() -> CocycleMethod {
    CocycleMethod::Ode
}

impl FlowSpec {
    pub fn build(&self) -> Result<Flow> {
        match self {
            FlowSpec::Inner { generator } => Flow::inner(generator.0.clone()),
            FlowSpec::Perturbed { base, p, method } => Flow::perturbed(base.build()?, p.0.clone(), *method),
        }
    }
}

/// Certified pair with `||α_t|| <= M e^{ξ|t|}` (Frobenius-induced norm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthBound {
    pub m: f64,
    pub xi: f64,
}

impl GrowthBound {
    pub fn bound(&self, t: f64) -> f64 {
        self.m * (self.xi * t.abs()).exp()
    }
}

pub const GROWTH_MARGIN: f64 = 1e-6;

fn flow_norm(flow: &Flow, t: f64) -> Result<f64> {
    Ok(flow
        .superoperator(t)?
        .norm(SuperOpNormKind::FrobeniusInduced)
        .value)
}

/// Fit `(M, ξ)` to the sampled norms `||α_t||` on `grid`.
///
/// When the generator `D` is known exactly, `ξ` is also raised to the
/// logarithmic norm `max(μ(D), μ(-D))`, which bounds the growth between
/// grid points as well.
pub fn growth_bound(flow: &Flow, grid: &[f64]) -> Result<GrowthBound> {
    if grid.is_empty() {
        return Err(FlowError::EmptyGrid);
    }
    let norms: Vec<(f64, f64)> = grid
        .iter()
        .map(|&t| flow_norm(flow, t).map(|n| (t, n)))
        .collect::<Result<_>>()?;
    let mut xi = norms
        .iter()
        .filter(|(t, _)| *t != 0.0)
        .map(|(t, n)| n.ln() / t.abs())
        .fold(0.0f64, f64::max);
    if let Some(d) = flow.exact_generator() {
        let mu = log_norm(d.matrix()).max(log_norm(&(-d.matrix().clone())));
        xi = xi.max(mu);
    }
    xi += GROWTH_MARGIN;
    let m = norms
        .iter()
        .map(|(t, n)| n * (-xi * t.abs()).exp())
        .fold(1.0f64, f64::max);
    Ok(GrowthBound { m, xi })
}

/// Symmetric grid on `[-radius, radius]` with the given step (always
/// containing both endpoints and zero).
pub fn symmetric_grid(radius: f64, step: f64) -> Vec<f64> {
    let radius = radius.abs();
    let k = (radius / step).ceil().max(1.0) as i64;
    let h = radius / k as f64;
    (-k..=k).map(|i| i as f64 * h).collect()
}

/// Growth bound certified on a grid covering `[-radius, radius]`.
pub fn certified_growth(flow: &Flow, radius: f64) -> Result<GrowthBound> {
    growth_bound(flow, &symmetric_grid(radius.max(1e-3), 0.25))
}

fn central_difference(flow: &Flow, h: f64) -> Result<SuperOp> {
    let fwd = flow.superoperator(h)?;
    let bwd = flow.superoperator(-h)?;
    Ok(fwd.sub(&bwd)?.scale(C64::new(0.5 / h, 0.0)))
}

/// Central difference `(α_h - α_{-h}) / 2h` with one Richardson step on
/// `h` and `h/2`.
pub fn generator_superop(flow: &Flow, h_step: f64) -> Result<SuperOp> {
    if !(h_step > 0.0) || !h_step.is_finite() {
        return Err(FlowError::InvalidArgument("h_step must be positive".into()));
    }
    let d1 = central_difference(flow, h_step)?;
    let d2 = central_difference(flow, h_step / 2.0)?;
    let d4 = central_difference(flow, h_step / 4.0)?;
    let coarse = d2.sub(&d1)?.matrix_frobenius();
    let fine = d4.sub(&d2)?.matrix_frobenius();
    let floor = 1e-12 * d1.matrix_frobenius().max(1.0);
    if fine > coarse && fine > floor {
        return Err(FlowError::StepTooSmall { coarse, fine });
    }
    d2.scale(C64::new(4.0 / 3.0, 0.0))
        .sub(&d1.scale(C64::new(1.0 / 3.0, 0.0)))
}

pub const DEFAULT_H_STEP: f64 = 1e-2;
