//! Cocycles of perturbed flows.
//!
//! For a flow `α` and a perturbation `P`, the cocycle `u_t` solves
//! `du/dt = i u α_t(P)`, `u_0 = 1`, and the perturbed flow is
//! `α^P_t(B) = u_t α_t(B) u_t^{-1}`. Three independent constructions are
//! provided:
//!
//! * the time-ordered (Dyson) series
//!   `u_t = 1 + Σ_n i^n ∫_{0 ≤ t_n ≤ … ≤ t_1 ≤ t} α_{t_n}(P) ⋯ α_{t_1}(P)`,
//!   with every simplex level integrated by composite Gauss-Legendre;
//! * classical RK4 on the right-multiplicative ODE;
//! * the closed form `u_t = e^{t(G + iP)} e^{-tG}` for inner base flows
//!   `α_t = Ad e^{tG}`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::algebra::{check_dim, check_element, identity, Element};
use crate::error::{FlowError, Result};
use crate::expm::{expm_unchecked, matrix_exponential};
use crate::flow::{growth_bound, symmetric_grid, CocycleMethod, Flow, GrowthBound, GROWTH_MARGIN};
use crate::linalg::{checked_inverse, log_norm, C64};
use crate::quadrature::legendre_panel;
use crate::superop::{SuperOp, SuperOpNormKind};

pub const DEFAULT_DYSON_ORDER: usize = 20;
pub const DEFAULT_DYSON_NODES: usize = 32;
pub const DEFAULT_ODE_STEPS_PER_UNIT: usize = 1000;

/// Upper bound on the width of one Gauss-Legendre panel.
const PANEL_WIDTH: f64 = 2.0;
const BUDGET_RTOL: f64 = 1e-10;
const MAX_PANEL_DOUBLINGS: usize = 4;

fn i_pow(n: usize) -> C64 {
    match n % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// `Σ_{k > order} x^k / k!` for `x >= 0`.
pub fn exp_tail(x: f64, order: usize) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let mut term = 1.0;
    for k in 1..=order {
        term *= x / k as f64;
    }
    let mut tail = 0.0;
    let mut k = order + 1;
    loop {
        term *= x / k as f64;
        tail += term;
        if term <= 1e-17 * tail || !term.is_finite() || k > order + 10_000 {
            break;
        }
        k += 1;
    }
    tail
}

/// Smallest truncation order whose exponential tail at `x` is below `tol`.
pub fn dyson_order_for(x: f64, tol: f64) -> usize {
    (0..400).find(|&n| exp_tail(x, n) < tol).unwrap_or(400)
}

/// Growth bound valid for every `t` in `[-radius, radius]`: the
/// logarithmic-norm bound when the generator is known exactly, otherwise a
/// fine grid fit.
fn series_growth(flow: &Flow, radius: f64) -> Result<GrowthBound> {
    if let Some(d) = flow.exact_generator() {
        let mu = log_norm(d.matrix()).max(log_norm(&(-d.matrix().clone())));
        return Ok(GrowthBound {
            m: 1.0,
            xi: mu.max(0.0) + GROWTH_MARGIN,
        });
    }
    growth_bound(flow, &symmetric_grid(radius.max(1e-3), 0.05))
}

/// `α_s(P)` at each of the given times.
fn orbit(flow: &Flow, p: &Element, times: &[f64]) -> Result<Vec<Element>> {
    match flow {
        Flow::Inner { generator } => times
            .iter()
            .map(|&s| {
                let x = expm_unchecked(&(generator * C64::new(s, 0.0)));
                let x_inv = expm_unchecked(&(generator * C64::new(-s, 0.0)));
                Ok(&x * p * &x_inv)
            })
            .collect(),
        _ => times.iter().map(|&s| flow.eval(s, p)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DysonResult {
    #[serde(skip)]
    pub u: Element,
    pub truncation_order: usize,
    /// `Σ_{k>N} (|t| M_t ||P||_F)^k / k!` with `M_t = M e^{ξ|t|}`.
    pub tail_bound: f64,
    /// Change of the result under the last panel doubling.
    pub quadrature_budget: f64,
}

fn dyson_partial_sum(
    flow: &Flow,
    p: &Element,
    t: f64,
    order: usize,
    nodes: usize,
    panels: usize,
    limit: f64,
) -> Result<Element> {
    let dim = p.nrows();
    let panel = legendre_panel(nodes);
    let q = panel.len();
    let width = t / panels as f64;
    let half = C64::new(0.5 * width, 0.0);

    let times: Vec<f64> = (0..panels)
        .flat_map(|k| {
            let a = k as f64 * width;
            panel.nodes.iter().map(move |x| a + 0.5 * (x + 1.0) * width)
        })
        .collect();
    let q_vals = orbit(flow, p, &times)?;

    let mut u = identity(dim);
    // W_{n-1} sampled at every node; W_0 = 1.
    let mut prev: Vec<Element> = vec![identity(dim); times.len()];
    let mut next: Vec<Element> = vec![Element::zeros(dim, dim); times.len()];
    let mut integrand: Vec<Element> = vec![Element::zeros(dim, dim); q];
    for n in 1..=order {
        let mut start = Element::zeros(dim, dim);
        for k in 0..panels {
            let base = k * q;
            for j in 0..q {
                integrand[j] = &prev[base + j] * &q_vals[base + j];
            }
            for i in 0..q {
                let mut acc = start.clone();
                for j in 0..q {
                    acc += &integrand[j] * (half * panel.running[i * q + j]);
                }
                next[base + i] = acc;
            }
            let mut end = start;
            for j in 0..q {
                end += &integrand[j] * (half * panel.weights[j]);
            }
            start = end;
        }
        u += start * i_pow(n);
        let norm = u.norm();
        if !(norm <= limit) {
            return Err(FlowError::DysonDivergence { order: n, norm, limit });
        }
        std::mem::swap(&mut prev, &mut next);
    }
    Ok(u)
}

/// Dyson series through `order`, each simplex level integrated with
/// `nodes_per_level` Gauss-Legendre nodes per panel.
pub fn dyson_cocycle(flow: &Flow, p: &Element, t: f64, order: usize, nodes_per_level: usize) -> Result<DysonResult> {
    check_element(p)?;
    check_dim(p, flow.dim())?;
    if nodes_per_level < 2 {
        return Err(FlowError::InvalidArgument("nodes_per_level must be at least 2".into()));
    }
    if !t.is_finite() {
        return Err(FlowError::InvalidArgument("t must be finite".into()));
    }
    let dim = flow.dim();
    let p_norm = p.norm();
    if p_norm == 0.0 || t == 0.0 {
        return Ok(DysonResult {
            u: identity(dim),
            truncation_order: order,
            tail_bound: 0.0,
            quadrature_budget: 0.0,
        });
    }
    let bound = series_growth(flow, t.abs())?;
    let m_t = bound.bound(t);
    let x = t.abs() * m_t * p_norm;
    let limit = (dim as f64).sqrt() * (2.0 * x).exp();

    let mut panels = ((t.abs() / PANEL_WIDTH).ceil() as usize).max(1);
    let mut u = dyson_partial_sum(flow, p, t, order, nodes_per_level, panels, limit)?;
    let mut budget = f64::INFINITY;
    for _ in 0..MAX_PANEL_DOUBLINGS {
        panels *= 2;
        let refined = dyson_partial_sum(flow, p, t, order, nodes_per_level, panels, limit)?;
        budget = (&refined - &u).norm();
        u = refined;
        if budget <= BUDGET_RTOL * u.norm() {
            break;
        }
    }
    Ok(DysonResult {
        u,
        truncation_order: order,
        tail_bound: exp_tail(x, order),
        quadrature_budget: budget,
    })
}

/// RK4 integration of `du/dt = i u α_t(P)` from `u_0 = 1` in `steps` steps.
pub fn ode_cocycle(flow: &Flow, p: &Element, t: f64, steps: usize) -> Result<Element> {
    check_element(p)?;
    check_dim(p, flow.dim())?;
    if steps == 0 {
        return Err(FlowError::InvalidArgument("steps must be at least 1".into()));
    }
    let dim = p.nrows();
    let h = t / steps as f64;
    let ih = C64::new(0.0, h);
    let mut u = identity(dim);
    if t == 0.0 {
        return Ok(u);
    }

    // α at the step start, midpoint and end; the inner case advances the
    // conjugating exponentials incrementally.
    let mut stepper: Box<dyn FnMut(f64) -> Result<Element>> = match flow {
        Flow::Inner { generator } => {
            let e_half = expm_unchecked(&(generator * C64::new(0.5 * h, 0.0)));
            let e_half_inv = expm_unchecked(&(generator * C64::new(-0.5 * h, 0.0)));
            let mut x = identity(dim);
            let mut x_inv = identity(dim);
            Box::new(move |_s| {
                x = &x * &e_half;
                x_inv = &e_half_inv * &x_inv;
                Ok(&x * p * &x_inv)
            })
        }
        _ => Box::new(|s| flow.eval(s, p)),
    };

    let mut q0 = p.clone();
    for k in 0..steps {
        let s = k as f64 * h;
        let qm = stepper(s + 0.5 * h)?;
        let q1 = stepper(s + h)?;
        let k1 = &u * &q0 * ih;
        let k2 = (&u + &k1 * C64::new(0.5, 0.0)) * &qm * ih;
        let k3 = (&u + &k2 * C64::new(0.5, 0.0)) * &qm * ih;
        let k4 = (&u + &k3) * &q1 * ih;
        u += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(1.0 / 6.0, 0.0);
        q0 = q1;
    }
    Ok(u)
}

pub fn default_ode_steps(t: f64) -> usize {
    ((t.abs() * DEFAULT_ODE_STEPS_PER_UNIT as f64).ceil() as usize).max(8)
}

/// `e^{it(h+P)} e^{-ith}`: the cocycle of `Ad e^{ith}` perturbed by `P`.
pub fn closed_form_cocycle(h: &Element, p: &Element, t: f64) -> Result<Element> {
    check_element(h)?;
    check_dim(p, h.nrows())?;
    let it = C64::new(0.0, t);
    Ok(matrix_exponential(&((h + p) * it))? * matrix_exponential(&(h * -it))?)
}

/// Closed form for a base flow `Ad e^{tG}` (so `G = ih`).
pub fn closed_form_from_generator(g: &Element, p: &Element, t: f64) -> Result<Element> {
    check_dim(p, g.nrows())?;
    let shifted = g + p * C64::new(0.0, 1.0);
    Ok(matrix_exponential(&(shifted * C64::new(t, 0.0)))? * matrix_exponential(&(g * C64::new(-t, 0.0)))?)
}

/// `u_t` for the base flow and perturbation by the chosen method, with
/// default discretization parameters.
pub fn cocycle_value(flow: &Flow, p: &Element, t: f64, method: CocycleMethod) -> Result<Element> {
    match method {
        CocycleMethod::Dyson => Ok(dyson_cocycle(flow, p, t, DEFAULT_DYSON_ORDER, DEFAULT_DYSON_NODES)?.u),
        CocycleMethod::Ode => ode_cocycle(flow, p, t, default_ode_steps(t)),
        CocycleMethod::ClosedForm => {
            let g = flow.inner_generator().ok_or(FlowError::RequiresInnerFlow)?;
            closed_form_from_generator(&g, p, t)
        }
    }
}

/// `u_t α_t(B) u_t^{-1}`.
pub fn perturbed_flow_eval(flow: &Flow, p: &Element, t: f64, b: &Element, method: CocycleMethod) -> Result<Element> {
    check_dim(b, flow.dim())?;
    let u = cocycle_value(flow, p, t, method)?;
    let u_inv = checked_inverse(&u)?;
    Ok(&u * flow.eval(t, b)? * u_inv)
}

/// Piecewise-linear table of cocycle values.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCocycle {
    times: Vec<f64>,
    values: Vec<Element>,
}

impl TabulatedCocycle {
    pub fn new(times: Vec<f64>, values: Vec<Element>) -> Result<Self> {
        if times.is_empty() {
            return Err(FlowError::EmptyGrid);
        }
        if times.len() != values.len() {
            return Err(FlowError::InvalidArgument("times and values differ in length".into()));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(FlowError::InvalidArgument("tabulated times must be strictly increasing".into()));
        }
        let dim = values[0].nrows();
        for v in &values {
            check_element(v)?;
            check_dim(v, dim)?;
        }
        Ok(TabulatedCocycle { times, values })
    }

    /// Samples `f` on `[lo, hi]` with the given step.
    pub fn sample<F: FnMut(f64) -> Result<Element>>(lo: f64, hi: f64, step: f64, mut f: F) -> Result<Self> {
        let k = ((hi - lo) / step).round() as i64;
        let times: Vec<f64> = (0..=k).map(|i| lo + i as f64 * step).collect();
        let values = times.iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
        Self::new(times, values)
    }

    pub fn dim(&self) -> usize {
        self.values[0].nrows()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Element] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> Result<Element> {
        let lo = self.times[0];
        let hi = *self.times.last().expect("nonempty");
        if !(t >= lo && t <= hi) {
            return Err(FlowError::OutOfRange { t, lo, hi });
        }
        let k = self.times.partition_point(|&x| x <= t);
        if k == self.times.len() {
            return Ok(self.values[k - 1].clone());
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        if t == t0 {
            return Ok(self.values[k - 1].clone());
        }
        let lambda = (t - t0) / (t1 - t0);
        Ok(&self.values[k - 1] * C64::new(1.0 - lambda, 0.0) + &self.values[k] * C64::new(lambda, 0.0))
    }
}

/// A map `t -> u_t` together with how it is computed.
#[derive(Debug, Clone, PartialEq)]
pub enum Cocycle {
    /// `e^{it(h+P)} e^{-ith}` over the base flow `Ad e^{ith}`.
    ClosedForm { h: Element, p: Element },
    Dyson {
        flow: Flow,
        p: Element,
        order: usize,
        nodes: usize,
    },
    Ode {
        flow: Flow,
        p: Element,
        steps_per_unit: usize,
    },
    Tabulated(TabulatedCocycle),
    /// `v_t = w^{-1} u_t α_t(w)`.
    Similar {
        w: Element,
        w_inv: Element,
        cocycle: Box<Cocycle>,
        flow: Flow,
    },
}

impl Cocycle {
    /// Dyson cocycle whose truncation order keeps the tail below `tol` on
    /// `|t| <= radius`.
    pub fn dyson_for_range(flow: Flow, p: Element, radius: f64, tol: f64) -> Result<Self> {
        let bound = series_growth(&flow, radius)?;
        let x = radius * bound.bound(radius) * p.norm();
        Ok(Cocycle::Dyson {
            flow,
            p,
            order: dyson_order_for(x, tol).max(DEFAULT_DYSON_ORDER),
            nodes: DEFAULT_DYSON_NODES,
        })
    }

    pub fn provenance(&self) -> &'static str {
        match self {
            Cocycle::ClosedForm { .. } => "closed_form",
            Cocycle::Dyson { .. } => "dyson",
            Cocycle::Ode { .. } => "ode",
            Cocycle::Tabulated(_) => "tabulated",
            Cocycle::Similar { .. } => "similar",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Cocycle::ClosedForm { h, .. } => h.nrows(),
            Cocycle::Dyson { p, .. } | Cocycle::Ode { p, .. } => p.nrows(),
            Cocycle::Tabulated(tab) => tab.dim(),
            Cocycle::Similar { w, .. } => w.nrows(),
        }
    }

    pub fn eval(&self, t: f64) -> Result<Element> {
        match self {
            Cocycle::ClosedForm { h, p } => closed_form_cocycle(h, p, t),
            Cocycle::Dyson { flow, p, order, nodes } => Ok(dyson_cocycle(flow, p, t, *order, *nodes)?.u),
            Cocycle::Ode {
                flow,
                p,
                steps_per_unit,
            } => {
                let steps = ((t.abs() * *steps_per_unit as f64).ceil() as usize).max(8);
                ode_cocycle(flow, p, t, steps)
            }
            Cocycle::Tabulated(tab) => tab.eval(t),
            Cocycle::Similar {
                w,
                w_inv,
                cocycle,
                flow,
            } => Ok(w_inv * cocycle.eval(t)? * flow.eval(t, w)?),
        }
    }
}

/// Defects of both orderings of the cocycle identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CocycleDefect {
    /// `||u_{s+t} - u_t α_t(u_s)||_F`.
    pub lemma_order: f64,
    /// `||u_{s+t} - u_s α_s(u_t)||_F`.
    pub companion_order: f64,
}

impl CocycleDefect {
    pub fn max(&self) -> f64 {
        self.lemma_order.max(self.companion_order)
    }
}

fn is_exact_identity(a: &Element) -> bool {
    *a == identity(a.nrows())
}

pub fn cocycle_defect(flow: &Flow, u: &Cocycle, s: f64, t: f64) -> Result<CocycleDefect> {
    CachedCocycle::new(u).defect(flow, s, t)
}

/// Memoized evaluation of a cocycle, keyed by the exact time value.
#[derive(Debug)]
pub struct CachedCocycle<'a> {
    cocycle: &'a Cocycle,
    values: HashMap<u64, Element>,
}

impl<'a> CachedCocycle<'a> {
    pub fn new(cocycle: &'a Cocycle) -> Self {
        CachedCocycle {
            cocycle,
            values: HashMap::new(),
        }
    }

    pub fn eval(&mut self, t: f64) -> Result<Element> {
        if let Some(v) = self.values.get(&t.to_bits()) {
            return Ok(v.clone());
        }
        let v = self.cocycle.eval(t)?;
        self.values.insert(t.to_bits(), v.clone());
        Ok(v)
    }

    pub fn defect(&mut self, flow: &Flow, s: f64, t: f64) -> Result<CocycleDefect> {
        let zero = self.eval(0.0)?;
        if (s == 0.0 || t == 0.0) && is_exact_identity(&zero) {
            // u_0 = 1 and α_0 = id make both identities exact.
            return Ok(CocycleDefect {
                lemma_order: 0.0,
                companion_order: 0.0,
            });
        }
        let us = self.eval(s)?;
        let ut = self.eval(t)?;
        let ust = self.eval(s + t)?;
        let lemma_order = (&ust - &ut * flow.eval(t, &us)?).norm();
        let companion_order = (&ust - &us * flow.eval(s, &ut)?).norm();
        Ok(CocycleDefect {
            lemma_order,
            companion_order,
        })
    }
}

/// Largest defects over all pairs drawn from `grid x grid`.
pub fn max_defect_on_grid(flow: &Flow, u: &Cocycle, grid: &[f64]) -> Result<CocycleDefect> {
    let mut cache = CachedCocycle::new(u);
    let mut worst = CocycleDefect {
        lemma_order: 0.0,
        companion_order: 0.0,
    };
    for &s in grid {
        for &t in grid {
            let d = cache.defect(flow, s, t)?;
            worst.lemma_order = worst.lemma_order.max(d.lemma_order);
            worst.companion_order = worst.companion_order.max(d.companion_order);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceBounds {
    /// `sup_{||B||_F = 1} ||α^P_t(B) - α_t(B)||_F`, computed exactly as an
    /// induced superoperator norm.
    pub lhs_flow: f64,
    /// `||u^P_t - 1||_F`.
    pub lhs_cocycle: f64,
    /// `M e^{ξ|t|} (e^{M |t| ||P||_F} - 1)`.
    pub rhs: f64,
}

impl DistanceBounds {
    /// The estimate bounds the cocycle distance only; `lhs_flow` can exceed
    /// `rhs` (conjugation by `u` moves elements by up to about twice
    /// `||u - 1||`).
    pub fn holds(&self) -> bool {
        self.lhs_cocycle <= self.rhs
    }
}

/// `M e^{ξ|t|} (e^{M |t| p_norm} - 1)`.
pub fn distance_rhs(bound: &GrowthBound, p_norm: f64, t: f64) -> f64 {
    bound.m * (bound.xi * t.abs()).exp() * ((bound.m * t.abs() * p_norm).exp_m1())
}

/// Both sides of the perturbation distance estimate. The cocycle is taken in
/// closed form for inner base flows and by RK4 otherwise.
pub fn perturbation_distance_bounds(flow: &Flow, p: &Element, t: f64, bound: &GrowthBound) -> Result<DistanceBounds> {
    check_dim(p, flow.dim())?;
    let dim = flow.dim();
    let method = if flow.inner_generator().is_some() {
        CocycleMethod::ClosedForm
    } else {
        CocycleMethod::Ode
    };
    let u = cocycle_value(flow, p, t, method)?;
    let u_inv = checked_inverse(&u)?;
    let base = flow.superoperator(t)?;
    let perturbed = SuperOp::conjugation(&u, &u_inv).compose(&base)?;
    let lhs_flow = perturbed.sub(&base)?.norm(SuperOpNormKind::FrobeniusInduced).value;
    let lhs_cocycle = (&u - identity(dim)).norm();
    let rhs = distance_rhs(bound, p.norm(), t);
    Ok(DistanceBounds {
        lhs_flow,
        lhs_cocycle,
        rhs,
    })
}
