//! Quadrature rules: Gauss-Legendre panels with a spectral integration
//! matrix (for iterated simplex integrals), cached Gauss-Hermite rules, and
//! an adaptive Gauss-Legendre integrator used as an independent oracle.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::hermite::GaussHermite;
use gauss_quad::legendre::GaussLegendre;

/// Gauss-Legendre rule on `[-1, 1]` together with the matrix mapping
/// samples `f(x_j)` to the running integrals `∫_{-1}^{x_i} f`.
#[derive(Debug, Clone)]
pub struct LegendrePanel {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Row-major `q x q`.
    pub running: Vec<f64>,
}

fn legendre_values(x: f64, max_degree: usize) -> Vec<f64> {
    let mut p = vec![0.0; max_degree + 1];
    p[0] = 1.0;
    if max_degree >= 1 {
        p[1] = x;
    }
    for k in 1..max_degree {
        p[k + 1] = ((2 * k + 1) as f64 * x * p[k] - k as f64 * p[k - 1]) / (k + 1) as f64;
    }
    p
}

impl LegendrePanel {
    pub fn new(q: usize) -> Self {
        let q = q.max(1);
        let rule = GaussLegendre::new(NonZeroUsize::new(q).expect("q >= 1"));
        let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();

        // Interpolate in the Legendre basis (exact discrete orthogonality at
        // the Gauss nodes), then integrate each basis polynomial from -1.
        let p_at_nodes: Vec<Vec<f64>> = nodes.iter().map(|&x| legendre_values(x, q)).collect();
        let antideriv = |x_idx: usize, k: usize| -> f64 {
            let p = &p_at_nodes[x_idx];
            if k == 0 {
                nodes[x_idx] + 1.0
            } else {
                (p[k + 1] - p[k - 1]) / (2 * k + 1) as f64
            }
        };
        let mut running = vec![0.0; q * q];
        for i in 0..q {
            for j in 0..q {
                let mut s = 0.0;
                for k in 0..q {
                    s += (2 * k + 1) as f64 / 2.0 * weights[j] * p_at_nodes[j][k] * antideriv(i, k);
                }
                running[i * q + j] = s;
            }
        }
        LegendrePanel {
            nodes,
            weights,
            running,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

static LEGENDRE_CACHE: OnceLock<Mutex<HashMap<usize, Arc<LegendrePanel>>>> = OnceLock::new();
static HERMITE_CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();

pub fn legendre_panel(q: usize) -> Arc<LegendrePanel> {
    let cache = LEGENDRE_CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(q)
        .or_insert_with(|| Arc::new(LegendrePanel::new(q)))
        .clone()
}

/// Nodes and weights for `∫ e^{-s^2} f(s) ds`, sorted by node.
pub fn hermite_rule(nodes: usize) -> Arc<Vec<(f64, f64)>> {
    let cache = HERMITE_CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(nodes)
        .or_insert_with(|| {
            let rule = GaussHermite::new(NonZeroUsize::new(nodes.max(1)).expect("nodes >= 1"));
            let mut pairs = rule.as_node_weight_pairs().to_vec();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            Arc::new(pairs)
        })
        .clone()
}

/// Adaptive bisection on a 10-point Gauss-Legendre rule until the two-half
/// estimate agrees with the whole-interval one to `tol` (absolute).
pub fn adaptive_integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let panel = legendre_panel(10);
    let rule = |lo: f64, hi: f64| -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        panel
            .nodes
            .iter()
            .zip(&panel.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    };
    fn recurse<R: Fn(f64, f64) -> f64>(rule: &R, lo: f64, hi: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let mid = 0.5 * (lo + hi);
        let left = rule(lo, mid);
        let right = rule(mid, hi);
        if depth == 0 || (left + right - whole).abs() <= tol {
            return left + right;
        }
        recurse(rule, lo, mid, left, 0.5 * tol, depth - 1) + recurse(rule, mid, hi, right, 0.5 * tol, depth - 1)
    }
    let whole = rule(a, b);
    recurse(&rule, a, b, whole, tol, 40)
}
