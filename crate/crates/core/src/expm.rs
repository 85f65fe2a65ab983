//! Matrix exponential by scaling and squaring with a degree-13 Taylor kernel.

use crate::algebra::{check_element, Element};
use crate::error::{FlowError, Result};
use crate::linalg::C64;

const DEGREE: usize = 13;
/// Scaled argument bound; the degree-13 remainder at this radius is below 1e-15.
const THETA: f64 = 0.5;
const OVERFLOW_NORM: f64 = 700.0;

pub fn matrix_exponential(g: &Element) -> Result<Element> {
    check_element(g)?;
    let norm = g.norm();
    if norm > OVERFLOW_NORM {
        return Err(FlowError::ExpOverflow(norm));
    }
    Ok(expm_unchecked(g))
}

/// Exponential without input validation; callers guarantee a finite
/// square argument of moderate norm.
pub(crate) fn expm_unchecked(g: &Element) -> Element {
    let n = g.nrows();
    let norm = g.norm();
    let squarings = if norm > THETA {
        (norm / THETA).log2().ceil() as i32
    } else {
        0
    };
    let scaled = g * C64::new(0.5f64.powi(squarings), 0.0);

    // Horner: I + A(I + A/2(I + A/3(...)))
    let id = Element::identity(n, n);
    let mut acc = id.clone();
    for k in (1..=DEGREE).rev() {
        acc = &id + (&scaled * acc) * C64::new(1.0 / k as f64, 0.0);
    }
    for _ in 0..squarings {
        acc = &acc * &acc;
    }
    acc
}
