//! JSON matrix literals: an array of rows, each entry either a real number
//! or a two-element array `[re, im]`.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::algebra::Element;
use crate::error::{FlowError, Result};
use crate::linalg::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixLiteral(pub Element);

#[derive(Deserialize, Serialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

pub fn parse_matrix(value: &Value) -> Result<Element> {
    let rows: Vec<Vec<Entry>> = serde_json::from_value(value.clone())
        .map_err(|e| FlowError::Literal(format!("expected an array of rows: {e}")))?;
    from_rows(rows)
}

fn from_rows(rows: Vec<Vec<Entry>>) -> Result<Element> {
    let n = rows.len();
    if n == 0 {
        return Err(FlowError::Literal("empty matrix".into()));
    }
    let mut out = Element::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        if row.len() != n {
            return Err(FlowError::Literal(format!(
                "row {i} has {} entries, expected {n} (matrices must be square)",
                row.len()
            )));
        }
        for (j, e) in row.into_iter().enumerate() {
            let z = match e {
                Entry::Real(re) => C64::new(re, 0.0),
                Entry::Complex([re, im]) => C64::new(re, im),
            };
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(FlowError::Literal(format!("entry ({i},{j}) is not finite")));
            }
            out[(i, j)] = z;
        }
    }
    Ok(out)
}

/// Literal for `a`; purely real entries are written as plain numbers.
pub fn to_literal(a: &Element) -> Value {
    let rows: Vec<Vec<Entry>> = (0..a.nrows())
        .map(|i| {
            (0..a.ncols())
                .map(|j| {
                    let z = a[(i, j)];
                    if z.im == 0.0 {
                        Entry::Real(z.re)
                    } else {
                        Entry::Complex([z.re, z.im])
                    }
                })
                .collect()
        })
        .collect();
    serde_json::to_value(rows).expect("finite entries serialize")
}

impl<'de> Deserialize<'de> for MatrixLiteral {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<Entry>>::deserialize(d)?;
        from_rows(rows).map(MatrixLiteral).map_err(D::Error::custom)
    }
}

impl Serialize for MatrixLiteral {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_literal(&self.0).serialize(s)
    }
}
