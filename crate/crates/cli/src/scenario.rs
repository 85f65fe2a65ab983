//! Scenario configs: parsing, defaults and validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use flowlab_core::flow::DEFAULT_H_STEP;
use flowlab_core::{Element, Flow, FlowSpec, MatrixLiteral, NestAlgebra};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}, column {column}, field `{field}`: {message}")]
    Parse {
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            message: message.to_string(),
        }
    }

    /// The offending field, when the error names one.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Io { .. } => None,
            ConfigError::Parse { field, .. } | ConfigError::Invalid { field, .. } => Some(field),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Perturb,
    VerifyCocycle,
    Bounds,
    Extract,
    Relate,
    Smooth,
    Decompose,
    Suite,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Perturb => "perturb",
            Task::VerifyCocycle => "verify_cocycle",
            Task::Bounds => "bounds",
            Task::Extract => "extract",
            Task::Relate => "relate",
            Task::Smooth => "smooth",
            Task::Decompose => "decompose",
            Task::Suite => "suite",
        }
    }

    fn needs_perturbation(self) -> bool {
        matches!(self, Task::Perturb | Task::VerifyCocycle | Task::Bounds | Task::Decompose)
    }
}

/// Named tolerances; unknown names are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Pairwise method discrepancy.
    pub agreement: f64,
    /// Cocycle identity defect.
    pub defect: f64,
    /// Solver and reconjugation residuals.
    pub residual: f64,
    /// Quadrature error estimate, relative to `||A||`.
    pub quadrature: f64,
    /// Decomposition round trip.
    pub round_trip: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            agreement: 1e-7,
            defect: 1e-8,
            residual: 1e-6,
            quadrature: 1e-8,
            round_trip: 1e-9,
        }
    }
}

impl Tolerances {
    pub const NAMES: [&'static str; 5] = ["agreement", "defect", "residual", "quadrature", "round_trip"];

    pub fn from_map(map: &BTreeMap<String, f64>) -> Result<Self, ConfigError> {
        let mut tol = Tolerances::default();
        for (name, &value) in map {
            let field = format!("tolerances.{name}");
            if !(value > 0.0 && value.is_finite()) {
                return Err(ConfigError::invalid(field, format!("must be positive and finite, got {value}")));
            }
            let slot = match name.as_str() {
                "agreement" => &mut tol.agreement,
                "defect" => &mut tol.defect,
                "residual" => &mut tol.residual,
                "quadrature" => &mut tol.quadrature,
                "round_trip" => &mut tol.round_trip,
                _ => {
                    return Err(ConfigError::invalid(
                        field,
                        format!("unknown tolerance; expected one of {}", Tolerances::NAMES.join(", ")),
                    ))
                }
            };
            *slot = value;
        }
        Ok(tol)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingConfig {
    /// Element to smooth; defaults to the top-right matrix unit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<LiteralField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<f64>>,
    /// Mollifier growth parameter; defaults to the certified ξ of the flow.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_list: Option<Vec<f64>>,
}

/// Matrix literal that also serializes back to JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct LiteralField(pub Element);

impl<'de> Deserialize<'de> for LiteralField {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        MatrixLiteral::deserialize(d).map(|m| LiteralField(m.0))
    }
}

impl Serialize for LiteralField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        flowlab_core::literal::to_literal(&self.0).serialize(s)
    }
}

fn default_h_step() -> f64 {
    DEFAULT_H_STEP
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub algebra: NestAlgebra,
    pub flow: FlowSpec,
    /// Second flow for `relate`; defaults to the identity flow.
    #[serde(default)]
    pub flow_b: Option<FlowSpec>,
    #[serde(default)]
    pub perturbation: Option<LiteralField>,
    #[serde(default)]
    pub time_grid: Vec<f64>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub smoothing: SmoothingConfig,
    #[serde(default)]
    pub decompose: DecomposeConfig,
    #[serde(default = "default_h_step")]
    pub h_step: f64,
}

/// A validated scenario with its flows built.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub flow: Flow,
    pub flow_b: Flow,
    pub perturbation: Option<Element>,
    pub tolerances: Tolerances,
}

impl Prepared {
    pub fn algebra(&self) -> &NestAlgebra {
        &self.scenario.algebra
    }

    pub fn dim(&self) -> usize {
        self.scenario.algebra.dim()
    }
}

pub fn load(path: &Path) -> Result<Prepared, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<Prepared, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = match e.path().to_string() {
            p if p == "." => "(root)".to_string(),
            p => p,
        };
        let inner = e.into_inner();
        ConfigError::Parse {
            line: inner.line(),
            column: inner.column(),
            field,
            message: strip_position(&inner.to_string()),
        }
    })?;
    validate(scenario)
}

/// serde_json appends " at line L column C"; the position is reported separately.
fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(k) => message[..k].to_string(),
        None => message.to_string(),
    }
}

fn check_finite_sorted(field: &str, values: &[f64], strict: bool) -> Result<(), ConfigError> {
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(ConfigError::invalid(field, format!("entry {k} is not finite")));
    }
    for (k, w) in values.windows(2).enumerate() {
        let ordered = if strict { w[0] < w[1] } else { w[0] <= w[1] };
        if !ordered {
            return Err(ConfigError::invalid(
                field,
                format!("must be sorted ascending; entry {} ({}) follows {}", k + 1, w[1], w[0]),
            ));
        }
    }
    Ok(())
}

fn build_flow(field: &str, spec: &FlowSpec, dim: usize) -> Result<Flow, ConfigError> {
    let flow = spec.build().map_err(|e| ConfigError::invalid(field, e))?;
    if flow.dim() != dim {
        return Err(ConfigError::invalid(
            field,
            format!("dimension {} does not match algebra dimension {dim}", flow.dim()),
        ));
    }
    Ok(flow)
}

fn check_literal_dim(field: &str, a: &Element, dim: usize) -> Result<(), ConfigError> {
    if a.nrows() != dim {
        return Err(ConfigError::invalid(
            field,
            format!("dimension {} does not match algebra dimension {dim}", a.nrows()),
        ));
    }
    Ok(())
}

pub fn validate(scenario: Scenario) -> Result<Prepared, ConfigError> {
    if scenario.name.trim().is_empty() {
        return Err(ConfigError::invalid("name", "must not be empty"));
    }
    if scenario.tasks.is_empty() {
        return Err(ConfigError::invalid("tasks", "at least one task is required"));
    }
    check_finite_sorted("time_grid", &scenario.time_grid, false)?;
    if !(scenario.h_step > 0.0 && scenario.h_step.is_finite()) {
        return Err(ConfigError::invalid("h_step", "must be positive and finite"));
    }
    let tolerances = Tolerances::from_map(&scenario.tolerances)?;
    let dim = scenario.algebra.dim();
    let flow = build_flow("flow", &scenario.flow, dim)?;
    let flow_b = match &scenario.flow_b {
        Some(spec) => build_flow("flow_b", spec, dim)?,
        None => Flow::identity(dim),
    };
    if let Some(p) = &scenario.perturbation {
        check_literal_dim("perturbation", &p.0, dim)?;
    }
    if let Some(a) = &scenario.smoothing.element {
        check_literal_dim("smoothing.element", &a.0, dim)?;
    }
    if let Some(n_list) = &scenario.smoothing.n_list {
        check_positive_increasing("smoothing.n_list", n_list)?;
    }
    if let Some(xi) = scenario.smoothing.xi {
        if !xi.is_finite() {
            return Err(ConfigError::invalid("smoothing.xi", "must be finite"));
        }
    }
    if let Some(n_list) = &scenario.decompose.n_list {
        check_positive_increasing("decompose.n_list", n_list)?;
    }
    if let Some(h_list) = &scenario.decompose.h_list {
        if h_list.is_empty() || h_list.iter().any(|h| !(*h > 0.0)) || h_list.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(ConfigError::invalid("decompose.h_list", "must be positive and strictly decreasing"));
        }
    }
    if let Some(t0) = scenario.decompose.t0 {
        if !t0.is_finite() {
            return Err(ConfigError::invalid("decompose.t0", "must be finite"));
        }
    }
    for task in &scenario.tasks {
        if task.needs_perturbation() && scenario.perturbation.is_none() {
            return Err(ConfigError::invalid(
                "perturbation",
                format!("required by task `{}`", task.name()),
            ));
        }
        if matches!(task, Task::Perturb | Task::VerifyCocycle | Task::Bounds | Task::Decompose)
            && scenario.time_grid.is_empty()
        {
            return Err(ConfigError::invalid(
                "time_grid",
                format!("required (non-empty) by task `{}`", task.name()),
            ));
        }
    }
    let perturbation = scenario.perturbation.as_ref().map(|p| p.0.clone());
    Ok(Prepared {
        scenario,
        flow,
        flow_b,
        perturbation,
        tolerances,
    })
}

fn check_positive_increasing(field: &str, values: &[f64]) -> Result<(), ConfigError> {
    if values.is_empty() {
        return Err(ConfigError::invalid(field, "must not be empty"));
    }
    if let Some(k) = values.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(ConfigError::invalid(field, format!("entry {k} must be positive and finite")));
    }
    check_finite_sorted(field, values, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "minimal",
        "algebra": {"dim": 2, "nest_dims": [0, 1, 2]},
        "flow": {"type": "inner", "generator": [[0, 0], [0, 0]]},
        "perturbation": [[0, 0], [0, 0]],
        "time_grid": [-1, 0, 1],
        "tasks": ["verify_cocycle"]
    }"#;

    #[test]
    fn minimal_parses_with_defaults() {
        let p = parse(MINIMAL).unwrap();
        assert_eq!(p.tolerances, Tolerances::default());
        assert_eq!(p.scenario.seed, 0);
        assert_eq!(p.scenario.h_step, DEFAULT_H_STEP);
        assert_eq!(p.flow_b.dim(), 2);
    }

    #[test]
    fn unsorted_grid_names_the_field() {
        let text = MINIMAL.replace("[-1, 0, 1]", "[0, -1, 1]");
        let err = parse(&text).unwrap_err();
        assert_eq!(err.field(), Some("time_grid"));
        assert!(err.to_string().contains("sorted"), "{err}");
    }

    #[test]
    fn type_errors_carry_position_and_path() {
        let text = MINIMAL.replace("\"time_grid\": [-1, 0, 1]", "\"time_grid\": [-1, \"x\", 1]");
        match parse(&text).unwrap_err() {
            ConfigError::Parse { line, field, .. } => {
                assert_eq!(line, 6);
                assert_eq!(field, "time_grid[1]");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_tolerance_and_task() {
        let text = MINIMAL.replace("\"tasks\"", "\"tolerances\": {\"defekt\": 1e-3}, \"tasks\"");
        assert_eq!(parse(&text).unwrap_err().field(), Some("tolerances.defekt"));
        let text = MINIMAL.replace("verify_cocycle", "verify");
        assert_eq!(parse(&text).unwrap_err().field(), Some("tasks[0]"));
    }

    #[test]
    fn required_fields_per_task() {
        let text = MINIMAL.replace("\"perturbation\": [[0, 0], [0, 0]],", "");
        let err = parse(&text).unwrap_err();
        assert_eq!(err.field(), Some("perturbation"));
        let text = MINIMAL.replace("[[0, 0], [0, 0]],\n        \"time", "[[0, 0, 0], [0, 0, 0], [0, 0, 0]],\n        \"time");
        assert_eq!(parse(&text).unwrap_err().field(), Some("perturbation"));
    }
}
