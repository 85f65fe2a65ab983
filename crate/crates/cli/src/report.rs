//! CSV tables, the JSON summary, and atomic file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub const SCHEMA: &str = "flowlab.report.v1";

/// Columns shared by the perturb, verify_cocycle and bounds tables.
pub const COCYCLE_COLUMNS: [&str; 8] = [
    "t",
    "method",
    "norm_u_frobenius",
    "discrepancy",
    "cocycle_defect_max",
    "lhs_cocycle",
    "rhs_bound",
    "pass",
];
pub const RELATION_COLUMNS: [&str; 7] = ["spec", "op", "residual", "lhs", "rhs", "gauge", "pass"];
pub const PROFILE_COLUMNS: [&str; 4] = ["n", "diff_frobenius", "norm_frobenius", "quad_error_estimate"];
pub const DECOMPOSE_COLUMNS: [&str; 6] = ["n", "norm_w_minus_1", "stability_u", "stability_v", "defect_v", "pass"];
pub const VERIFY_COLUMNS: [&str; 8] = [
    "property",
    "module",
    "ops",
    "cases",
    "skipped",
    "max_residual",
    "tolerance",
    "pass",
];
pub const COVERAGE_COLUMNS: [&str; 3] = ["op", "module", "properties"];

/// Shortest round-trip scientific notation, so reports are exact and stable.
pub fn sci(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn header(&self) -> &[&'static str] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskSummary {
    pub scenario: String,
    pub task: String,
    pub pass: bool,
    pub max_residual: f64,
    pub wall_time_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub scenario: String,
    pub seed: u64,
    pub rng: &'static str,
    pub pass: bool,
    pub tasks: Vec<TaskSummary>,
}

impl Report {
    pub fn new(scenario: impl Into<String>, seed: u64, tasks: Vec<TaskSummary>) -> Self {
        Report {
            schema: SCHEMA,
            scenario: scenario.into(),
            seed,
            rng: flowlab_core::sample::RNG_NAME,
            pass: tasks.iter().all(|t| t.pass),
            tasks,
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("report serializes");
        bytes.push(b'\n');
        bytes
    }
}

/// Writes `bytes` to `dir/name` through a temporary file in the same
/// directory and a rename, so readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    let target = dir.join(name);
    tmp.persist(&target).map_err(|e| e.error)?;
    Ok(target)
}
