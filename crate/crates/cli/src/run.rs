//! Scenario execution: tasks in order, one CSV per task, then the summary.

use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use crate::report::{write_atomic, Report, TaskSummary};
use crate::scenario::{self, ConfigError, Prepared};
use crate::tasks::run_task;
use crate::verify::{verify_suite, Level, SuiteOutcome};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

/// Everything a run produces, in write order. The summary is last.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub report: Report,
}

/// Runs every task in memory. A failing task is recorded with its error
/// and the run continues. With `timing` off, `wall_time_ms` is written as
/// zero so that reports are byte-identical across runs.
pub fn run_prepared(prep: &Prepared, timing: bool) -> RunOutput {
    let name = &prep.scenario.name;
    let mut files = Vec::new();
    let mut tasks = Vec::new();
    for &task in &prep.scenario.tasks {
        let start = Instant::now();
        let result = run_task(prep, task);
        let wall_time_ms = if timing { start.elapsed().as_millis() as u64 } else { 0 };
        let csv_name = format!("{}.csv", task.name());
        let summary = match result {
            Ok(out) => {
                files.push((csv_name.clone(), out.table.to_csv()));
                TaskSummary {
                    scenario: name.clone(),
                    task: task.name().into(),
                    pass: out.pass,
                    max_residual: out.max_residual,
                    wall_time_ms,
                    csv: Some(csv_name),
                    error: None,
                }
            }
            Err(e) => TaskSummary {
                scenario: name.clone(),
                task: task.name().into(),
                pass: false,
                max_residual: f64::NAN,
                wall_time_ms,
                csv: None,
                error: Some(e),
            },
        };
        tasks.push(summary);
    }
    let report = Report::new(name.clone(), prep.scenario.seed, tasks);
    files.push(("summary.json".into(), report.to_json()));
    RunOutput { files, report }
}

fn write_all(out_dir: &Path, files: &[(String, Vec<u8>)]) -> std::io::Result<()> {
    for (name, bytes) in files {
        write_atomic(out_dir, name, bytes)?;
    }
    Ok(())
}

pub fn run_scenario(config_path: &Path, out_dir: &Path, timing: bool) -> Result<Report, RunError> {
    let prep = scenario::load(config_path)?;
    run_and_write(&prep, out_dir, timing)
}

pub fn run_and_write(prep: &Prepared, out_dir: &Path, timing: bool) -> Result<Report, RunError> {
    let output = run_prepared(prep, timing);
    write_all(out_dir, &output.files)?;
    Ok(output.report)
}

/// Runs the property suite and writes `verify.csv`, `coverage.csv` and
/// `summary.json`.
pub fn verify_and_write(seed: u64, level: Level, out_dir: &Path, timing: bool) -> Result<SuiteOutcome, RunError> {
    let outcome = verify_suite(seed, level);
    let files = vec![
        ("verify.csv".to_string(), outcome.table().to_csv()),
        ("coverage.csv".to_string(), outcome.coverage().to_csv()),
        ("summary.json".to_string(), outcome.report(timing).to_json()),
    ];
    write_all(out_dir, &files)?;
    Ok(outcome)
}
