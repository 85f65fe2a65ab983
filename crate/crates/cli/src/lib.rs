//! Scenario runner and property-suite front end for `flowlab`.

pub mod report;
pub mod run;
pub mod scenario;
pub mod tasks;
pub mod verify;

pub use report::{Report, Table, TaskSummary, SCHEMA};
pub use run::{run_and_write, run_prepared, run_scenario, verify_and_write, RunError, RunOutput};
pub use scenario::{ConfigError, Prepared, Scenario, Task, Tolerances};
pub use verify::{verify_suite, Level, SuiteOutcome};

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const PROPERTY_FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
}
