use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use flowlab_cli::{exit, run_and_write, run_scenario, scenario, verify_and_write, Level, Report, RunError};

#[derive(Parser)]
#[command(name = "flowlab", version, about = "Flows, cocycles and smoothing on finite nest algebras")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a JSON scenario config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run the randomized property suite.
    Verify {
        #[arg(long, default_value = "quick")]
        level: Level,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Smoothing profile of one element under an inner flow.
    Smooth {
        #[command(flatten)]
        common: CommonArgs,
        /// Element to smooth (matrix literal); defaults to the top-right unit.
        #[arg(long)]
        element: Option<String>,
        /// Comma-separated increasing list of n.
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<f64>>,
        #[arg(long, allow_hyphen_values = true)]
        xi: Option<f64>,
    },
    /// Cocycle method agreement, cocycle law and distance bound on a time grid.
    Perturb {
        #[command(flatten)]
        common: CommonArgs,
        /// Perturbation P (matrix literal).
        #[arg(long)]
        perturbation: String,
        /// Comma-separated sorted time grid.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-2,-1,0,1,2")]
        time_grid: Vec<f64>,
    },
    /// Extract the inner generator of a flow.
    Extract {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        h_step: Option<f64>,
    },
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long)]
    out: PathBuf,
    /// Write wall_time_ms as 0 so reports are byte-identical across runs.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct CommonArgs {
    /// Inner-flow generator G (matrix literal); the flow is Ad e^{tG}.
    #[arg(long, conflicts_with = "flow")]
    generator: Option<String>,
    /// Full flow description (JSON), as in the config `flow` field.
    #[arg(long)]
    flow: Option<String>,
    /// Nest dimensions; defaults to the trivial nest [0, dim].
    #[arg(long, value_delimiter = ',')]
    nest_dims: Option<Vec<usize>>,
    #[arg(long, default_value = "shortcut")]
    name: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tolerance override, `name=value`; repeatable.
    #[arg(long = "tolerance", value_parser = parse_tolerance)]
    tolerances: Vec<(String, f64)>,
    #[command(flatten)]
    output: OutputArgs,
}

fn parse_tolerance(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or("expected name=value")?;
    let value = value.parse::<f64>().map_err(|e| format!("{name}: {e}"))?;
    Ok((name.to_string(), value))
}

fn parse_json(flag: &str, text: &str) -> Result<Value, String> {
    serde_json::from_str(text).map_err(|e| format!("--{flag}: {e}"))
}

/// Builds the config a shortcut stands for; it is then validated exactly
/// like a config file.
fn shortcut_config(common: &CommonArgs, task: &str, extra: Map<String, Value>) -> Result<Value, String> {
    let flow = match (&common.generator, &common.flow) {
        (Some(g), None) => json!({"type": "inner", "generator": parse_json("generator", g)?}),
        (None, Some(f)) => parse_json("flow", f)?,
        _ => return Err("one of --generator or --flow is required".into()),
    };
    let dim = flow_dim(&flow).ok_or("cannot determine the dimension from the flow")?;
    let nest_dims = common.nest_dims.clone().unwrap_or_else(|| vec![0, dim]);
    let mut config = json!({
        "name": common.name,
        "seed": common.seed,
        "algebra": {"dim": dim, "nest_dims": nest_dims},
        "flow": flow,
        "tasks": [task],
        "tolerances": common.tolerances.iter().map(|(k, v)| (k.clone(), json!(v))).collect::<Map<String, Value>>(),
    });
    let obj = config.as_object_mut().expect("object literal");
    obj.extend(extra);
    Ok(config)
}

fn flow_dim(flow: &Value) -> Option<usize> {
    match flow.get("generator") {
        Some(g) => g.as_array().map(|rows| rows.len()),
        None => flow_dim(flow.get("base")?),
    }
}

fn print_report(report: &Report) {
    for t in &report.tasks {
        let verdict = if t.pass { "PASS" } else { "FAIL" };
        match &t.error {
            Some(e) => println!("{verdict} {} error: {e}", t.task),
            None => println!("{verdict} {} max_residual={:e}", t.task, t.max_residual),
        }
    }
    println!("{} {}", if report.pass { "PASS" } else { "FAIL" }, report.scenario);
}

fn finish(result: Result<Report, RunError>) -> ExitCode {
    match result {
        Ok(report) => {
            print_report(&report);
            ExitCode::from(if report.pass { exit::PASS } else { exit::PROPERTY_FAILURE } as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit::USAGE as u8)
        }
    }
}

fn run_shortcut(common: &CommonArgs, task: &str, extra: Map<String, Value>) -> ExitCode {
    let config = match shortcut_config(common, task, extra) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit::USAGE as u8);
        }
    };
    let result = scenario::parse(&config.to_string())
        .map_err(RunError::from)
        .and_then(|prep| run_and_write(&prep, &common.output.out, !common.output.no_timing));
    finish(result)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, output } => finish(run_scenario(&config, &output.out, !output.no_timing)),
        Command::Verify { level, seed, output } => match verify_and_write(seed, level, &output.out, !output.no_timing) {
            Ok(outcome) => {
                for p in &outcome.properties {
                    let verdict = if p.pass { "PASS" } else { "FAIL" };
                    println!(
                        "{verdict} {}::{} cases={} max_residual={:e} tolerance={:e}",
                        p.module, p.name, p.cases, p.max_residual, p.tolerance
                    );
                }
                let uncovered = outcome.uncovered();
                if !uncovered.is_empty() {
                    println!("uncovered operations: {}", uncovered.join(", "));
                }
                ExitCode::from(if outcome.pass() { exit::PASS } else { exit::PROPERTY_FAILURE } as u8)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(exit::USAGE as u8)
            }
        },
        Command::Smooth {
            common,
            element,
            n_list,
            xi,
        } => {
            let mut smoothing = Map::new();
            if let Some(e) = element {
                match parse_json("element", &e) {
                    Ok(v) => {
                        smoothing.insert("element".into(), v);
                    }
                    Err(msg) => {
                        eprintln!("error: {msg}");
                        return ExitCode::from(exit::USAGE as u8);
                    }
                }
            }
            if let Some(n) = n_list {
                smoothing.insert("n_list".into(), json!(n));
            }
            if let Some(x) = xi {
                smoothing.insert("xi".into(), json!(x));
            }
            let extra = Map::from_iter([("smoothing".to_string(), Value::Object(smoothing))]);
            run_shortcut(&common, "smooth", extra)
        }
        Command::Perturb {
            common,
            perturbation,
            time_grid,
        } => {
            let p = match parse_json("perturbation", &perturbation) {
                Ok(p) => p,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return ExitCode::from(exit::USAGE as u8);
                }
            };
            let extra = Map::from_iter([
                ("perturbation".to_string(), p),
                ("time_grid".to_string(), json!(time_grid)),
            ]);
            run_shortcut(&common, "perturb", extra)
        }
        Command::Extract { common, h_step } => {
            let mut extra = Map::new();
            if let Some(h) = h_step {
                extra.insert("h_step".into(), json!(h));
            }
            run_shortcut(&common, "extract", extra)
        }
    }
}
