//! Scenario runner for the simulated RIS control link.
//!
//! Runs one named scenario against the in-process network, prints the
//! observable endpoint events next to the scenario's expectation, and exits
//! zero only when they match. `--transcript` additionally writes the full
//! frame-by-frame transcript as JSON lines with hex-encoded frames.

use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use ris_core::simnet::{run_scenario, scenario_by_name, scenario_names};

#[derive(Parser)]
#[command(name = "rissim", about = "Run a scripted RIS control-link scenario")]
struct Args {
    /// Scenario to run (see --list)
    #[arg(long, required_unless_present = "list")]
    scenario: Option<String>,

    /// RNG seed for secrets, nonces, and payloads
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Write the frame transcript as JSON lines to this path
    #[arg(long, value_name = "out.jsonl")]
    transcript: Option<std::path::PathBuf>,

    /// List known scenarios and exit
    #[arg(long)]
    list: bool,
}

fn main() -> anyhow::Result<ExitCode> {
    let args = Args::parse();

    if args.list {
        for name in scenario_names() {
            println!("{name}");
        }
        return Ok(ExitCode::SUCCESS);
    }

    let name = args
        .scenario
        .expect("clap enforces presence without --list");
    let scenario = scenario_by_name(&name, args.seed)
        .with_context(|| format!("cannot build scenario {name:?}"))?;
    let report = run_scenario(&scenario).context("scenario execution failed")?;

    if let Some(path) = &args.transcript {
        std::fs::write(path, report.transcript.to_jsonl())
            .with_context(|| format!("cannot write {}", path.display()))?;
    }

    println!("scenario: {name} (seed {})", args.seed);
    println!("expected: {}", serde_json::to_string(&report.expected)?);
    println!("observed: {}", serde_json::to_string(&report.observed)?);
    if report.matched {
        println!("verdict: MATCH");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("verdict: MISMATCH");
        Ok(ExitCode::FAILURE)
    }
}
