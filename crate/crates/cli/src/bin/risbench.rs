//! Benchmark front end: times the sender and receiver protection chain per
//! algorithm and packet size and writes the results as CSV (or JSON with
//! `--json`). Exits 2 when the implementation vector gate fails, since
//! numbers from a wrong implementation are worse than none.

use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use ris_core::bench::{emit_csv, run_bench, BenchAlg, BenchConfig, BenchError};

#[derive(Parser)]
#[command(
    name = "risbench",
    about = "Benchmark the RIS control-link protection chain"
)]
struct Args {
    /// Comma-separated algorithms (hmac-sha256, hmac-sha384, hmac-sha3-512,
    /// aes-cmac, snow3g); default all
    #[arg(long, value_delimiter = ',')]
    alg: Vec<BenchAlgArg>,

    /// Comma-separated packet sizes in octets, ascending
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,

    /// Timed iterations per cell (minimum 100)
    #[arg(long, default_value_t = ris_core::bench::DEFAULT_ITERATIONS)]
    iters: usize,

    /// Fixed radio transmission time added to the end-to-end model, ms
    #[arg(long, default_value_t = ris_core::bench::DEFAULT_RADIO_MS)]
    radio_ms: f64,

    /// Output path
    #[arg(long, default_value = "results.csv")]
    out: std::path::PathBuf,

    /// Emit JSON records instead of CSV
    #[arg(long)]
    json: bool,

    /// MAC the packet digest instead of the full packet (HMAC rows)
    #[arg(long)]
    digest_then_mac: bool,

    /// Seed for deterministic payload generation
    #[arg(long, default_value_t = 0xBE7C4)]
    seed: u64,
}

#[derive(Clone)]
struct BenchAlgArg(BenchAlg);

impl std::str::FromStr for BenchAlgArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(BenchAlgArg)
    }
}

fn main() -> anyhow::Result<ExitCode> {
    let args = Args::parse();

    let mut cfg = BenchConfig {
        iterations: args.iters,
        radio_ms: args.radio_ms,
        digest_then_mac: args.digest_then_mac,
        seed: args.seed,
        ..BenchConfig::default()
    };
    if !args.alg.is_empty() {
        cfg.algorithms = args.alg.iter().map(|a| a.0).collect();
    }
    if !args.sizes.is_empty() {
        cfg.packet_sizes = args.sizes.clone();
    }

    let records = match run_bench(&cfg) {
        Ok(records) => records,
        Err(e @ BenchError::VectorGateFailed(_)) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(2));
        }
        Err(e) => return Err(e).context("benchmark run failed"),
    };

    let body = if args.json {
        let mut s = serde_json::to_string_pretty(&records)?;
        s.push('\n');
        s
    } else {
        emit_csv(&records)
    };
    std::fs::write(&args.out, &body)
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    eprintln!("wrote {} records to {}", records.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}
