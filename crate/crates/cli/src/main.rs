mod commands;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use compass_core::{Column, Format, RenderOptions};
use tracing_subscriber::EnvFilter;

/// Finds, weighs and ranks compartments: large under-covered regions gated by
/// a single coverage-frontier conditional.
#[derive(Parser)]
#[command(name = "compass", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank compartments from an ICFG, profile snapshots and a callgraph log.
    Analyze(AnalyzeArgs),
    /// Mark compartments resolved and re-rank the rest.
    Whatif(WhatifArgs),
    /// Compare a report with a later snapshot or another report.
    Stability(StabilityArgs),
    /// Check which compartments candidate inputs reach or unlock.
    Evaluate(EvaluateArgs),
    /// Fuzz a toy target and write its coverage artifacts.
    Simulate(SimulateArgs),
    /// Serve the session API.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Json,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Table => Format::Table,
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Clone)]
struct Columns(Vec<Column>);

fn parse_columns(s: &str) -> Result<Columns, String> {
    RenderOptions::parse_columns(s)
        .map(Columns)
        .map_err(|e| e.to_string())
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
    /// Comma-separated columns for table and CSV output.
    #[arg(long, value_parser = parse_columns)]
    columns: Option<Columns>,
    /// Cut table cells longer than this.
    #[arg(long)]
    width: Option<usize>,
    /// Write here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl OutputArgs {
    fn options(&self) -> RenderOptions {
        let mut opts = RenderOptions::with_format(self.format.into());
        if let Some(c) = &self.columns {
            opts.columns = c.0.clone();
        }
        opts.max_width = self.width;
        opts
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    icfg: PathBuf,
    /// Profile snapshot; repeat to merge several.
    #[arg(long, required = true, num_args = 1..)]
    profile: Vec<PathBuf>,
    #[arg(long)]
    callgraph: PathBuf,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Per-input coverage manifest used for the Input and Solution columns.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    max_exec_count: u64,
    #[arg(long, default_value_t = 20)]
    top: usize,
    /// Functions never reported as indirect-call targets.
    #[arg(long, value_delimiter = ',')]
    roots: Vec<String>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct WhatifArgs {
    /// Report exported by `analyze --format json`.
    #[arg(long)]
    report: PathBuf,
    /// Compartment id (function:block); repeat to unlock several.
    #[arg(long, required = true)]
    unlock: Vec<String>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct StabilityArgs {
    #[arg(long)]
    report: PathBuf,
    /// Later profile snapshot; repeat to merge several.
    #[arg(long, num_args = 1..)]
    later_profile: Vec<PathBuf>,
    #[arg(long)]
    other_report: Option<PathBuf>,
    /// Prefix length for the overlap; defaults to the report's top_k.
    #[arg(long, requires = "other_report")]
    k: Option<usize>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    report: PathBuf,
    /// Coverage manifest with one line per candidate input.
    #[arg(long)]
    candidate_coverage: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Directory of seed files.
    #[arg(long)]
    seeds: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    iters: u64,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Harness flag bits visible to flag guards.
    #[arg(long, default_value_t = 0)]
    flags: u64,
    /// Blocks executed per input before the run is cut short.
    #[arg(long, default_value_t = compass_core::sim::DEFAULT_STEP_BUDGET)]
    step_budget: u64,
}

#[derive(Args)]
struct ServeArgs {
    /// Directory holding session artifacts and action logs.
    #[arg(long)]
    state: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
}

/// Errors caused by how the command was invoked.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<compass_core::Error>() {
            return if e.is_invariant() { 3 } else { 2 };
        }
    }
    2
}

/// The cause chain joined by ": ", skipping causes a message already ends with.
fn describe(err: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if msg.ends_with(&text) {
            continue;
        }
        if !msg.is_empty() {
            msg.push_str(": ");
        }
        msg.push_str(&text);
    }
    msg
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_env("COMPASS_LOG").unwrap_or_else(|_| EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();

    let result = match cli.command {
        Command::Analyze(a) => commands::analyze(a),
        Command::Whatif(a) => commands::whatif(a),
        Command::Stability(a) => commands::stability(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Serve(a) => commands::serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_kind() {
        let usage = anyhow::Error::new(Usage("x".into()));
        assert_eq!(exit_code(&usage), 1);
        let input = anyhow::Error::new(compass_core::Error::UnknownFunction("f".into()).in_file("a.json"));
        assert_eq!(exit_code(&input), 2);
        let broken = anyhow::Error::new(compass_core::Error::Invariant("w".into()).in_file("r.json"));
        assert_eq!(exit_code(&broken), 3);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), 2);
    }

    #[test]
    fn describe_drops_repeated_causes() {
        let e = compass_core::Error::UnknownFunction("f".into()).in_file("a.json");
        assert_eq!(describe(&anyhow::Error::new(e)), "a.json: unknown function f");
        let e = anyhow::Error::new(Usage("bad".into())).context("while parsing");
        assert_eq!(describe(&e), "while parsing: bad");
    }
}
