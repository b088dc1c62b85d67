//! `bufsim` runs the router buffer laboratory from the command line.
//!
//! Four subcommands cover the three evaluation routes exposed by
//! `bufsim_core`: `analytics` prints closed-form finite-queue tables,
//! `simulate` runs one architecture through the discrete-event simulator,
//! `compare` runs both architectures on common random numbers, and `cycle`
//! prints the clock-cycle latency budget table.
//!
//! Machine-readable output (CSV or JSON) goes to stdout or `--out`; a human
//! summary goes to stderr.  Exit codes: 0 on success, 2 on configuration
//! errors, 3 on output I/O errors.

mod commands;
mod config;
mod emit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bufsim", version, about = "Router buffer architecture laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form M/M/1/N tables for the selected architectures
    Analytics(CommonArgs),
    /// Discrete-event simulation of a single architecture
    Simulate(CommonArgs),
    /// Both architectures under common random numbers
    Compare(CommonArgs),
    /// Clock-cycle latency budget table
    Cycle(CommonArgs),
}

/// One flag set shared by every subcommand.  Unset flags fall back to the
/// config file, then (for the seed) the `BUFSIM_SEED` environment variable,
/// then built-in defaults.
#[derive(Args, Default, Clone)]
struct CommonArgs {
    /// Service abstraction: queueing or voq (compare also accepts cycle)
    #[arg(long)]
    mode: Option<String>,

    /// Buffer architecture: common, distributed, or both
    #[arg(long)]
    arch: Option<String>,

    /// Offered load per input port, packets per second
    #[arg(long)]
    lambda: Option<f64>,

    /// Service rate per distributed queue, packets per second
    #[arg(long)]
    mu: Option<f64>,

    /// Buffer capacity of the selected architecture, packets
    ///
    /// With --arch both this sets the per-input capacity; the shared pool
    /// defaults to ports times this value unless --common-capacity is given.
    #[arg(long)]
    capacity: Option<usize>,

    /// Shared pool capacity override, packets
    #[arg(long)]
    common_capacity: Option<usize>,

    /// Number of router ports
    #[arg(long)]
    ports: Option<usize>,

    /// Source wiring: independent or aggregate
    #[arg(long)]
    wiring: Option<String>,

    /// Packets to generate per replication
    #[arg(long)]
    packets: Option<u64>,

    /// Master seed for the random number streams
    #[arg(long)]
    seed: Option<u64>,

    /// Independent replications per architecture
    #[arg(long)]
    replications: Option<usize>,

    /// iSLIP iterations per scheduling epoch
    #[arg(long)]
    islip_iterations: Option<usize>,

    /// Departures discarded from the start of each latency series
    #[arg(long)]
    warmup: Option<u64>,

    /// Buffer-store stage cycles
    #[arg(long)]
    store_cycles: Option<u64>,

    /// Scheduling stage cycles
    #[arg(long)]
    schedule_cycles: Option<u64>,

    /// Switch traversal stage cycles
    #[arg(long)]
    traverse_cycles: Option<u64>,

    /// Clock period in nanoseconds
    #[arg(long)]
    clock_period_ns: Option<f64>,

    /// Pool occupancy fraction above which contention turns moderate
    #[arg(long)]
    crowding_threshold: Option<f64>,

    /// Output format: csv or json
    #[arg(long)]
    format: Option<String>,

    /// Write machine output to this path instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,

    /// Config file of key=value lines; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
