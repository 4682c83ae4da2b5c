//! `qswitch`: simulate and analyze an entanglement-distributing switch.
//!
//! Exit codes: 0 success, 1 usage error, 2 config error, 3 resource cap.

mod commands;
mod plot;

use clap::error::ErrorKind;
use clap::Parser;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "qswitch",
    version,
    about = "Discrete-time switch simulator and rate-region toolkit for multiplexed entanglement flows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Subcommand)]
enum Command {
    /// Compute the analytic rate region and report its binding facets
    Region(RegionArgs),
    /// Simulate one rate vector and classify its stability
    Simulate(SimulateArgs),
    /// Sweep a rate grid, classify every point, and compare to the region
    Sweep(SweepArgs),
    /// Render a 3-flow sweep and its region to a static SVG
    Plot(PlotArgs),
    /// Print the direct-transmission capacity -log2(1 - eta) in ebits/mode
    Capacity(CapacityArgs),
}

/// Flags describing the switch, shared by most subcommands. Either a config
/// file or a canonical scenario.
#[derive(clap::Args)]
struct TopologyArgs {
    /// Topology config file (JSON: users/links/flows, or a scenario shorthand)
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Canonical scenario: a (all contending), b (path), c (disjoint)
    #[arg(long, value_name = "a|b|c")]
    scenario: Option<String>,
    /// Uniform per-link heralding probability (default 0.632)
    #[arg(long)]
    p: Option<f64>,
    /// Uniform swap success probability
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Per-channel heralding probability; link p becomes 1-(1-pnla)^m
    #[arg(long, conflicts_with = "p")]
    pnla: Option<f64>,
    /// Multiplexed channels per link (with --pnla; default round(1/pnla))
    #[arg(long, requires = "pnla")]
    m: Option<u64>,
}

#[derive(clap::Args)]
struct RegionArgs {
    #[command(flatten)]
    topology: TopologyArgs,
    /// Serviceability rule: any (orientation ignored) or parity
    #[arg(long, default_value = "any", value_name = "any|parity")]
    rule: String,
    /// Output format: json (facet list) or csv (boundary sample grid)
    #[arg(long, default_value = "json", value_name = "json|csv")]
    format: String,
    /// Grid step for the csv boundary samples
    #[arg(long, default_value_t = 0.02)]
    dlam: f64,
    /// Output file (stdout when omitted)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[command(flatten)]
    topology: TopologyArgs,
    /// Request rates, comma separated, one per flow (e.g. 0.2,0.2,0.2)
    #[arg(long, value_name = "x,y,z")]
    lam: String,
    /// Time steps
    #[arg(long, default_value_t = 100_000)]
    steps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "any", value_name = "any|parity")]
    rule: String,
    /// Stability threshold on the total-queue regression slope
    #[arg(long, default_value_t = 1e-4)]
    threshold: f64,
    /// Arrival process: bernoulli or poisson
    #[arg(long, default_value = "bernoulli", value_name = "bernoulli|poisson")]
    arrival: String,
    /// Output prefix: writes <out>.trace.csv and <out>.verdict.json
    #[arg(long, default_value = "sim")]
    out: String,
}

#[derive(clap::Args)]
struct SweepArgs {
    #[command(flatten)]
    topology: TopologyArgs,
    /// Grid step
    #[arg(long, default_value_t = qswitch::sweep::DESK_DLAM)]
    dlam: f64,
    #[arg(long, default_value_t = 0.0)]
    lam_min: f64,
    #[arg(long, default_value_t = 1.0)]
    lam_max: f64,
    /// Time steps per grid point
    #[arg(long, default_value_t = qswitch::sweep::DESK_HORIZON)]
    steps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Repetitions per grid point
    #[arg(long, default_value_t = 1)]
    reps: u32,
    #[arg(long, default_value = "any", value_name = "any|parity")]
    rule: String,
    #[arg(long, default_value_t = 1e-4)]
    threshold: f64,
    /// Use the published protocol: dlam 0.005, 1e5 steps, no step cap
    #[arg(long)]
    paper_exact: bool,
    /// Cap on total simulated steps (refuses beyond; see exit code 3)
    #[arg(long)]
    max_steps: Option<u64>,
    /// Skip the analytic-region comparison columns
    #[arg(long)]
    no_compare: bool,
    /// Result CSV
    #[arg(long, default_value = "sweep.csv", value_name = "FILE")]
    out: PathBuf,
    /// Summary JSON
    #[arg(long, default_value = "sweep_summary.json", value_name = "FILE")]
    summary: PathBuf,
}

#[derive(clap::Args)]
struct PlotArgs {
    /// Sweep result CSV (as written by `qswitch sweep`)
    #[arg(long, value_name = "FILE")]
    sweep: PathBuf,
    /// Region JSON (as written by `qswitch region`); computed from the
    /// topology flags when omitted
    #[arg(long, value_name = "FILE")]
    region: Option<PathBuf>,
    #[command(flatten)]
    topology: TopologyArgs,
    #[arg(long, default_value = "any", value_name = "any|parity")]
    rule: String,
    #[arg(long, default_value = "plot.svg", value_name = "FILE")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct CapacityArgs {
    /// Channel transmissivity, 0 <= eta < 1
    #[arg(long)]
    eta: f64,
}

/// A command failure carrying its exit code.
pub enum Failure {
    Usage(String),
    Config(String),
    Resource(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Config(_) => 2,
            Failure::Resource(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Config(m) | Failure::Resource(m) => m,
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Region(args) => commands::region(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Sweep(args) => commands::sweep(args),
        Command::Plot(args) => commands::plot(args),
        Command::Capacity(args) => commands::capacity(args),
    };
    if let Err(failure) = result {
        eprintln!("error: {}", failure.message());
        std::process::exit(failure.exit_code());
    }
}
