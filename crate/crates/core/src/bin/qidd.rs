use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qidd::cli::{self, CliError, Overrides, Scenario};

#[derive(Parser)]
#[command(name = "qidd", version, about = "Lattice simulations of neutron dynamical diffraction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Laue slab: exit profiles and internal field maps.
    Laue(RunArgs),
    /// Bragg half-slab with front- and back-face detectors.
    Bragg(RunArgs),
    /// Bragg slab with a tilted end face.
    Mixed(RunArgs),
    /// Corner crystal with the entry slit offset from the corner.
    Corner(RunArgs),
    /// Integrated intensity against thickness.
    Sweep(RunArgs),
    /// End-face angle fit against data (synthetic when none is given).
    Fit(RunArgs),
    /// Cross-module equivalence suite.
    OracleCheck(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; the scenario preset is used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory [default: $QIDD_OUTPUT_ROOT/<scenario>, else runs/<scenario>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Per-node reflection strength, rad.
    #[arg(long, conflicts_with = "layers")]
    gamma: Option<f64>,
    /// Number of bi-layers.
    #[arg(long)]
    layers: Option<u64>,
}

fn execute(scenario: Scenario, args: RunArgs) -> Result<cli::RunReport, CliError> {
    let mut config = match &args.config {
        Some(path) => cli::load_config(path)?,
        None => cli::preset(scenario),
    };
    config.scenario = Some(scenario);
    config.apply(&Overrides { gamma: args.gamma, layers: args.layers, out: args.out });
    match args.threads {
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?
            .install(|| cli::run(&config)),
        None => cli::run(&config),
    }
}

fn describe(config_scenario: Scenario, report: &cli::RunReport) {
    let m = &report.manifest;
    println!("{} run written to {}", config_scenario.name(), report.out_dir.display());
    if let Some(r) = &m.resolved {
        println!("n = {}, gamma = {:.6e}, D/Delta_H = {:.6}", r.n, r.gamma, r.thickness_ratio);
    }
    print!("{}", cli::format_checks(&m.checks));
    println!("content hash {}  ({:.2} s)", m.content_hash, m.wall_time_s);
}

fn main() -> ExitCode {
    let parsed = Cli::parse();
    let (scenario, args) = match parsed.command {
        Command::Laue(a) => (Scenario::Laue, a),
        Command::Bragg(a) => (Scenario::Bragg, a),
        Command::Mixed(a) => (Scenario::Mixed, a),
        Command::Corner(a) => (Scenario::Corner, a),
        Command::Sweep(a) => (Scenario::Sweep, a),
        Command::Fit(a) => (Scenario::Fit, a),
        Command::OracleCheck(a) => (Scenario::OracleCheck, a),
    };
    match execute(scenario, args) {
        Ok(report) => {
            describe(scenario, &report);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
