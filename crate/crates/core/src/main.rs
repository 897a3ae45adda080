use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use curvflow::cli::{self, Outcome};
use curvflow::io::config::{parse_config, RunConfig};
use curvflow::Error;

/// Curvature-flow simulations and estimate monitors.
#[derive(Parser)]
#[command(name = "curvflow", version)]
struct Cli {
    /// Exit 0 even when a verdict fails.
    #[arg(long, global = true)]
    informational_only: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a flow and write its history directory and monitor reports.
    Simulate {
        #[arg(short = 'c', long)]
        config: PathBuf,
        #[arg(short = 'o', long)]
        out: PathBuf,
    },
    /// Check the structural properties of a speed by sampling.
    CertifySpeed {
        #[arg(short = 'c', long)]
        config: PathBuf,
        #[arg(short = 'o', long)]
        out: Option<PathBuf>,
    },
    /// Sample the sign of the pinching quadratic forms.
    ProbeQ {
        #[arg(short = 'c', long)]
        config: PathBuf,
        #[arg(short = 'o', long)]
        out: Option<PathBuf>,
    },
    /// Evaluate monitors over a history directory.
    Analyze {
        #[arg(short = 'i', long)]
        input: PathBuf,
    },
    /// Write an exact shrinking-sphere history directory.
    SphereFixture {
        /// Config giving `n`, the speed and optionally monitors.
        #[arg(short = 'c', long)]
        config: PathBuf,
        #[arg(short = 'o', long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 40)]
        snapshots: usize,
        /// Last sample time as a fraction of the extinction time.
        #[arg(long, default_value_t = 0.9)]
        end_fraction: f64,
    },
}

fn load(path: &Path) -> curvflow::Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

fn dispatch(cmd: &Cmd) -> curvflow::Result<Outcome> {
    match cmd {
        Cmd::Simulate { config, out } => cli::simulate(&load(config)?, out),
        Cmd::CertifySpeed { config, out } => cli::certify_speed(&load(config)?, out.as_deref()),
        Cmd::ProbeQ { config, out } => cli::probe_q(&load(config)?, out.as_deref()),
        Cmd::Analyze { input } => cli::analyze(input),
        Cmd::SphereFixture {
            config,
            out,
            radius,
            snapshots,
            end_fraction,
        } => cli::sphere_fixture(&load(config)?, *radius, *snapshots, *end_fraction, out),
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("CURVFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .map_err(|_| format!("CURVFLOW_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match dispatch(&cli.command) {
        Ok(outcome) => {
            println!("{}", outcome.stdout.trim_end());
            for f in &outcome.failures {
                eprintln!("fail: {f}");
            }
            if outcome.passed() || cli.informational_only {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
