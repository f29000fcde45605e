use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use repcode::cli::{
    self, cmd_errors, cmd_fit, cmd_histogram, cmd_qubits, cmd_simulate, ExperimentConfig,
    ModeSelection,
};
use repcode::sampling::Backend;

#[derive(Parser)]
#[command(
    name = "repcode",
    about = "Repetition-code simulation, lookup-table decoding and decay-model fitting"
)]
struct Cli {
    /// Master seed for all random streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for data tables, plots and counts files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat key=value config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct SimulateArgs {
    /// Comma-separated code distances.
    #[arg(long, value_delimiter = ',')]
    distances: Option<Vec<usize>>,
    /// Shots per run.
    #[arg(long)]
    shots: Option<u64>,
    /// Number of runs per (distance, encoded value) cell.
    #[arg(long)]
    runs: Option<usize>,
    /// Rotation angle (radians) for qubits prepared in |0>.
    #[arg(long)]
    theta_zero: Option<f64>,
    /// Rotation angle (radians) for qubits prepared in |1>.
    #[arg(long)]
    theta_one: Option<f64>,
    /// Noise injection points: comma-separated list, "all" or "none".
    #[arg(long)]
    injection: Option<String>,
    /// Shot backend: "exact" or "flip".
    #[arg(long)]
    backend: Option<String>,
    /// Flip probability for the flip backend.
    #[arg(long)]
    flip_probability: Option<f64>,
    /// Restrict flips to code qubits.
    #[arg(long)]
    flip_code_only: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the shot-sampling protocol and write counts files plus a manifest.
    Simulate(SimulateArgs),
    /// Compute logical-error estimates from a manifest of counts files.
    Errors {
        #[arg(long)]
        manifest: PathBuf,
        /// Decode modes: full, partial or both.
        #[arg(long, default_value = "both")]
        mode: String,
        /// Build lookup tables on half the runs, evaluate on the rest.
        #[arg(long)]
        held_out: bool,
    },
    /// Fit the decay model to a logical-error table.
    Fit {
        /// The errors.tsv table produced by the errors command.
        #[arg(long)]
        errors: PathBuf,
        /// Include d=3 points, which are excluded by default for finite-size
        /// reasons.
        #[arg(long)]
        include_d3: bool,
        /// Override the p0 + p1 constraint for the two-round fit.
        #[arg(long)]
        p_total: Option<f64>,
    },
    /// Per-position outcome statistics at one distance.
    Qubits {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        d: usize,
    },
    /// Ones-count histograms and crossover point at one distance.
    Histogram {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        d: usize,
    },
}

fn build_config(cli: &Cli, args: Option<&SimulateArgs>) -> repcode::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    if let Some(path) = &cli.config {
        config.apply_file(path)?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if let Some(args) = args {
        if let Some(d) = &args.distances {
            config.distances = d.clone();
        }
        if let Some(shots) = args.shots {
            config.shots = shots;
        }
        if let Some(runs) = args.runs {
            config.runs = runs;
        }
        if let Some(theta) = args.theta_zero {
            config.theta_zero = theta;
        }
        if let Some(theta) = args.theta_one {
            config.theta_one = theta;
        }
        if let Some(injection) = &args.injection {
            config.injection = cli::parse_injection_list(injection)?;
        }
        match args.backend.as_deref() {
            None => {}
            Some("exact") => config.backend = Backend::ExactSample,
            Some("flip") => {
                config.backend = Backend::StochasticFlip {
                    flip_probability: args.flip_probability.ok_or_else(|| {
                        repcode::Error::InvalidArgument(
                            "--backend flip requires --flip-probability".into(),
                        )
                    })?,
                    code_only: args.flip_code_only,
                }
            }
            Some(other) => {
                return Err(repcode::Error::InvalidArgument(format!(
                    "backend must be exact or flip, got '{other}'"
                )))
            }
        }
    }
    Ok(config)
}

fn run(cli: &Cli) -> repcode::Result<()> {
    match &cli.command {
        Command::Simulate(args) => {
            let config = build_config(cli, Some(args))?;
            let manifest = cmd_simulate(&config)?;
            println!("wrote manifest {}", manifest.display());
        }
        Command::Errors {
            manifest,
            mode,
            held_out,
        } => {
            let config = build_config(cli, None)?;
            let modes: ModeSelection = mode.parse()?;
            let path = cmd_errors(manifest, modes, *held_out || config.held_out, &config.out_dir)?;
            println!("wrote {}", path.display());
        }
        Command::Fit {
            errors,
            include_d3,
            p_total,
        } => {
            let config = build_config(cli, None)?;
            let report = cmd_fit(
                errors,
                *include_d3 || config.include_d3,
                *p_total,
                &config.out_dir,
            )?;
            for row in &report {
                match &row.fit {
                    repcode::model::FitResult::Single { p, .. } => {
                        println!("E={} {}: p = {p:.6}", row.encoded as u8, row.mode)
                    }
                    repcode::model::FitResult::TwoRound { p0, p1, .. } => println!(
                        "E={} {}: p0 = {p0:.6}, p1 = {p1:.6}",
                        row.encoded as u8, row.mode
                    ),
                }
            }
        }
        Command::Qubits { manifest, d } => {
            let config = build_config(cli, None)?;
            let path = cmd_qubits(manifest, *d, &config.out_dir)?;
            println!("wrote {}", path.display());
        }
        Command::Histogram { manifest, d } => {
            let config = build_config(cli, None)?;
            let path = cmd_histogram(manifest, *d, &config.out_dir)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(cli::exit_code(&err) as u8)
        }
    }
}
