use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use railsim::commands::{cmd_bench, cmd_simulate, cmd_sweep, CommandError};
use railsim::config::{parse_config, Engine, PlotKind, SimConfig};
use railsim::validate;

/// Vertical dynamics of a rail wagon on two bogies.
#[derive(Parser)]
#[command(name = "railsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one scenario and write the trajectory as CSV.
    Simulate {
        /// JSON configuration; nominal values when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        engine: Option<Engine>,
        /// Also write a gnuplot script next to the CSV.
        #[arg(long, value_enum)]
        plot: Option<PlotKind>,
        /// CSV path (overrides output.csv).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run both engines and the oracle at several speeds.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated speeds in km/h (1 m/s = 3.6 km/h).
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        speeds: Vec<f64>,
        #[arg(long, default_value = "sweep.csv")]
        output: PathBuf,
    },
    /// Time the sequential engine and every worker plan.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Also write the report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the validation checks and print one line per check.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load(path: Option<&Path>) -> Result<SimConfig, CommandError> {
    match path {
        Some(p) => Ok(parse_config(p)?),
        None => Ok(SimConfig::default()),
    }
}

fn run(cli: Cli) -> Result<bool, CommandError> {
    match cli.command {
        Command::Simulate {
            config,
            engine,
            plot,
            output,
        } => {
            let config = load(config.as_deref())?;
            let out = cmd_simulate(&config, engine, plot, output.as_deref())?;
            println!("wrote {} rows to {}", out.series.len(), out.csv.display());
            if let Some(script) = &out.plot {
                println!("wrote plot script {}", script.display());
            }
            if let Some(stats) = &out.stats {
                println!("parallel wall time {:.6} s", stats.wall_time);
                for w in &stats.warnings {
                    eprintln!("warning: {w}");
                }
            }
            Ok(true)
        }
        Command::Sweep {
            config,
            speeds,
            output,
        } => {
            let config = load(config.as_deref())?;
            let rows = cmd_sweep(&config, &speeds, &output)?;
            let mut ok = true;
            for r in &rows {
                match &r.status {
                    Ok(()) => println!(
                        "{:>7.2} km/h  w = {:.4} rad/s  par-seq diff {:e}  oracle error {:.2e}",
                        r.speed_kmh, r.omega, r.max_par_seq_diff, r.oracle_rel_err
                    ),
                    Err(e) => {
                        ok = false;
                        eprintln!("{:>7.2} km/h  error: {e}", r.speed_kmh);
                    }
                }
            }
            println!("wrote {} rows to {}", rows.len(), output.display());
            Ok(ok)
        }
        Command::Bench {
            config,
            reps,
            report,
        } => {
            let config = load(config.as_deref())?;
            let bench = cmd_bench(&config, reps)?;
            print!("{}", bench.to_text());
            if let Some(path) = report {
                let json = serde_json::to_string_pretty(&bench).expect("report serializes");
                std::fs::write(&path, json).map_err(|source| CommandError::Io {
                    context: format!("writing {}", path.display()),
                    source,
                })?;
            }
            Ok(true)
        }
        Command::Validate { config } => {
            let config = load(config.as_deref())?;
            let results = validate::run_all(&config);
            for r in &results {
                println!("{r}");
            }
            Ok(results.iter().all(|r| r.passed))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
