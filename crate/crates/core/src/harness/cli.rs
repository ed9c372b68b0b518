use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use super::config::ExperimentConfig;
use super::curves::{aggregate, emit_plot, AggregateCurve};
use super::run::{read_run_dir, run_experiment, RunLog};
use super::sweep::{run_sweep, SweepConfig};
use crate::envs::{make_cartpole, make_chain, make_diagnostic_mdp, ChainConfig, Environment};
use crate::ire::{self, export_histogram, initial_return_entropy};
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "duvn", version, about = "Uncertainty-driven exploration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every repetition of an experiment config.
    Run {
        config: PathBuf,
    },
    /// Estimate the initial return entropy of an environment.
    Ire {
        env: IreEnv,
        /// Chain length.
        #[arg(long, default_value_t = 10)]
        length: usize,
        /// Use the ordered Chain (correct action always the same).
        #[arg(long)]
        ordered: bool,
        /// Diagnostic tree depth.
        #[arg(long, default_value_t = 2)]
        depth: usize,
        /// Diagnostic leaf rewards, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0, 2.0, 3.0])]
        leaves: Vec<f64>,
        #[arg(long, default_value_t = ire::DEFAULT_TRACES)]
        traces: usize,
        #[arg(long, default_value_t = ire::DEFAULT_MAX_STEPS)]
        max_steps: usize,
        #[arg(long, default_value_t = ire::DEFAULT_BINS)]
        bins: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Histogram CSV path [default: ire_<env>.csv]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a grid of Chain lengths and agent modes.
    Sweep {
        config: PathBuf,
    },
    /// Plot run logs (files or run directories) as smoothed mean curves.
    Plot {
        #[arg(required = true)]
        runlogs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = super::config::DEFAULT_WINDOW)]
        window: usize,
        #[arg(long, default_value = "Learning curves")]
        title: String,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum IreEnv {
    Chain,
    Cartpole,
    Diagnostic,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 on success, 2 for usage, config and file errors,
/// 1 for anything else.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Argument(_) | Error::Io { .. } => 2,
                _ => 1,
            }
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config } => {
            let config = ExperimentConfig::load(&config)?;
            let out = run_experiment(&config)?;
            let curve = aggregate(&out.logs, config.smoothing_window)?;
            curve.write_csv(&out.dir.join("curve.csv"))?;
            let label = format!("{} / {}", config.environment.name(), config.agent.mode.name());
            emit_plot(std::slice::from_ref(&curve.smoothed), std::slice::from_ref(&label), &label, &out.dir.join("curve.svg"))?;
            println!(
                "{label}: {} repetitions x {} episodes written to {}",
                config.num_repetitions,
                config.num_episodes,
                out.dir.display()
            );
            print_summary(&curve);
            Ok(())
        }
        Command::Ire {
            env,
            length,
            ordered,
            depth,
            leaves,
            traces,
            max_steps,
            bins,
            seed,
            out,
        } => {
            let (name, mut environment): (&str, Box<dyn Environment>) = match env {
                IreEnv::Chain => {
                    let config = if ordered {
                        ChainConfig::ordered(length)
                    } else {
                        ChainConfig::unordered(length, seed)
                    };
                    ("chain", Box::new(make_chain(config)?))
                }
                IreEnv::Cartpole => ("cartpole", Box::new(make_cartpole(seed))),
                IreEnv::Diagnostic => ("diagnostic", Box::new(make_diagnostic_mdp(depth, leaves)?)),
            };
            let result = initial_return_entropy(environment.as_mut(), traces, max_steps, bins, seed)?;
            let path = out.unwrap_or_else(|| PathBuf::from(format!("ire_{name}.csv")));
            export_histogram(&result, &path)?;
            println!(
                "{name}: initial return entropy {:.6} nats over {traces} traces (max {max_steps} steps, {bins} bins)",
                result.entropy_nats
            );
            println!("histogram written to {}", path.display());
            Ok(())
        }
        Command::Sweep { config } => {
            let config = SweepConfig::load(&config)?;
            let dirs = run_sweep(&config)?;
            for d in &dirs {
                println!("{}", d.display());
            }
            println!("{} run directories under {}", dirs.len(), config.output_dir.display());
            Ok(())
        }
        Command::Plot {
            runlogs,
            out,
            window,
            title,
        } => {
            let mut curves = Vec::with_capacity(runlogs.len());
            let mut labels = Vec::with_capacity(runlogs.len());
            for path in &runlogs {
                let logs = load_logs(path)?;
                curves.push(aggregate(&logs, window)?.smoothed);
                labels.push(label_for(path));
            }
            emit_plot(&curves, &labels, &title, &out)?;
            println!("plot written to {}", out.display());
            Ok(())
        }
    }
}

fn load_logs(path: &Path) -> Result<Vec<RunLog>> {
    if path.is_dir() {
        Ok(read_run_dir(path)?.1)
    } else {
        Ok(vec![RunLog::read(path)?])
    }
}

fn label_for(path: &Path) -> String {
    let stem = if path.is_dir() { path.file_name() } else { path.file_stem() };
    stem.map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn print_summary(curve: &AggregateCurve) {
    let last = curve.smoothed.last().copied().unwrap_or(f64::NAN);
    let best = curve.smoothed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "final {}-episode moving average {last:.3}, best {best:.3}",
        curve.window
    );
}
