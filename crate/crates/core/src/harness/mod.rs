//! Experiment driver: TOML configs, seeded repetitions, CSV run logs,
//! aggregated learning curves, SVG plots and the `duvn` command line.
//!
//! Every repetition `i` uses seed `base_seed + i`, from which the agent and
//! environment seeds are derived, so a config and its base seed determine
//! every output byte. Wall-clock time is only logged when
//! `record_wall_time` is set.

mod cli;
mod config;
mod curves;
mod run;
mod sweep;

pub use cli::cli_main;
pub use config::{AgentOverrides, EnvSpec, ExperimentConfig, DEFAULT_REPETITIONS, DEFAULT_WINDOW};
pub use curves::{aggregate, emit_plot, full_window_means, moving_average, render_svg, AggregateCurve};
pub use run::{
    log_file_name, read_run_dir, run_experiment, EpisodeRow, ExperimentOutput, Manifest, RepetitionManifest, RunLog,
    MANIFEST_FILE,
};
pub use sweep::{run_sweep, SweepConfig};
