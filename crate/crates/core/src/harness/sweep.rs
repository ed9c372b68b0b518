use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{AgentOverrides, EnvSpec, ExperimentConfig, DEFAULT_REPETITIONS, DEFAULT_WINDOW};
use super::curves::{aggregate, emit_plot};
use super::run::run_experiment;
use crate::agent::Mode;
use crate::{Error, Result};

/// Grid of Chain lengths and agent modes sharing every other setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub lengths: Vec<usize>,
    #[serde(default = "all_modes")]
    pub modes: Vec<Mode>,
    #[serde(default)]
    pub ordered: bool,
    pub num_episodes: usize,
    #[serde(default = "default_repetitions")]
    pub num_repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_window")]
    pub smoothing_window: usize,
    /// Shared agent overrides; `mode` must be left unset.
    #[serde(default)]
    pub agent: AgentOverrides,
}

fn all_modes() -> Vec<Mode> {
    Mode::ALL.to_vec()
}

fn default_repetitions() -> usize {
    DEFAULT_REPETITIONS
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: SweepConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if config.output_dir.is_relative() {
            if let Some(parent) = path.parent() {
                config.output_dir = parent.join(&config.output_dir);
            }
        }
        Ok(config)
    }

    /// One resolved experiment per `(length, mode)`, lengths outermost.
    pub fn experiments(&self) -> Result<Vec<ExperimentConfig>> {
        if self.agent.mode.is_some() {
            return Err(Error::Config("sweep agent overrides must not set a mode".into()));
        }
        if self.lengths.is_empty() || self.modes.is_empty() {
            return Err(Error::Config("a sweep needs at least one length and one mode".into()));
        }
        let mut out = Vec::new();
        for &length in &self.lengths {
            for &mode in &self.modes {
                let env = EnvSpec::Chain {
                    length,
                    ordered: self.ordered,
                };
                let dir = self.output_dir.join(format!("{}_{}", env.name(), mode.name()));
                let mut c = ExperimentConfig::new(env, self.agent.resolve(mode), self.num_episodes, dir);
                c.num_repetitions = self.num_repetitions;
                c.base_seed = self.base_seed;
                c.smoothing_window = self.smoothing_window;
                c.validate()?;
                out.push(c);
            }
        }
        Ok(out)
    }
}

/// Runs the whole grid, then writes one SVG per length comparing the
/// modes' smoothed mean curves. Returns the run directories in order.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<PathBuf>> {
    let experiments = config.experiments()?;
    let mut dirs = Vec::with_capacity(experiments.len());
    let per_length = config.modes.len();
    for group in experiments.chunks(per_length) {
        let mut curves = Vec::with_capacity(per_length);
        let mut labels = Vec::with_capacity(per_length);
        for exp in group {
            let out = run_experiment(exp)?;
            let curve = aggregate(&out.logs, exp.smoothing_window)?;
            curve.write_csv(&out.dir.join("curve.csv"))?;
            curves.push(curve.smoothed);
            labels.push(exp.agent.mode.name().to_string());
            dirs.push(out.dir);
        }
        let name = group[0].environment.name();
        let title = format!("{name}: mean return over {} repetitions", config.num_repetitions);
        emit_plot(&curves, &labels, &title, &config.output_dir.join(format!("{name}.svg")))?;
    }
    Ok(dirs)
}
