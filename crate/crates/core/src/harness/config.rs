use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, Mode};
use crate::envs::{make_chain, make_diagnostic_mdp, CartPole, CartPoleConfig, ChainConfig, Environment, FiniteMdp};
use crate::rng::derive_seed;
use crate::{Error, Result};

pub const DEFAULT_REPETITIONS: usize = 5;
pub const DEFAULT_WINDOW: usize = 10;

/// Environment family and parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Chain {
        length: usize,
        #[serde(default)]
        ordered: bool,
    },
    #[serde(rename = "cartpole")]
    CartPole {
        #[serde(default)]
        physics: CartPoleConfig,
    },
    Diagnostic {
        depth: usize,
        leaf_rewards: Vec<f64>,
    },
}

impl EnvSpec {
    pub fn name(&self) -> String {
        match self {
            EnvSpec::Chain { length, ordered: true } => format!("ordered_chain{length}"),
            EnvSpec::Chain { length, .. } => format!("chain{length}"),
            EnvSpec::CartPole { .. } => "cartpole".into(),
            EnvSpec::Diagnostic { depth, .. } => format!("diagnostic{depth}"),
        }
    }

    fn validate(&self) -> Result<()> {
        self.build(0).map(|_| ())
    }

    /// Instantiates the environment; `seed` fixes the unordered Chain's
    /// correct actions and CartPole's initial states.
    pub fn build(&self, seed: u64) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvSpec::Chain { .. } => Box::new(make_chain(self.chain_config(seed).expect("chain spec"))?),
            EnvSpec::CartPole { physics } => Box::new(CartPole::new(physics.clone(), seed)),
            EnvSpec::Diagnostic { depth, leaf_rewards } => Box::new(make_diagnostic_mdp(*depth, leaf_rewards.clone())?),
        })
    }

    fn chain_config(&self, seed: u64) -> Option<ChainConfig> {
        match *self {
            EnvSpec::Chain { length, ordered } => Some(if ordered {
                ChainConfig::ordered(length)
            } else {
                ChainConfig::unordered(length, seed)
            }),
            _ => None,
        }
    }

    /// Realised correct actions of a Chain built with `seed`.
    pub fn correct_actions(&self, seed: u64) -> Result<Option<Vec<usize>>> {
        match self.chain_config(seed) {
            Some(c) => Ok(Some(make_chain(c)?.mdp().correct_actions().to_vec())),
            None => Ok(None),
        }
    }

    /// Observation length.
    pub fn observation_dim(&self) -> usize {
        match self {
            EnvSpec::Chain { length, .. } => *length,
            EnvSpec::CartPole { .. } => 4,
            EnvSpec::Diagnostic { depth, leaf_rewards } => make_diagnostic_mdp(*depth, leaf_rewards.clone())
                .map(|e| e.mdp().num_states())
                .unwrap_or(0),
        }
    }
}

/// Agent settings as written in a config file: `mode` is required, every
/// other field falls back to the mode's default. The seed is not
/// configurable here; it is derived per repetition.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentOverrides {
    pub mode: Option<Mode>,
    pub epsilon: Option<f64>,
    pub keep_prob: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub target_sync_interval: Option<u64>,
    pub replay_capacity: Option<usize>,
    pub prioritized_fraction: Option<f64>,
    pub train_interval: Option<usize>,
    pub hidden_layers: Option<Vec<usize>>,
}

impl AgentOverrides {
    pub fn resolve(&self, mode: Mode) -> AgentConfig {
        let mut c = AgentConfig::new(mode);
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { c.$f = v.clone(); } )* };
        }
        take!(
            epsilon,
            keep_prob,
            gamma,
            lambda,
            learning_rate,
            batch_size,
            target_sync_interval,
            replay_capacity,
            prioritized_fraction,
            train_interval,
            hidden_layers
        );
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    num_episodes: usize,
    #[serde(default = "default_repetitions")]
    num_repetitions: usize,
    #[serde(default)]
    base_seed: u64,
    output_dir: PathBuf,
    #[serde(default = "default_window")]
    smoothing_window: usize,
    #[serde(default)]
    record_wall_time: bool,
    environment: EnvSpec,
    agent: AgentOverrides,
}

fn default_repetitions() -> usize {
    DEFAULT_REPETITIONS
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}

/// A fully resolved experiment: every default is explicit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub num_episodes: usize,
    pub num_repetitions: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    /// Moving-average window of the aggregated curve.
    pub smoothing_window: usize,
    /// Log real elapsed milliseconds; off by default because it makes
    /// logs differ between otherwise identical runs.
    pub record_wall_time: bool,
    pub environment: EnvSpec,
    /// Agent settings; `seed` is overwritten per repetition.
    pub agent: AgentConfig,
}

impl ExperimentConfig {
    pub fn new(environment: EnvSpec, agent: AgentConfig, num_episodes: usize, output_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            num_episodes,
            num_repetitions: DEFAULT_REPETITIONS,
            base_seed: 0,
            output_dir: output_dir.into(),
            smoothing_window: DEFAULT_WINDOW,
            record_wall_time: false,
            environment,
            agent,
        }
    }

    /// Parses a config file. Relative output directories resolve against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if config.output_dir.is_relative() {
            if let Some(parent) = path.parent() {
                config.output_dir = parent.join(&config.output_dir);
            }
        }
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawExperiment = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mode = raw
            .agent
            .mode
            .ok_or_else(|| Error::Config("agent.mode is required".into()))?;
        let config = ExperimentConfig {
            num_episodes: raw.num_episodes,
            num_repetitions: raw.num_repetitions,
            base_seed: raw.base_seed,
            output_dir: raw.output_dir,
            smoothing_window: raw.smoothing_window,
            record_wall_time: raw.record_wall_time,
            environment: raw.environment,
            agent: raw.agent.resolve(mode),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_repetitions == 0 || self.num_episodes == 0 {
            return Err(Error::Config("num_repetitions and num_episodes must be at least 1".into()));
        }
        if self.smoothing_window == 0 {
            return Err(Error::Config("smoothing_window must be at least 1".into()));
        }
        self.environment.validate()?;
        self.agent.validate()
    }

    /// Seed of repetition `rep`.
    pub fn repetition_seed(&self, rep: usize) -> u64 {
        self.base_seed.wrapping_add(rep as u64)
    }

    /// `(agent seed, environment seed)` derived from the repetition seed.
    pub fn derived_seeds(&self, rep: usize) -> (u64, u64) {
        let seed = self.repetition_seed(rep);
        (derive_seed(seed, 1), derive_seed(seed, 2))
    }
}
