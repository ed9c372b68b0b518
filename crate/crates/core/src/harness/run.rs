use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::agent::Agent;
use crate::{Error, Result};

/// One logged episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub repetition: usize,
    pub episode: usize,
    #[serde(rename = "return")]
    pub total_return: f64,
    pub steps: usize,
    pub wall_ms: u64,
}

/// Per-episode results of one repetition.
#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub repetition: usize,
    pub rows: Vec<EpisodeRow>,
}

impl RunLog {
    pub fn returns(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.total_return).collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a log, checking that episodes run contiguously from 0 within
    /// one repetition.
    pub fn read(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::Reader::from_reader(file);
        let rows = reader.deserialize().collect::<std::result::Result<Vec<EpisodeRow>, _>>()?;
        let repetition = rows.first().map_or(0, |r| r.repetition);
        for (i, r) in rows.iter().enumerate() {
            if r.episode != i || r.repetition != repetition {
                return Err(Error::Config(format!(
                    "{}: row {i} is (repetition {}, episode {}), logs must be contiguous",
                    path.display(),
                    r.repetition,
                    r.episode
                )));
            }
        }
        Ok(RunLog { repetition, rows })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionManifest {
    pub index: usize,
    pub seed: u64,
    pub agent_seed: u64,
    pub environment_seed: u64,
    /// Realised correct actions for Chain environments.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correct_actions: Option<Vec<usize>>,
    pub log: String,
}

/// Everything needed to reproduce an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: ExperimentConfig,
    pub repetitions: Vec<RepetitionManifest>,
}

/// Outcome of [`run_experiment`].
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub dir: PathBuf,
    pub manifest: PathBuf,
    pub log_paths: Vec<PathBuf>,
    pub logs: Vec<RunLog>,
}

pub fn log_file_name(rep: usize) -> String {
    format!("rep{rep}.csv")
}

pub const MANIFEST_FILE: &str = "manifest.toml";

/// Runs every repetition of `config` with a fresh agent and environment,
/// writing `rep<i>.csv` logs and `manifest.toml` to the output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let dir = config.output_dir.clone();
    let repetitions = (0..config.num_repetitions)
        .map(|rep| {
            let (agent_seed, environment_seed) = config.derived_seeds(rep);
            Ok(RepetitionManifest {
                index: rep,
                seed: config.repetition_seed(rep),
                agent_seed,
                environment_seed,
                correct_actions: config.environment.correct_actions(environment_seed)?,
                log: log_file_name(rep),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let manifest = Manifest {
        experiment: config.clone(),
        repetitions,
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;

    let logs = manifest
        .repetitions
        .par_iter()
        .map(|r| run_repetition(config, r))
        .collect::<Result<Vec<_>>>()?;
    let mut log_paths = Vec::with_capacity(logs.len());
    for (log, r) in logs.iter().zip(&manifest.repetitions) {
        let path = dir.join(&r.log);
        log.write(&path)?;
        log_paths.push(path);
    }
    Ok(ExperimentOutput {
        dir,
        manifest: manifest_path,
        log_paths,
        logs,
    })
}

fn run_repetition(config: &ExperimentConfig, rep: &RepetitionManifest) -> Result<RunLog> {
    let mut env = config.environment.build(rep.environment_seed)?;
    let mut agent_config = config.agent.clone();
    agent_config.seed = rep.agent_seed;
    let mut agent = Agent::new(agent_config, env.observation_dim(), env.num_actions())?;
    let mut rows = Vec::with_capacity(config.num_episodes);
    for episode in 0..config.num_episodes {
        let start = Instant::now();
        let stats = agent.run_episode(env.as_mut())?;
        let wall_ms = if config.record_wall_time {
            start.elapsed().as_millis() as u64
        } else {
            0
        };
        rows.push(EpisodeRow {
            repetition: rep.index,
            episode,
            total_return: stats.total_reward,
            steps: stats.steps,
            wall_ms,
        });
    }
    Ok(RunLog {
        repetition: rep.index,
        rows,
    })
}

/// Reads every log listed in a run directory's manifest.
pub fn read_run_dir(dir: &Path) -> Result<(Manifest, Vec<RunLog>)> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let logs = manifest
        .repetitions
        .iter()
        .map(|r| RunLog::read(&dir.join(&r.log)))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, logs))
}
