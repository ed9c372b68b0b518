//! Deterministic episodic environments behind a common reset/step interface.
//!
//! Chain and the diagnostic tree are finite MDPs ([`FiniteMdp`]) wrapped by
//! [`TabularEnv`], which lets the oracle enumerate them exactly. CartPole
//! is a continuous-state simulator with its own seeded initial-state RNG.

mod cartpole;
mod chain;
mod diagnostic;

use std::fmt;
use std::ops::Deref;

pub use cartpole::{CartPole, CartPoleConfig, CartPoleState};
pub use chain::{Chain, ChainConfig};
pub use diagnostic::DiagnosticMdp;

use crate::{Error, Result};

/// Real-valued feature vector presented to the agent.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation(Vec<f64>);

impl Observation {
    pub fn new(values: Vec<f64>) -> Self {
        Observation(values)
    }

    pub fn one_hot(dim: usize, index: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[index] = 1.0;
        Observation(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Observation {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub terminal: bool,
}

/// Episodic environment with a discrete action set.
///
/// `step` must not be called before `reset` or after a terminal step.
pub trait Environment: Send {
    fn num_actions(&self) -> usize;
    fn observation_dim(&self) -> usize;
    fn reset(&mut self) -> Observation;
    fn step(&mut self, action: usize) -> Result<StepResult>;
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn num_actions(&self) -> usize {
        (**self).num_actions()
    }
    fn observation_dim(&self) -> usize {
        (**self).observation_dim()
    }
    fn reset(&mut self) -> Observation {
        (**self).reset()
    }
    fn step(&mut self, action: usize) -> Result<StepResult> {
        (**self).step(action)
    }
}

/// Outcome of a deterministic transition in a [`FiniteMdp`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub next_state: usize,
    pub reward: f64,
    pub terminal: bool,
}

/// A deterministic, finite-horizon MDP whose states can be enumerated.
pub trait FiniteMdp {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn initial_state(&self) -> usize;
    /// Longest possible episode, in steps.
    fn horizon(&self) -> usize;
    fn transition(&self, state: usize, action: usize) -> Outcome;
    fn observe(&self, state: usize) -> Observation;
}

/// Adapts a [`FiniteMdp`] to the stepping [`Environment`] interface.
#[derive(Clone, Debug)]
pub struct TabularEnv<M> {
    mdp: M,
    state: Option<usize>,
}

impl<M: FiniteMdp> TabularEnv<M> {
    pub fn new(mdp: M) -> Self {
        TabularEnv { mdp, state: None }
    }

    pub fn mdp(&self) -> &M {
        &self.mdp
    }

    /// Current state index, or `None` before reset and after termination.
    pub fn state(&self) -> Option<usize> {
        self.state
    }
}

impl<M: FiniteMdp + Send> Environment for TabularEnv<M> {
    fn num_actions(&self) -> usize {
        self.mdp.num_actions()
    }

    fn observation_dim(&self) -> usize {
        self.mdp.num_states()
    }

    fn reset(&mut self) -> Observation {
        let s = self.mdp.initial_state();
        self.state = Some(s);
        self.mdp.observe(s)
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        check_action(action, self.mdp.num_actions())?;
        let s = self
            .state
            .ok_or_else(|| Error::State("step called on a finished or unreset episode".into()))?;
        let out = self.mdp.transition(s, action);
        self.state = if out.terminal { None } else { Some(out.next_state) };
        Ok(StepResult {
            observation: self.mdp.observe(out.next_state),
            reward: out.reward,
            terminal: out.terminal,
        })
    }
}

pub(crate) fn check_action(action: usize, num_actions: usize) -> Result<()> {
    if action >= num_actions {
        return Err(Error::Argument(format!(
            "action {action} out of range for {num_actions} actions"
        )));
    }
    Ok(())
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Builds a Chain environment.
pub fn make_chain(config: ChainConfig) -> Result<TabularEnv<Chain>> {
    Ok(TabularEnv::new(Chain::new(config)?))
}

/// Builds a CartPole environment with standard constants.
pub fn make_cartpole(seed: u64) -> CartPole {
    CartPole::new(CartPoleConfig::default(), seed)
}

/// Builds a full binary-tree MDP of the given depth.
pub fn make_diagnostic_mdp(depth: usize, leaf_rewards: Vec<f64>) -> Result<TabularEnv<DiagnosticMdp>> {
    Ok(TabularEnv::new(DiagnosticMdp::new(depth, leaf_rewards)?))
}
