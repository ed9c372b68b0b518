use rand::Rng as _;

use super::{FiniteMdp, Observation, Outcome};
use crate::rng::seeded;
use crate::{Error, Result};

/// Index of the "right" action, the correct one everywhere in the ordered chain.
pub const RIGHT: usize = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainConfig {
    pub length: usize,
    pub ordered: bool,
    pub domain_seed: u64,
}

impl ChainConfig {
    pub fn ordered(length: usize) -> Self {
        ChainConfig {
            length,
            ordered: true,
            domain_seed: 0,
        }
    }

    pub fn unordered(length: usize, domain_seed: u64) -> Self {
        ChainConfig {
            length,
            ordered: false,
            domain_seed,
        }
    }
}

/// Chain of `length` states with two actions.
///
/// In states `1..N-1` one action (the correct one) moves the agent a state
/// further and the other ends the episode with reward 0. The last state
/// carries the reward: any action taken there pays 1 and terminates. A
/// uniform random policy therefore succeeds with probability `2^-(N-1)`
/// and an episode lasts at most `N` steps.
#[derive(Clone, Debug)]
pub struct Chain {
    config: ChainConfig,
    correct: Vec<usize>,
}

impl Chain {
    pub fn new(config: ChainConfig) -> Result<Self> {
        if config.length < 1 {
            return Err(Error::Config("chain length must be at least 1".into()));
        }
        let decisions = config.length - 1;
        let correct = if config.ordered {
            vec![RIGHT; decisions]
        } else {
            let mut rng = seeded(config.domain_seed);
            (0..decisions).map(|_| usize::from(rng.random_bool(0.5))).collect()
        };
        Ok(Chain { config, correct })
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn length(&self) -> usize {
        self.config.length
    }

    /// Correct action in each non-final state, in chain order.
    pub fn correct_actions(&self) -> &[usize] {
        &self.correct
    }
}

impl FiniteMdp for Chain {
    fn num_states(&self) -> usize {
        self.config.length
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn initial_state(&self) -> usize {
        0
    }

    fn horizon(&self) -> usize {
        self.config.length
    }

    fn transition(&self, state: usize, action: usize) -> Outcome {
        if state + 1 == self.config.length {
            return Outcome {
                next_state: state,
                reward: 1.0,
                terminal: true,
            };
        }
        if action == self.correct[state] {
            Outcome {
                next_state: state + 1,
                reward: 0.0,
                terminal: false,
            }
        } else {
            Outcome {
                next_state: state,
                reward: 0.0,
                terminal: true,
            }
        }
    }

    fn observe(&self, state: usize) -> Observation {
        Observation::one_hot(self.config.length, state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_chain, Environment};

    fn run(cfg: ChainConfig, actions: &[usize]) -> (Vec<f64>, bool) {
        let mut env = make_chain(cfg).unwrap();
        env.reset();
        let mut rewards = Vec::new();
        let mut done = false;
        for &a in actions {
            let s = env.step(a).unwrap();
            rewards.push(s.reward);
            if s.terminal {
                done = true;
                break;
            }
        }
        (rewards, done)
    }

    #[test]
    fn ordered_walk_right_pays_on_last_step() {
        let (rewards, done) = run(ChainConfig::ordered(3), &[1, 1, 1]);
        assert_eq!(rewards, vec![0.0, 0.0, 1.0]);
        assert!(done);
    }

    #[test]
    fn wrong_first_action_terminates_with_zero() {
        let (rewards, done) = run(ChainConfig::ordered(3), &[0, 1, 1]);
        assert_eq!(rewards, vec![0.0]);
        assert!(done);
    }

    #[test]
    fn single_state_chain_pays_immediately() {
        let (rewards, done) = run(ChainConfig::ordered(1), &[1]);
        assert_eq!(rewards, vec![1.0]);
        assert!(done);
    }

    #[test]
    fn zero_length_is_rejected() {
        assert!(matches!(Chain::new(ChainConfig::ordered(0)), Err(Error::Config(_))));
    }

    #[test]
    fn unordered_sequence_is_fixed_by_seed() {
        let a = Chain::new(ChainConfig::unordered(5, 42)).unwrap();
        let b = Chain::new(ChainConfig::unordered(5, 42)).unwrap();
        assert_eq!(a.correct_actions(), b.correct_actions());
        assert_eq!(a.correct_actions().len(), 4);
        let many: Vec<_> = (0..20)
            .map(|s| Chain::new(ChainConfig::unordered(12, s)).unwrap().correct_actions().to_vec())
            .collect();
        assert!(many.iter().any(|c| c != &many[0]));
    }

    #[test]
    fn observations_are_one_hot() {
        let mut env = make_chain(ChainConfig::ordered(4)).unwrap();
        assert_eq!(env.reset().as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        let s = env.step(1).unwrap();
        assert_eq!(s.observation.as_slice(), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(s.reward, 0.0);
        assert!(!s.terminal);
        assert!(matches!(env.step(7), Err(Error::Argument(_))));
    }

    #[test]
    fn following_the_unordered_sequence_succeeds() {
        let chain = Chain::new(ChainConfig::unordered(9, 3)).unwrap();
        let mut actions = chain.correct_actions().to_vec();
        actions.push(0);
        let (rewards, done) = run(ChainConfig::unordered(9, 3), &actions);
        assert_eq!(rewards.len(), 9);
        assert_eq!(rewards.iter().sum::<f64>(), 1.0);
        assert!(done);
    }
}
