//! Lookup-table form of the distributional squared-loss update.
//!
//! With one free `(mu, sigma)` pair per state-action, a gradient step on
//! `(r + gamma mu' - mu)^2 + (gamma sigma' - sigma)^2` with step size
//! `1/n` keeps `mu` and `sigma` at the running mean of their targets. The
//! next action `a'` is sampled from the evaluated policy, as in training.

use rand::Rng as _;

use crate::distrib::GaussianReturn;
use crate::envs::FiniteMdp;
use crate::oracle::{reachable_levels, TabularPolicy};
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct TabularLearner {
    gamma: f64,
    values: Vec<Vec<GaussianReturn>>,
    counts: Vec<Vec<u64>>,
}

impl TabularLearner {
    /// All entries start at `mu = 0`, `sigma = 1`.
    pub fn new(num_states: usize, num_actions: usize, gamma: f64) -> Self {
        TabularLearner {
            gamma,
            values: vec![vec![GaussianReturn { mu: 0.0, sigma: 1.0 }; num_actions]; num_states],
            counts: vec![vec![0; num_actions]; num_states],
        }
    }

    pub fn value(&self, state: usize, action: usize) -> GaussianReturn {
        self.values[state][action]
    }

    pub fn count(&self, state: usize, action: usize) -> u64 {
        self.counts[state][action]
    }

    /// One update of `(state, action)` from reward `reward` and the next
    /// state-action, or from `(0, 0)` when `next` is `None`.
    pub fn update(&mut self, state: usize, action: usize, reward: f64, next: Option<(usize, usize)>) {
        let boot = next.map_or(GaussianReturn::TERMINAL, |(s, a)| self.values[s][a]);
        let n = &mut self.counts[state][action];
        *n += 1;
        let step = 1.0 / *n as f64;
        let v = &mut self.values[state][action];
        v.mu += step * (reward + self.gamma * boot.mu - v.mu);
        v.sigma += step * (self.gamma * boot.sigma - v.sigma);
    }

    /// `sweeps` passes over every reachable state-action, deepest states
    /// first, each update bootstrapping from one `a' ~ policy`.
    pub fn train<M: FiniteMdp>(&mut self, mdp: &M, policy: &TabularPolicy, sweeps: usize, rng: &mut Rng) -> Result<()> {
        if self.values.len() != mdp.num_states() || self.values[0].len() != mdp.num_actions() {
            return Err(Error::Argument("table shape does not match the MDP".into()));
        }
        let levels = reachable_levels(mdp);
        for _ in 0..sweeps {
            for &s in levels.iter().rev().flatten() {
                for a in 0..mdp.num_actions() {
                    let o = mdp.transition(s, a);
                    let next = (!o.terminal).then(|| (o.next_state, sample(policy.probs(o.next_state), rng)));
                    self.update(s, a, o.reward, next);
                }
            }
        }
        Ok(())
    }
}

fn sample(probs: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (a, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}
