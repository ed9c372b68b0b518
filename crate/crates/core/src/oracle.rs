//! Exact ground truth for finite, acyclic MDPs.
//!
//! These are reference computations for tests: full trace enumeration of
//! return distributions, the joint fixed point of the mean and spread
//! backups, and the expected waiting time for a first Chain success under
//! a uniform random policy.

use std::collections::VecDeque;

use rand::Rng as _;

use crate::distrib::GaussianReturn;
use crate::envs::FiniteMdp;
use crate::rng::Rng;
use crate::{Error, Result};

/// Longest episode [`enumerate_returns`] accepts.
pub const MAX_ENUMERATION_DEPTH: usize = 20;

/// Per-state action probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularPolicy {
    probs: Vec<Vec<f64>>,
}

impl TabularPolicy {
    /// Validates that every row is a probability vector of equal length.
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = probs.first() else {
            return Err(Error::Argument("a policy needs at least one state".into()));
        };
        let width = first.len();
        for (s, row) in probs.iter().enumerate() {
            if row.len() != width || width == 0 {
                return Err(Error::Argument(format!("state {s} has {} actions, expected {width}", row.len())));
            }
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::Argument(format!("state {s} probabilities {row:?} are not a distribution")));
            }
        }
        Ok(TabularPolicy { probs })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        TabularPolicy {
            probs: vec![vec![1.0 / num_actions as f64; num_actions]; num_states],
        }
    }

    /// Always takes `actions[s]` in state `s`.
    pub fn deterministic(actions: &[usize], num_actions: usize) -> Result<Self> {
        let probs = actions
            .iter()
            .map(|&a| {
                if a >= num_actions {
                    return Err(Error::Argument(format!("action {a} out of range 0..{num_actions}")));
                }
                let mut row = vec![0.0; num_actions];
                row[a] = 1.0;
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(probs)
    }

    /// Independent random distributions, every action with probability at
    /// least `floor`.
    pub fn random(num_states: usize, num_actions: usize, floor: f64, rng: &mut Rng) -> Self {
        let probs = (0..num_states)
            .map(|_| {
                let raw: Vec<f64> = (0..num_actions).map(|_| rng.random::<f64>()).collect();
                let total: f64 = raw.iter().sum();
                let free = 1.0 - floor * num_actions as f64;
                raw.iter().map(|w| floor + free * w / total).collect()
            })
            .collect();
        TabularPolicy { probs }
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    pub fn num_actions(&self) -> usize {
        self.probs[0].len()
    }

    pub fn probs(&self, state: usize) -> &[f64] {
        &self.probs[state]
    }

    fn check<M: FiniteMdp>(&self, mdp: &M) -> Result<()> {
        if self.num_states() != mdp.num_states() || self.num_actions() != mdp.num_actions() {
            return Err(Error::Argument(format!(
                "policy is {}x{}, MDP has {} states and {} actions",
                self.num_states(),
                self.num_actions(),
                mdp.num_states(),
                mdp.num_actions()
            )));
        }
        Ok(())
    }
}

/// Non-terminal states reachable from the initial state, grouped by the
/// step at which they are first reached.
pub fn reachable_levels<M: FiniteMdp>(mdp: &M) -> Vec<Vec<usize>> {
    let mut seen = vec![false; mdp.num_states()];
    let mut levels = Vec::new();
    let mut frontier = VecDeque::from([mdp.initial_state()]);
    seen[mdp.initial_state()] = true;
    while !frontier.is_empty() {
        let level: Vec<usize> = frontier.drain(..).collect();
        for &s in &level {
            for a in 0..mdp.num_actions() {
                let o = mdp.transition(s, a);
                if !o.terminal && !seen[o.next_state] {
                    seen[o.next_state] = true;
                    frontier.push_back(o.next_state);
                }
            }
        }
        levels.push(level);
    }
    levels
}

/// Finite distribution over discounted returns.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactReturnDistribution {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl ExactReturnDistribution {
    /// Sorted distinct return values.
    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability mass at exactly `value`.
    pub fn prob_of(&self, value: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.probs)
            .filter(|(v, _)| **v == value)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.probs).map(|(v, p)| v * p).sum()
    }

    pub fn std(&self) -> f64 {
        let mean = self.mean();
        let var: f64 = self
            .support
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| p * (v - mean) * (v - mean))
            .sum();
        var.max(0.0).sqrt()
    }
}

/// Distribution of the discounted return after taking `action` in `state`
/// and following `policy`, by exhaustive enumeration of every trace.
pub fn enumerate_returns<M: FiniteMdp>(
    mdp: &M,
    policy: &TabularPolicy,
    state: usize,
    action: usize,
    gamma: f64,
) -> Result<ExactReturnDistribution> {
    policy.check(mdp)?;
    if mdp.horizon() > MAX_ENUMERATION_DEPTH {
        return Err(Error::Unsupported(format!(
            "horizon {} exceeds the enumeration limit of {MAX_ENUMERATION_DEPTH}",
            mdp.horizon()
        )));
    }
    if state >= mdp.num_states() || action >= mdp.num_actions() {
        return Err(Error::Argument(format!("({state}, {action}) is not a state-action pair of this MDP")));
    }
    let mut traces = Vec::new();
    walk(mdp, policy, state, action, gamma, 0.0, 1.0, 1.0, 0, &mut traces)?;
    traces.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut support: Vec<f64> = Vec::new();
    let mut probs: Vec<f64> = Vec::new();
    for (value, p) in traces {
        if support.last() == Some(&value) {
            *probs.last_mut().expect("parallel vectors") += p;
        } else {
            support.push(value);
            probs.push(p);
        }
    }
    Ok(ExactReturnDistribution { support, probs })
}

#[allow(clippy::too_many_arguments)]
fn walk<M: FiniteMdp>(
    mdp: &M,
    policy: &TabularPolicy,
    state: usize,
    action: usize,
    gamma: f64,
    acc: f64,
    discount: f64,
    prob: f64,
    depth: usize,
    out: &mut Vec<(f64, f64)>,
) -> Result<()> {
    if depth >= MAX_ENUMERATION_DEPTH {
        return Err(Error::Unsupported(format!(
            "trace longer than {MAX_ENUMERATION_DEPTH} steps"
        )));
    }
    let o = mdp.transition(state, action);
    let acc = acc + discount * o.reward;
    if o.terminal {
        out.push((acc, prob));
        return Ok(());
    }
    for (a, &p) in policy.probs(o.next_state).iter().enumerate() {
        if p > 0.0 {
            walk(mdp, policy, o.next_state, a, gamma, acc, discount * gamma, prob * p, depth + 1, out)?;
        }
    }
    Ok(())
}

/// Joint fixed point of `mu(s,a) = r + gamma * sum pi mu(s',a')` and
/// `sigma(s,a) = gamma * sum pi sigma(s',a')`, terminal transitions
/// bootstrapping from `(0, 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentFixedPoint {
    /// Indexed by state; `None` for states never reached.
    values: Vec<Option<Vec<GaussianReturn>>>,
}

impl MomentFixedPoint {
    /// `None` if `state` is unreachable.
    pub fn get(&self, state: usize, action: usize) -> Option<GaussianReturn> {
        self.values.get(state)?.as_ref()?.get(action).copied()
    }

    /// Every reachable `(state, action, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, GaussianReturn)> + '_ {
        self.values.iter().enumerate().flat_map(|(s, row)| {
            row.iter()
                .flat_map(move |r| r.iter().enumerate().map(move |(a, v)| (s, a, *v)))
        })
    }
}

/// Synchronous backward sweeps of the mean and spread recursions over all
/// reachable state-action pairs. Exact after `horizon` sweeps on acyclic
/// MDPs.
pub fn moment_dp<M: FiniteMdp>(mdp: &M, policy: &TabularPolicy, gamma: f64, sweeps: usize) -> Result<MomentFixedPoint> {
    policy.check(mdp)?;
    if sweeps < mdp.horizon() {
        return Err(Error::Argument(format!(
            "{sweeps} sweeps cannot reach the fixed point of a horizon-{} MDP",
            mdp.horizon()
        )));
    }
    let na = mdp.num_actions();
    let mut values: Vec<Option<Vec<GaussianReturn>>> = vec![None; mdp.num_states()];
    for s in reachable_levels(mdp).into_iter().flatten() {
        values[s] = Some(vec![GaussianReturn::TERMINAL; na]);
    }
    for _ in 0..sweeps {
        let mut next = values.clone();
        for (s, row) in next.iter_mut().enumerate() {
            let Some(row) = row else { continue };
            for (a, v) in row.iter_mut().enumerate() {
                let o = mdp.transition(s, a);
                *v = if o.terminal {
                    GaussianReturn::dirac(o.reward)
                } else {
                    let succ = values[o.next_state].as_ref().expect("successor is reachable");
                    let pi = policy.probs(o.next_state);
                    let mu: f64 = succ.iter().zip(pi).map(|(g, p)| p * g.mu).sum();
                    let sigma: f64 = succ.iter().zip(pi).map(|(g, p)| p * g.sigma).sum();
                    GaussianReturn {
                        mu: o.reward + gamma * mu,
                        sigma: gamma * sigma,
                    }
                };
            }
        }
        values = next;
    }
    Ok(MomentFixedPoint { values })
}

/// Mean number of failed episodes before the first rewarded one when a
/// length-`n` Chain is explored uniformly at random: `2^(n-1) - 1`.
pub fn expected_first_success_episodes(n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::Argument("chain length must be at least 1".into()));
    }
    Ok(2f64.powi(n as i32 - 1) - 1.0)
}

/// Failed episodes before the first one with positive return, acting
/// uniformly at random. `None` if no success within `max_episodes`.
pub fn first_success_episode<M: FiniteMdp>(mdp: &M, max_episodes: u64, rng: &mut Rng) -> Option<u64> {
    (0..max_episodes).find(|_| {
        let mut state = mdp.initial_state();
        let mut total = 0.0;
        for _ in 0..=mdp.horizon() {
            let o = mdp.transition(state, rng.random_range(0..mdp.num_actions()));
            total += o.reward;
            if o.terminal {
                break;
            }
            state = o.next_state;
        }
        total > 0.0
    })
}
