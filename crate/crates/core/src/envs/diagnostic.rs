use super::{FiniteMdp, Observation, Outcome};
use crate::{Error, Result};

/// Full binary tree of the given depth; the leaf reached pays its reward.
///
/// Nodes use heap numbering: the root is 0 and node `k` has children
/// `2k+1` (action 0) and `2k+2` (action 1). Leaves are numbered left to
/// right, so the path `(0, 0)` at depth 2 reaches leaf 0 and `(1, 1)`
/// reaches leaf 3.
#[derive(Clone, Debug)]
pub struct DiagnosticMdp {
    depth: usize,
    leaf_rewards: Vec<f64>,
}

impl DiagnosticMdp {
    pub fn new(depth: usize, leaf_rewards: Vec<f64>) -> Result<Self> {
        if depth == 0 || depth > 24 {
            return Err(Error::Config(format!("tree depth {depth} must be in 1..=24")));
        }
        if leaf_rewards.len() != 1 << depth {
            return Err(Error::Config(format!(
                "depth {depth} needs {} leaf rewards, got {}",
                1usize << depth,
                leaf_rewards.len()
            )));
        }
        Ok(DiagnosticMdp {
            depth,
            leaf_rewards,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn leaf_rewards(&self) -> &[f64] {
        &self.leaf_rewards
    }

    fn first_leaf(&self) -> usize {
        (1 << self.depth) - 1
    }
}

impl FiniteMdp for DiagnosticMdp {
    fn num_states(&self) -> usize {
        (1 << (self.depth + 1)) - 1
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn initial_state(&self) -> usize {
        0
    }

    fn horizon(&self) -> usize {
        self.depth
    }

    fn transition(&self, state: usize, action: usize) -> Outcome {
        let child = 2 * state + 1 + action;
        let first_leaf = self.first_leaf();
        if child >= first_leaf {
            Outcome {
                next_state: child,
                reward: self.leaf_rewards[child - first_leaf],
                terminal: true,
            }
        } else {
            Outcome {
                next_state: child,
                reward: 0.0,
                terminal: false,
            }
        }
    }

    fn observe(&self, state: usize) -> Observation {
        Observation::one_hot(self.num_states(), state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_diagnostic_mdp, Environment};

    fn path_return(depth: usize, leaves: &[f64], path: &[usize]) -> f64 {
        let mut env = make_diagnostic_mdp(depth, leaves.to_vec()).unwrap();
        env.reset();
        let mut total = 0.0;
        for (i, &a) in path.iter().enumerate() {
            let s = env.step(a).unwrap();
            total += s.reward;
            assert_eq!(s.terminal, i + 1 == depth);
        }
        total
    }

    #[test]
    fn leaf_lookup() {
        let leaves = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(path_return(2, &leaves, &[0, 0]), 0.0);
        assert_eq!(path_return(2, &leaves, &[1, 1]), 3.0);
        assert_eq!(path_return(2, &leaves, &[0, 1]), 1.0);
        assert_eq!(path_return(1, &[5.0, 5.0], &[0]), 5.0);
        assert_eq!(path_return(1, &[5.0, 5.0], &[1]), 5.0);
    }

    #[test]
    fn enumerating_paths_recovers_leaf_multiset() {
        let leaves: Vec<f64> = vec![3.0, -1.0, 0.5, 3.0, 7.0, 2.0, 2.0, 0.0];
        let mut got: Vec<f64> = (0..8usize)
            .map(|bits| {
                let path: Vec<usize> = (0..3).rev().map(|k| (bits >> k) & 1).collect();
                path_return(3, &leaves, &path)
            })
            .collect();
        let mut want = leaves.clone();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        assert_eq!(got, want);
    }

    #[test]
    fn wrong_leaf_count_is_rejected() {
        assert!(matches!(DiagnosticMdp::new(2, vec![0.0; 3]), Err(Error::Config(_))));
        assert!(matches!(DiagnosticMdp::new(0, vec![0.0]), Err(Error::Config(_))));
    }

    #[test]
    fn observations_are_one_hot_over_nodes() {
        let mut env = make_diagnostic_mdp(2, vec![0.0; 4]).unwrap();
        assert_eq!(env.observation_dim(), 7);
        let o = env.reset();
        assert_eq!(o.iter().sum::<f64>(), 1.0);
        let s = env.step(1).unwrap();
        assert_eq!(s.observation[2], 1.0);
    }
}
