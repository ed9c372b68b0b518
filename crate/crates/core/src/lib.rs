//! Directed exploration through propagated value uncertainty.
//!
//! The crate contains everything needed to run the experiments end to end:
//!
//! * [`envs`]: Chain, CartPole and a small enumerable binary-tree MDP.
//! * [`nn`]: per-action multilayer perceptrons with inverted dropout,
//!   hand-written backpropagation and Adam.
//! * [`distrib`]: Gaussian return propagation, the distributional squared
//!   loss and closed-form two-Gaussian Thompson probabilities.
//! * [`agent`]: SARSA learners with point, dropout, Gaussian-return and
//!   combined (double uncertain) value estimates, selecting actions by
//!   Thompson sampling or epsilon-greedy.
//! * [`ire`]: initial return entropy of an environment under a uniform
//!   random policy.
//! * [`oracle`]: exact return distributions and moment fixed points used as
//!   ground truth in tests.
//! * [`harness`]: seeded experiment runner, CSV logs, SVG learning curves
//!   and the command-line interface.

pub mod agent;
pub mod distrib;
pub mod envs;
mod error;
pub mod harness;
pub mod ire;
pub mod nn;
pub mod oracle;
pub mod rng;

pub use error::{Error, Result};
