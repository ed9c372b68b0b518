//! Cart-pole balancing with the classic Euler-integrated dynamics.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_action, Environment, Observation, StepResult};
use crate::rng::{seeded, Rng};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CartPoleConfig {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    /// Half the pole length.
    pub half_length: f64,
    pub force: f64,
    pub dt: f64,
    /// Termination threshold on |pole angle|, radians.
    pub angle_limit: f64,
    pub position_limit: f64,
    pub step_cap: usize,
    /// Initial state components are drawn uniformly from `[-r, r]`.
    pub init_range: f64,
}

impl Default for CartPoleConfig {
    fn default() -> Self {
        CartPoleConfig {
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_length: 0.5,
            force: 10.0,
            dt: 0.02,
            angle_limit: 12.0 * 2.0 * std::f64::consts::PI / 360.0,
            position_limit: 2.4,
            step_cap: 500,
            init_range: 0.05,
        }
    }
}

/// `[x, x_dot, theta, theta_dot]`.
pub type CartPoleState = [f64; 4];

#[derive(Clone, Debug)]
pub struct CartPole {
    config: CartPoleConfig,
    state: CartPoleState,
    steps: usize,
    running: bool,
    rng: Rng,
}

impl CartPole {
    pub fn new(config: CartPoleConfig, seed: u64) -> Self {
        CartPole {
            config,
            state: [0.0; 4],
            steps: 0,
            running: false,
            rng: seeded(seed),
        }
    }

    pub fn config(&self) -> &CartPoleConfig {
        &self.config
    }

    pub fn state(&self) -> CartPoleState {
        self.state
    }

    /// Starts an episode from an explicit state instead of a random one.
    pub fn reset_to(&mut self, state: CartPoleState) -> Observation {
        self.state = state;
        self.steps = 0;
        self.running = true;
        Observation::new(state.to_vec())
    }

    fn integrate(&mut self, action: usize) {
        let c = &self.config;
        let [x, x_dot, theta, theta_dot] = self.state;
        let force = if action == 1 { c.force } else { -c.force };
        let total_mass = c.cart_mass + c.pole_mass;
        let pole_mass_length = c.pole_mass * c.half_length;
        let (sin, cos) = theta.sin_cos();

        let temp = (force + pole_mass_length * theta_dot * theta_dot * sin) / total_mass;
        let theta_acc = (c.gravity * sin - cos * temp)
            / (c.half_length * (4.0 / 3.0 - c.pole_mass * cos * cos / total_mass));
        let x_acc = temp - pole_mass_length * theta_acc * cos / total_mass;

        self.state = [
            x + c.dt * x_dot,
            x_dot + c.dt * x_acc,
            theta + c.dt * theta_dot,
            theta_dot + c.dt * theta_acc,
        ];
    }
}

impl Environment for CartPole {
    fn num_actions(&self) -> usize {
        2
    }

    fn observation_dim(&self) -> usize {
        4
    }

    fn reset(&mut self) -> Observation {
        let r = self.config.init_range;
        let state = std::array::from_fn(|_| self.rng.random_range(-r..=r));
        self.reset_to(state)
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        check_action(action, 2)?;
        if !self.running {
            return Err(Error::State("step called on a finished or unreset episode".into()));
        }
        self.integrate(action);
        self.steps += 1;
        let [x, _, theta, _] = self.state;
        let fallen = x.abs() > self.config.position_limit || theta.abs() > self.config.angle_limit;
        let terminal = fallen || self.steps >= self.config.step_cap;
        self.running = !terminal;
        Ok(StepResult {
            observation: Observation::new(self.state.to_vec()),
            reward: 1.0,
            terminal,
        })
    }
}
