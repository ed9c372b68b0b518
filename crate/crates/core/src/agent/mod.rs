//! SARSA learners with Thompson-sampling exploration.
//!
//! Every learner keeps one independent MLP per action (no shared trunk) and
//! a periodically synchronized target copy. The four modes differ in what
//! the networks represent and how actions are drawn:
//!
//! | mode         | output        | dropout | action selection            |
//! |--------------|---------------|---------|-----------------------------|
//! | `QPoint`     | mean          | no      | epsilon-greedy              |
//! | `Parametric` | mean          | yes     | argmax under sampled masks  |
//! | `Return`     | mean, std dev | no      | argmax of sampled returns   |
//! | `Duvn`       | mean, std dev | yes     | both of the above combined  |

mod policy;
mod replay;
mod tabular;

use serde::{Deserialize, Serialize};

pub use policy::{argmax_random_ties, epsilon_greedy, thompson_choice, ValueSample};
pub use replay::{ReplayBuffer, Transition};
pub use tabular::TabularLearner;

use crate::distrib::{lambda_return, GaussianReturn};
use crate::envs::{Environment, Observation};
use crate::nn::{adam_step, Adam, AdamConfig, DropoutMask, Gradients, Mlp};
use crate::rng::{derive_seed, seeded, Rng};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Point estimate of the mean with epsilon-greedy exploration.
    QPoint,
    /// Dropout posterior over the mean.
    Parametric,
    /// Propagated Gaussian return distribution, point parameters.
    Return,
    /// Dropout posterior over a propagated Gaussian return distribution.
    Duvn,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::QPoint, Mode::Parametric, Mode::Return, Mode::Duvn];

    pub fn has_sigma_head(self) -> bool {
        matches!(self, Mode::Return | Mode::Duvn)
    }

    pub fn uses_dropout(self) -> bool {
        matches!(self, Mode::Parametric | Mode::Duvn)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::QPoint => "q_point",
            Mode::Parametric => "parametric",
            Mode::Return => "return",
            Mode::Duvn => "duvn",
        }
    }

    /// Keep probability used when none is configured.
    pub fn default_keep_prob(self) -> f64 {
        match self {
            Mode::Parametric => 0.75,
            Mode::Duvn => 0.90,
            Mode::QPoint | Mode::Return => 1.0,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown agent mode {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub mode: Mode,
    /// Random-action probability; only used by `QPoint`.
    pub epsilon: f64,
    pub keep_prob: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Gradient steps between target-network copies.
    pub target_sync_interval: u64,
    pub replay_capacity: usize,
    /// Probability that a minibatch slot is filled from the priority queue.
    pub prioritized_fraction: f64,
    /// Environment steps between gradient steps.
    pub train_interval: usize,
    pub hidden_layers: Vec<usize>,
    pub seed: u64,
}

impl AgentConfig {
    pub fn new(mode: Mode) -> Self {
        AgentConfig {
            mode,
            epsilon: 0.05,
            keep_prob: mode.default_keep_prob(),
            gamma: 0.99,
            lambda: 0.0,
            learning_rate: 1e-3,
            batch_size: 32,
            target_sync_interval: 100,
            replay_capacity: 50_000,
            prioritized_fraction: 0.1,
            train_interval: 1,
            hidden_layers: vec![128, 128, 128],
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} must be in [0, 1]")))
            }
        };
        unit("epsilon", self.epsilon)?;
        unit("gamma", self.gamma)?;
        unit("lambda", self.lambda)?;
        unit("prioritized_fraction", self.prioritized_fraction)?;
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(Error::Config(format!("keep_prob = {} must be in (0, 1]", self.keep_prob)));
        }
        if self.mode.uses_dropout() && self.keep_prob >= 1.0 {
            return Err(Error::Config(format!("mode {} needs keep_prob < 1", self.mode.name())));
        }
        if !self.mode.uses_dropout() && self.keep_prob != 1.0 {
            return Err(Error::Config(format!("mode {} needs keep_prob = 1", self.mode.name())));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be finite and non-negative".into()));
        }
        if self.batch_size == 0 || self.target_sync_interval == 0 || self.replay_capacity == 0 || self.train_interval == 0 {
            return Err(Error::Config(
                "batch_size, target_sync_interval, replay_capacity and train_interval must be positive".into(),
            ));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Aggregate statistics of one minibatch update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossStats {
    /// Mean total loss over the batch.
    pub loss: f64,
    pub mu_loss: f64,
    pub sigma_loss: f64,
    pub batch_size: usize,
    pub prioritized_slots: usize,
    /// Subnetwork updates skipped because of non-finite gradients.
    pub skipped_updates: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeStats {
    /// Undiscounted return.
    pub total_reward: f64,
    pub steps: usize,
    pub stored: usize,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of the softplus transform; sets a raw head output for a given
/// standard deviation.
pub fn inverse_softplus(sigma: f64) -> f64 {
    if sigma > 30.0 {
        sigma
    } else {
        sigma.exp_m1().ln()
    }
}

fn head(mode: Mode, raw: &[f64]) -> GaussianReturn {
    if mode.has_sigma_head() {
        GaussianReturn {
            mu: raw[0],
            sigma: softplus(raw[1]),
        }
    } else {
        GaussianReturn::dirac(raw[0])
    }
}

pub struct Agent {
    config: AgentConfig,
    num_actions: usize,
    observation_dim: usize,
    online: Vec<Mlp>,
    target: Vec<Mlp>,
    optimizers: Vec<Adam>,
    grads: Vec<Gradients>,
    replay: ReplayBuffer,
    rng: Rng,
    train_steps: u64,
    episodes: u64,
    env_steps: u64,
}

impl Agent {
    pub fn new(config: AgentConfig, observation_dim: usize, num_actions: usize) -> Result<Self> {
        config.validate()?;
        if observation_dim == 0 || num_actions == 0 {
            return Err(Error::Config("observation_dim and num_actions must be positive".into()));
        }
        let out = if config.mode.has_sigma_head() { 2 } else { 1 };
        let mut sizes = vec![observation_dim];
        sizes.extend(&config.hidden_layers);
        sizes.push(out);
        let online = (0..num_actions)
            .map(|a| Mlp::new(&sizes, derive_seed(config.seed, 100 + a as u64)))
            .collect::<Result<Vec<_>>>()?;
        let adam = AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        };
        let optimizers = online.iter().map(|n| Adam::new(n, adam)).collect();
        let grads = online.iter().map(Mlp::zero_gradients).collect();
        Ok(Agent {
            num_actions,
            observation_dim,
            target: online.clone(),
            online,
            optimizers,
            grads,
            replay: ReplayBuffer::new(config.replay_capacity),
            rng: seeded(derive_seed(config.seed, 1)),
            train_steps: 0,
            episodes: 0,
            env_steps: 0,
            config,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn replay_mut(&mut self) -> &mut ReplayBuffer {
        &mut self.replay
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    /// Online subnetwork of `action`.
    pub fn network(&self, action: usize) -> &Mlp {
        &self.online[action]
    }

    pub fn network_mut(&mut self, action: usize) -> &mut Mlp {
        &mut self.online[action]
    }

    pub fn target_network(&self, action: usize) -> &Mlp {
        &self.target[action]
    }

    pub fn sync_target(&mut self) {
        for (t, o) in self.target.iter_mut().zip(&self.online) {
            t.clone_from(o);
        }
    }

    fn check_observation(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.observation_dim {
            return Err(Error::Argument(format!(
                "observation has {} features, agent expects {}",
                obs.len(),
                self.observation_dim
            )));
        }
        Ok(())
    }

    fn evaluate(&mut self, target: bool, action: usize, obs: &[f64], stochastic: bool) -> Result<GaussianReturn> {
        let net = if target { &self.target[action] } else { &self.online[action] };
        let mask = if stochastic {
            Some(net.sample_mask(self.config.keep_prob, &mut self.rng)?)
        } else {
            None
        };
        Ok(head(self.config.mode, &net.forward(obs, mask.as_ref())?))
    }

    /// Deterministic online-network predictions (all-ones masks).
    pub fn predict(&mut self, obs: &[f64]) -> Result<Vec<GaussianReturn>> {
        self.check_observation(obs)?;
        (0..self.num_actions).map(|a| self.evaluate(false, a, obs, false)).collect()
    }

    /// Deterministic target-network predictions (all-ones masks).
    pub fn predict_target(&mut self, obs: &[f64]) -> Result<Vec<GaussianReturn>> {
        self.check_observation(obs)?;
        (0..self.num_actions).map(|a| self.evaluate(true, a, obs, false)).collect()
    }

    /// Draws one value per action from the mode's value distribution: a
    /// fresh dropout mask per subnetwork when the mode uses dropout, then a
    /// Gaussian return sample when it has a spread head.
    pub fn sample_values(&mut self, obs: &[f64]) -> Result<ValueSample> {
        self.check_observation(obs)?;
        let mode = self.config.mode;
        let dists = (0..self.num_actions)
            .map(|a| self.evaluate(false, a, obs, mode.uses_dropout()))
            .collect::<Result<Vec<_>>>()?;
        Ok(if mode.has_sigma_head() {
            ValueSample::draw(&dists, &mut self.rng)
        } else {
            ValueSample::means(&dists)
        })
    }

    pub fn select_action(&mut self, obs: &[f64]) -> Result<usize> {
        let values = self.sample_values(obs)?;
        Ok(if self.config.mode == Mode::QPoint {
            epsilon_greedy(values.values(), self.config.epsilon, &mut self.rng)
        } else {
            argmax_random_ties(values.values(), &mut self.rng)
        })
    }

    fn bootstrap(&mut self, obs: &[f64], action: usize) -> Result<GaussianReturn> {
        let stochastic = self.config.mode.uses_dropout();
        self.evaluate(true, action, obs, stochastic)
    }

    /// Regression target `(mu, sigma)` for the stored transition `index`.
    ///
    /// Bootstraps come from the target network at the stored next
    /// state-action, under a freshly sampled mask in dropout modes.
    /// Terminal transitions bootstrap from `(0, 0)`. With `lambda > 0` the
    /// mean target is the forward-view lambda-return over the rest of the
    /// stored episode; the spread target is always one-step.
    pub fn compute_target(&mut self, index: usize) -> Result<GaussianReturn> {
        let t = self
            .replay
            .get(index)
            .ok_or_else(|| Error::Argument(format!("no stored transition at {index}")))?
            .clone();
        let gamma = self.config.gamma;
        let Some(next_action) = t.next_action.filter(|_| !t.terminal) else {
            return Ok(GaussianReturn::dirac(t.reward));
        };
        let next = self.bootstrap(&t.next_state, next_action)?;
        let sigma = if self.config.mode.has_sigma_head() {
            gamma * next.sigma
        } else {
            0.0
        };
        if self.config.lambda == 0.0 {
            return Ok(GaussianReturn {
                mu: t.reward + gamma * next.mu,
                sigma,
            });
        }
        let suffix: Vec<Transition> = self.replay.episode_suffix(index).cloned().collect();
        let mut rewards = vec![t.reward];
        let mut boots = vec![next.mu];
        let mut terminal = false;
        for s in &suffix {
            rewards.push(s.reward);
            if s.terminal {
                boots.push(0.0);
                terminal = true;
                break;
            }
            let a = s.next_action.expect("non-terminal transitions carry a next action");
            boots.push(self.bootstrap(&s.next_state, a)?.mu);
        }
        let mu = lambda_return(&rewards, &boots, terminal, gamma, self.config.lambda)?;
        Ok(GaussianReturn { mu, sigma })
    }

    /// One fresh mask per row in dropout modes, `None` otherwise.
    fn sample_masks(&mut self, target: bool, action: usize, rows: usize) -> Result<Option<Vec<DropoutMask>>> {
        if !self.config.mode.uses_dropout() {
            return Ok(None);
        }
        let net = if target { &self.target[action] } else { &self.online[action] };
        (0..rows)
            .map(|_| net.sample_mask(self.config.keep_prob, &mut self.rng))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// [`Agent::compute_target`] for a whole minibatch, batching the
    /// one-step bootstraps per next action.
    fn compute_targets(&mut self, indices: &[usize]) -> Result<Vec<GaussianReturn>> {
        if self.config.lambda != 0.0 {
            return indices.iter().map(|&i| self.compute_target(i)).collect();
        }
        let gamma = self.config.gamma;
        let has_sigma = self.config.mode.has_sigma_head();
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            let t = self
                .replay
                .get(i)
                .ok_or_else(|| Error::Argument(format!("no stored transition at {i}")))?;
            targets.push(GaussianReturn::dirac(t.reward));
        }
        for action in 0..self.num_actions {
            let slots: Vec<usize> = (0..indices.len())
                .filter(|&k| {
                    let t = self.replay.get(indices[k]).expect("checked above");
                    !t.terminal && t.next_action == Some(action)
                })
                .collect();
            if slots.is_empty() {
                continue;
            }
            let mut inputs = Vec::with_capacity(slots.len() * self.observation_dim);
            for &k in &slots {
                inputs.extend_from_slice(&self.replay.get(indices[k]).expect("checked above").next_state);
            }
            let masks = self.sample_masks(true, action, slots.len())?;
            let net = &self.target[action];
            let cache = net.forward_batch(&inputs, slots.len(), masks.as_deref())?;
            let out_dim = net.output_dim();
            for (row, &k) in slots.iter().enumerate() {
                let next = head(self.config.mode, &cache.output()[row * out_dim..][..out_dim]);
                targets[k].mu += gamma * next.mu;
                if has_sigma {
                    targets[k].sigma = gamma * next.sigma;
                }
            }
        }
        Ok(targets)
    }

    /// Stores a transition; it enters the priority queue at `+inf`.
    pub fn store(&mut self, transition: Transition) {
        self.replay.push(transition);
    }

    /// One minibatch gradient step on the online networks.
    ///
    /// Returns `None` without touching anything while the replay holds
    /// fewer than `batch_size` transitions.
    pub fn train_step(&mut self) -> Result<Option<LossStats>> {
        let batch = self.config.batch_size;
        if self.replay.len() < batch {
            return Ok(None);
        }
        let mut indices = Vec::with_capacity(batch);
        let mut prioritized_slots = 0;
        for _ in 0..batch {
            let from_queue = rand::Rng::random_bool(&mut self.rng, self.config.prioritized_fraction);
            match from_queue.then(|| self.replay.pop_max()).flatten() {
                Some(i) => {
                    prioritized_slots += 1;
                    indices.push(i);
                }
                None => indices.push(self.replay.sample_uniform(&mut self.rng)),
            }
        }

        let targets = self.compute_targets(&indices)?;
        let has_sigma = self.config.mode.has_sigma_head();
        let scale = 1.0 / batch as f64;
        let out_dim = if has_sigma { 2 } else { 1 };
        let mut touched = vec![false; self.num_actions];
        let (mut mu_loss, mut sigma_loss) = (0.0, 0.0);
        let mut residuals = vec![0.0; batch];
        for action in 0..self.num_actions {
            let slots: Vec<usize> = (0..batch)
                .filter(|&k| self.replay.get(indices[k]).is_some_and(|t| t.action == action))
                .collect();
            if slots.is_empty() {
                continue;
            }
            let mut inputs = Vec::with_capacity(slots.len() * self.observation_dim);
            for &k in &slots {
                inputs.extend_from_slice(&self.replay.get(indices[k]).expect("sampled index is stored").state);
            }
            let masks = self.sample_masks(false, action, slots.len())?;
            let net = &self.online[action];
            let cache = net.forward_batch(&inputs, slots.len(), masks.as_deref())?;
            let mut out_grads = Vec::with_capacity(slots.len() * out_dim);
            for (row, &k) in slots.iter().enumerate() {
                let raw = &cache.output()[row * out_dim..][..out_dim];
                let dm = raw[0] - targets[k].mu;
                mu_loss += dm * dm;
                out_grads.push(2.0 * dm * scale);
                if has_sigma {
                    let ds = softplus(raw[1]) - targets[k].sigma;
                    sigma_loss += ds * ds;
                    out_grads.push(2.0 * ds * sigmoid(raw[1]) * scale);
                }
                residuals[k] = dm.abs();
            }
            self.grads[action].fill_zero();
            net.backward_batch(&cache, &out_grads, &mut self.grads[action])?;
            touched[action] = true;
        }

        let mut skipped_updates = 0;
        for a in (0..self.num_actions).filter(|&a| touched[a]) {
            match adam_step(&mut self.online[a], &self.grads[a], &mut self.optimizers[a]) {
                Ok(()) => {}
                Err(Error::Numeric(_)) => skipped_updates += 1,
                Err(e) => return Err(e),
            }
        }
        for (&i, &r) in indices.iter().zip(&residuals) {
            self.replay.set_priority(i, r);
        }

        self.train_steps += 1;
        if self.train_steps.is_multiple_of(self.config.target_sync_interval) {
            self.sync_target();
        }
        Ok(Some(LossStats {
            loss: (mu_loss + sigma_loss) * scale,
            mu_loss: mu_loss * scale,
            sigma_loss: sigma_loss * scale,
            batch_size: batch,
            prioritized_slots,
            skipped_updates,
        }))
    }

    /// Runs one on-policy SARSA episode, storing every transition and
    /// taking a gradient step every `train_interval` environment steps.
    pub fn run_episode(&mut self, env: &mut dyn Environment) -> Result<EpisodeStats> {
        self.run_episode_inner(env, None)
    }

    /// Like [`Agent::run_episode`] but actions come from `policy`.
    pub fn run_episode_with(
        &mut self,
        env: &mut dyn Environment,
        policy: &mut dyn FnMut(&Observation) -> usize,
    ) -> Result<EpisodeStats> {
        self.run_episode_inner(env, Some(policy))
    }

    fn run_episode_inner(
        &mut self,
        env: &mut dyn Environment,
        mut policy: Option<&mut dyn FnMut(&Observation) -> usize>,
    ) -> Result<EpisodeStats> {
        if env.num_actions() != self.num_actions || env.observation_dim() != self.observation_dim {
            return Err(Error::Argument("environment does not match agent dimensions".into()));
        }
        let episode = self.episodes;
        self.episodes += 1;
        let mut choose = |agent: &mut Agent, obs: &Observation| -> Result<usize> {
            match policy.as_mut() {
                Some(p) => Ok(p(obs)),
                None => agent.select_action(obs),
            }
        };
        let mut obs = env.reset();
        let mut action = choose(self, &obs)?;
        let mut stats = EpisodeStats {
            total_reward: 0.0,
            steps: 0,
            stored: 0,
        };
        loop {
            let step = env.step(action)?;
            stats.total_reward += step.reward;
            stats.steps += 1;
            let next_action = if step.terminal {
                None
            } else {
                Some(choose(self, &step.observation)?)
            };
            self.store(Transition {
                state: obs,
                action,
                reward: step.reward,
                next_state: step.observation.clone(),
                next_action,
                terminal: step.terminal,
                last_td_error: f64::INFINITY,
                episode,
            });
            stats.stored += 1;
            self.env_steps += 1;
            if self.env_steps.is_multiple_of(self.config.train_interval as u64) {
                self.train_step()?;
            }
            match next_action {
                Some(a) => {
                    obs = step.observation;
                    action = a;
                }
                None => return Ok(stats),
            }
        }
    }
}
