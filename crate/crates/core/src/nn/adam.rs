use super::{Gradients, Mlp};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moment accumulators for one network.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    steps: u64,
}

impl Adam {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        Adam {
            config,
            m: vec![0.0; net.num_params()],
            v: vec![0.0; net.num_params()],
            steps: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}

/// Moments of units that stop receiving gradient decay geometrically into
/// the subnormal range, where arithmetic is very slow; flush them to zero.
fn flush(x: f64) -> f64 {
    if x.abs() < f64::MIN_POSITIVE {
        0.0
    } else {
        x
    }
}

/// One bias-corrected Adam update of `net` along `grads`.
///
/// Non-finite gradients leave parameters and state untouched and are
/// reported as [`Error::Numeric`].
pub fn adam_step(net: &mut Mlp, grads: &Gradients, state: &mut Adam) -> Result<()> {
    let n = net.num_params();
    if grads.values().len() != n || state.m.len() != n {
        return Err(Error::Argument("gradient or optimizer shape does not match network".into()));
    }
    if !grads.is_finite() {
        return Err(Error::Numeric("non-finite gradient, Adam step skipped".into()));
    }
    state.steps += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.steps as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let params = net.params_mut();
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads.values())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = flush(beta1 * *m + (1.0 - beta1) * g);
        *v = flush(beta2 * *v + (1.0 - beta2) * g * g);
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net() -> Mlp {
        Mlp::new(&[3, 4, 2], 1).unwrap()
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut n = net();
        let before = n.clone();
        let mut adam = Adam::new(&n, AdamConfig::default());
        let zero = n.zero_gradients();
        adam_step(&mut n, &zero, &mut adam).unwrap();
        assert_eq!(n, before);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn first_step_moves_each_parameter_by_the_learning_rate() {
        // m_hat = g and v_hat = g^2 after one step, so the update is
        // lr * g / (|g| + eps) = lr * sign(g) up to eps / |g|.
        let mut n = net();
        let before = n.clone();
        let mut adam = Adam::new(&n, AdamConfig::default());
        let mut g = n.zero_gradients();
        g.values_mut().iter_mut().enumerate().for_each(|(k, v)| {
            *v = if k % 2 == 0 { 0.37 } else { -2.5 };
        });
        adam_step(&mut n, &g, &mut adam).unwrap();
        for ((p, q), &gk) in n.params().iter().zip(before.params()).zip(g.values()) {
            let expected = -1e-3 * gk / (gk.abs() + 1e-8);
            assert!((p - q - expected).abs() < 1e-15, "{} vs {}", p - q, expected);
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected_without_update() {
        let mut n = net();
        let before = n.clone();
        let mut adam = Adam::new(&n, AdamConfig::default());
        let mut g = n.zero_gradients();
        g.values_mut()[3] = f64::NAN;
        assert!(matches!(adam_step(&mut n, &g, &mut adam), Err(Error::Numeric(_))));
        assert_eq!(n, before);
        assert_eq!(adam.steps(), 0);
    }

    #[test]
    fn identical_runs_follow_identical_trajectories() {
        let run = || {
            let mut n = net();
            let mut adam = Adam::new(&n, AdamConfig::default());
            for k in 0..20 {
                let x = [k as f64 * 0.1, 1.0, -0.5];
                let out = n.forward(&x, None).unwrap();
                let g = n.backward(&x, None, &[out[0] - 1.0, out[1]]).unwrap();
                adam_step(&mut n, &g, &mut adam).unwrap();
            }
            n
        };
        assert_eq!(run(), run());
    }
}
