//! Gaussian return distributions and their Bellman propagation.
//!
//! A state-action return is summarized by a mean and a standard deviation.
//! The mean follows the ordinary Bellman backup. The standard deviation is
//! backed up as the policy-weighted, discounted sum of next-step standard
//! deviations, treating next-step returns as independent; this is a
//! heuristic and its fixed point is not the true return spread in general.

use crate::{Error, Result};

/// Gaussian summary of a return distribution; `mu` is the action value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianReturn {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianReturn {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::Argument(format!("invalid Gaussian return ({mu}, {sigma})")));
        }
        Ok(GaussianReturn { mu, sigma })
    }

    /// Point mass at `value`.
    pub fn dirac(value: f64) -> Self {
        GaussianReturn { mu: value, sigma: 0.0 }
    }

    /// Bootstrap value of a terminal transition.
    pub const TERMINAL: GaussianReturn = GaussianReturn { mu: 0.0, sigma: 0.0 };
}

/// A non-empty collection of sampled returns.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnSamples(Vec<f64>);

impl ReturnSamples {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument("return samples must not be empty".into()));
        }
        Ok(ReturnSamples(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Argument(format!("discount {gamma} must be in [0, 1]")));
    }
    Ok(())
}

/// `r + gamma * next_mu`.
pub fn propagate_mu(reward: f64, gamma: f64, next_mu: f64) -> f64 {
    reward + gamma * next_mu
}

/// `gamma * sum_a pi(a) * sigma(a)` over next-state actions.
pub fn propagate_sigma(gamma: f64, next_sigmas: &[f64], policy_probs: &[f64]) -> Result<f64> {
    check_gamma(gamma)?;
    if next_sigmas.len() != policy_probs.len() || next_sigmas.is_empty() {
        return Err(Error::Argument(format!(
            "{} standard deviations vs {} policy probabilities",
            next_sigmas.len(),
            policy_probs.len()
        )));
    }
    if next_sigmas.iter().any(|&s| !(s >= 0.0)) {
        return Err(Error::Argument("standard deviations must be non-negative".into()));
    }
    let total: f64 = policy_probs.iter().sum();
    if policy_probs.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Argument(format!("policy probabilities {policy_probs:?} are not a distribution")));
    }
    Ok(gamma * next_sigmas.iter().zip(policy_probs).map(|(s, p)| s * p).sum::<f64>())
}

/// Value and gradient of the distributional squared loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossEval {
    pub loss: f64,
    pub grad_mu: f64,
    pub grad_sigma: f64,
}

/// Target pair `(r + gamma * mu', gamma * sigma')` for a bootstrap value.
pub fn bellman_target(reward: f64, gamma: f64, next: GaussianReturn) -> GaussianReturn {
    GaussianReturn {
        mu: propagate_mu(reward, gamma, next.mu),
        sigma: gamma * next.sigma,
    }
}

/// Squared loss between a prediction and a fixed target pair.
pub fn squared_loss(pred: GaussianReturn, target: GaussianReturn) -> LossEval {
    let dm = pred.mu - target.mu;
    let ds = pred.sigma - target.sigma;
    LossEval {
        loss: dm * dm + ds * ds,
        grad_mu: 2.0 * dm,
        grad_sigma: 2.0 * ds,
    }
}

/// `(r + gamma mu' - mu)^2 + (gamma sigma' - sigma)^2` with `next` held
/// constant. Pass [`GaussianReturn::TERMINAL`] as `next` for terminal
/// transitions.
pub fn duvn_loss(pred: GaussianReturn, reward: f64, gamma: f64, next: GaussianReturn) -> LossEval {
    squared_loss(pred, bellman_target(reward, gamma, next))
}

/// Pushes every sample through `z -> r + gamma z`.
pub fn sample_propagate(reward: f64, gamma: f64, samples: &ReturnSamples) -> Result<ReturnSamples> {
    check_gamma(gamma)?;
    ReturnSamples::new(samples.0.iter().map(|&z| reward + gamma * z).collect())
}

/// Moment-matched Gaussian: sample mean and population standard deviation.
pub fn gaussian_fit(samples: &ReturnSamples) -> GaussianReturn {
    let n = samples.0.len() as f64;
    let mu = samples.0.iter().sum::<f64>() / n;
    let var = samples.0.iter().map(|z| (z - mu) * (z - mu)).sum::<f64>() / n;
    GaussianReturn { mu, sigma: var.sqrt() }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Probability that a draw from `N(mu1, sigma1)` exceeds an independent
/// draw from `N(mu2, sigma2)`: the two-action Thompson probability.
///
/// With both deviations zero the comparison is deterministic; equal means
/// then give 0.5.
pub fn thompson_prob_two_gaussians(mu1: f64, sigma1: f64, mu2: f64, sigma2: f64) -> f64 {
    let spread = sigma1.hypot(sigma2);
    let gap = mu1 - mu2;
    if spread == 0.0 {
        return match gap.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Greater) => 1.0,
            Some(std::cmp::Ordering::Less) => 0.0,
            _ => 0.5,
        };
    }
    normal_cdf(gap / spread)
}

/// Forward-view lambda-return of an episode segment.
///
/// `rewards[k]` is the reward of step `k` and `bootstraps[k]` the value
/// estimate of the state-action reached after it. The segment either ends
/// in a terminal transition or is cut off, in which case the last
/// bootstrap is used in full.
pub fn lambda_return(rewards: &[f64], bootstraps: &[f64], ends_terminal: bool, gamma: f64, lambda: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Argument(format!("lambda {lambda} must be in [0, 1]")));
    }
    if rewards.is_empty() || rewards.len() != bootstraps.len() {
        return Err(Error::Argument("rewards and bootstraps must be non-empty and aligned".into()));
    }
    let last = rewards.len() - 1;
    let mut g = if ends_terminal {
        rewards[last]
    } else {
        rewards[last] + gamma * bootstraps[last]
    };
    for k in (0..last).rev() {
        g = rewards[k] + gamma * ((1.0 - lambda) * bootstraps[k] + lambda * g);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn mean_backup() {
        assert_eq!(propagate_mu(1.0, 0.9, 0.0), 1.0);
        assert_eq!(propagate_mu(0.0, 1.0, 3.0), 3.0);
        assert_eq!(propagate_mu(0.5, 0.5, 2.0), 1.5);
    }

    #[test]
    fn sigma_backup() {
        assert!(close(propagate_sigma(0.9, &[1.0], &[1.0]).unwrap(), 0.9, 1e-15));
        assert_eq!(propagate_sigma(0.0, &[4.0, 2.0], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(propagate_sigma(1.0, &[1.0, 3.0], &[0.5, 0.5]).unwrap(), 2.0);
        assert!(propagate_sigma(1.0, &[1.0], &[0.5, 0.5]).is_err());
        assert!(propagate_sigma(1.0, &[1.0, 1.0], &[0.6, 0.6]).is_err());
        assert!(propagate_sigma(1.0, &[-1.0], &[1.0]).is_err());
    }

    #[test]
    fn loss_values() {
        let unit = GaussianReturn { mu: 0.0, sigma: 1.0 };
        let l = duvn_loss(unit, 1.0, 0.9, unit);
        assert!(close(l.loss, 1.01, 1e-12));
        let target = bellman_target(0.3, 0.8, GaussianReturn { mu: 1.0, sigma: 0.5 });
        let at = squared_loss(target, target);
        assert_eq!((at.loss, at.grad_mu, at.grad_sigma), (0.0, 0.0, 0.0));
        let fixed = GaussianReturn { mu: 2.0, sigma: 0.5 };
        assert_eq!(duvn_loss(fixed, 0.0, 1.0, fixed).loss, 0.0);
    }

    #[test]
    fn sample_backup() {
        let s = ReturnSamples::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(sample_propagate(0.5, 0.5, &s).unwrap().values(), &[1.0, 1.5]);
        let v = ReturnSamples::new(vec![-3.0, 0.25, 9.0]).unwrap();
        assert_eq!(sample_propagate(0.0, 1.0, &v).unwrap(), v);
        assert_eq!(sample_propagate(1.0, 0.0, &v).unwrap().values(), &[1.0, 1.0, 1.0]);
        assert!(ReturnSamples::new(vec![]).is_err());
    }

    #[test]
    fn moment_fit() {
        let fit = |v: &[f64]| gaussian_fit(&ReturnSamples::new(v.to_vec()).unwrap());
        assert_eq!(fit(&[2.0, 2.0, 2.0]), GaussianReturn { mu: 2.0, sigma: 0.0 });
        assert_eq!(fit(&[0.0, 2.0]), GaussianReturn { mu: 1.0, sigma: 1.0 });
        let g = fit(&[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(g.mu, 1.5);
        // population variance (2.25 + 0.25 + 0.25 + 2.25) / 4 = 1.25
        assert!(close(g.sigma, 1.25f64.sqrt(), 1e-15));
        assert!(close(g.sigma, 1.118, 1e-3));
        assert_eq!(fit(&[4.2]).sigma, 0.0);
    }

    #[test]
    fn two_gaussian_thompson_probabilities() {
        assert!(close(thompson_prob_two_gaussians(0.0, 1.0, 2.0, 1.0), 0.0786, 5e-4));
        assert!(close(thompson_prob_two_gaussians(0.0, 5.0, 2.0, 1.0), 0.3474, 5e-4));
        assert_eq!(thompson_prob_two_gaussians(1.5, 0.7, 1.5, 0.7), 0.5);
        assert_eq!(thompson_prob_two_gaussians(1.0, 0.0, 1.0, 0.0), 0.5);
        assert_eq!(thompson_prob_two_gaussians(2.0, 0.0, 1.0, 0.0), 1.0);
    }

    #[test]
    fn normal_cdf_reference_points() {
        // Reference values from scipy.stats.norm.cdf.
        assert!(close(normal_cdf(-2.0 / 2f64.sqrt()), 0.07864960352514258, 1e-12));
        assert!(close(normal_cdf(-2.0 / 26f64.sqrt()), 0.3474433011862367, 1e-12));
        assert!(close(normal_cdf(0.0), 0.5, 1e-16));
        assert!(close(normal_cdf(1.959963984540054), 0.975, 1e-12));
    }

    #[test]
    fn thompson_matches_monte_carlo() {
        let mut rng = seeded(2024);
        for &(m1, s1, m2, s2) in &[(0.0, 1.0, 2.0, 1.0), (0.0, 5.0, 2.0, 1.0), (1.0, 0.3, 0.8, 2.0)] {
            let a = Normal::new(m1, s1).unwrap();
            let b = Normal::new(m2, s2).unwrap();
            let n = 100_000;
            let wins = (0..n).filter(|_| a.sample(&mut rng) > b.sample(&mut rng)).count();
            let p = thompson_prob_two_gaussians(m1, s1, m2, s2);
            assert!(close(wins as f64 / n as f64, p, 0.005), "{m1} {s1} {m2} {s2}");
        }
    }

    /// Expands the lambda-return as the weighted mixture of n-step returns.
    fn lambda_return_by_mixture(rewards: &[f64], boots: &[f64], terminal: bool, gamma: f64, lambda: f64) -> f64 {
        let t = rewards.len();
        let n_step = |n: usize| -> f64 {
            let mut g = 0.0;
            for k in 0..n {
                g += gamma.powi(k as i32) * rewards[k];
            }
            if !(n == t && terminal) {
                g += gamma.powi(n as i32) * boots[n - 1];
            }
            g
        };
        let mut total = 0.0;
        for n in 1..t {
            total += (1.0 - lambda) * lambda.powi(n as i32 - 1) * n_step(n);
        }
        total + lambda.powi(t as i32 - 1) * n_step(t)
    }

    #[test]
    fn lambda_return_edge_cases() {
        let r = [0.0, 0.0, 1.0];
        let b = [0.4, 0.7, 123.0];
        assert_eq!(lambda_return(&r, &b, true, 0.9, 0.0).unwrap(), 0.9 * 0.4);
        assert!(close(lambda_return(&r, &b, true, 0.9, 1.0).unwrap(), 0.81, 1e-15));
        assert!(lambda_return(&r, &b[..2], true, 0.9, 0.5).is_err());
        assert!(lambda_return(&r, &b, true, 0.9, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn lambda_return_equals_n_step_mixture(
            steps in prop::collection::vec((-2.0f64..2.0, -3.0f64..3.0), 1..8),
            terminal in any::<bool>(),
            gamma in 0.0f64..=1.0,
            lambda in 0.0f64..=1.0,
        ) {
            let (r, b): (Vec<f64>, Vec<f64>) = steps.into_iter().unzip();
            let fast = lambda_return(&r, &b, terminal, gamma, lambda).unwrap();
            let slow = lambda_return_by_mixture(&r, &b, terminal, gamma, lambda);
            prop_assert!((fast - slow).abs() < 1e-9, "{} vs {}", fast, slow);
        }

        #[test]
        fn sigma_backup_is_bounded(
            pairs in prop::collection::vec((0.0f64..5.0, 0.01f64..1.0), 1..6),
            gamma in 0.0f64..=1.0,
        ) {
            let sigmas: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let total: f64 = pairs.iter().map(|p| p.1).sum();
            let probs: Vec<f64> = pairs.iter().map(|p| p.1 / total).collect();
            let s = propagate_sigma(gamma, &sigmas, &probs).unwrap();
            let max = sigmas.iter().cloned().fold(0.0, f64::max);
            prop_assert!(s >= 0.0);
            prop_assert!(s <= gamma * max + 1e-12);
        }

        #[test]
        fn loss_gradients_match_finite_differences(
            mu in -3.0f64..3.0, sigma in 0.0f64..3.0, r in -1.0f64..1.0,
            gamma in 0.0f64..=1.0, nmu in -3.0f64..3.0, nsigma in 0.0f64..3.0,
        ) {
            let next = GaussianReturn { mu: nmu, sigma: nsigma };
            let at = |m: f64, s: f64| duvn_loss(GaussianReturn { mu: m, sigma: s }, r, gamma, next).loss;
            let l = duvn_loss(GaussianReturn { mu, sigma }, r, gamma, next);
            let h = 1e-5;
            let dm = (at(mu + h, sigma) - at(mu - h, sigma)) / (2.0 * h);
            let ds = (at(mu, sigma + h) - at(mu, sigma - h)) / (2.0 * h);
            prop_assert!((dm - l.grad_mu).abs() <= 1e-6 * l.grad_mu.abs().max(1e-3));
            prop_assert!((ds - l.grad_sigma).abs() <= 1e-6 * l.grad_sigma.abs().max(1e-3));
        }

        #[test]
        fn moment_fit_commutes_with_bellman_map(
            values in prop::collection::vec(-10i32..10, 1..20),
            r in -4i32..4,
            gamma_num in 0u32..=4,
        ) {
            // Dyadic inputs keep both routes exact in floating point.
            let gamma = f64::from(gamma_num) / 4.0;
            let r = f64::from(r) / 2.0;
            let samples = ReturnSamples::new(values.iter().map(|&v| f64::from(v)).collect()).unwrap();
            let via_samples = gaussian_fit(&sample_propagate(r, gamma, &samples).unwrap());
            let fit = gaussian_fit(&samples);
            prop_assert!((via_samples.mu - (r + gamma * fit.mu)).abs() < 1e-12);
            prop_assert!((via_samples.sigma - gamma * fit.sigma).abs() < 1e-12);
        }

        #[test]
        fn thompson_probabilities_are_complementary(
            m1 in -5.0f64..5.0, s1 in 0.01f64..5.0, m2 in -5.0f64..5.0, s2 in 0.0f64..5.0,
        ) {
            let p = thompson_prob_two_gaussians(m1, s1, m2, s2);
            let q = thompson_prob_two_gaussians(m2, s2, m1, s1);
            prop_assert!((p + q - 1.0).abs() < 1e-12);
        }
    }
}
