use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::distrib::GaussianReturn;
use crate::rng::Rng;

/// One scalar draw per action.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueSample(Vec<f64>);

impl ValueSample {
    pub fn new(values: Vec<f64>) -> Self {
        ValueSample(values)
    }

    /// `z_a = mu_a + sigma_a * xi_a` with independent standard normals.
    pub fn draw(dists: &[GaussianReturn], rng: &mut Rng) -> Self {
        ValueSample(
            dists
                .iter()
                .map(|d| {
                    let xi: f64 = StandardNormal.sample(rng);
                    d.mu + d.sigma * xi
                })
                .collect(),
        )
    }

    pub fn means(dists: &[GaussianReturn]) -> Self {
        ValueSample(dists.iter().map(|d| d.mu).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Index of the largest value; ties are broken uniformly at random.
pub fn argmax_random_ties(values: &[f64], rng: &mut Rng) -> usize {
    assert!(!values.is_empty(), "argmax of an empty slice");
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..values.len()).filter(|&i| values[i] == best).collect();
    match ties.len() {
        0 => rng.random_range(0..values.len()), // all NaN
        1 => ties[0],
        n => ties[rng.random_range(0..n)],
    }
}

pub fn epsilon_greedy(values: &[f64], epsilon: f64, rng: &mut Rng) -> usize {
    if epsilon > 0.0 && rng.random_bool(epsilon) {
        rng.random_range(0..values.len())
    } else {
        argmax_random_ties(values, rng)
    }
}

/// Thompson sampling over independent per-action Gaussians.
pub fn thompson_choice(dists: &[GaussianReturn], rng: &mut Rng) -> usize {
    argmax_random_ties(ValueSample::draw(dists, rng).values(), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distrib::thompson_prob_two_gaussians;
    use crate::rng::seeded;

    fn g(mu: f64, sigma: f64) -> GaussianReturn {
        GaussianReturn { mu, sigma }
    }

    #[test]
    fn ties_are_uniform() {
        let mut rng = seeded(3);
        let mut counts = [0usize; 3];
        for _ in 0..30_000 {
            counts[argmax_random_ties(&[1.0, 1.0, 1.0], &mut rng)] += 1;
        }
        assert!(counts.iter().all(|&c| (9_600..10_400).contains(&c)), "{counts:?}");
        assert_eq!(argmax_random_ties(&[0.0, 2.0, 1.0], &mut rng), 1);
    }

    #[test]
    fn thompson_frequencies_match_closed_form() {
        let mut rng = seeded(5);
        for (a, b) in [(g(0.0, 1.0), g(2.0, 1.0)), (g(0.0, 5.0), g(2.0, 1.0)), (g(0.3, 0.2), g(0.1, 0.9))] {
            let n = 100_000;
            let first = (0..n).filter(|_| thompson_choice(&[a, b], &mut rng) == 0).count();
            let p = thompson_prob_two_gaussians(a.mu, a.sigma, b.mu, b.sigma);
            assert!((first as f64 / n as f64 - p).abs() < 0.005, "{a:?} {b:?}");
        }
    }

    #[test]
    fn zero_spread_is_greedy_and_matches_epsilon_zero() {
        // Clamping every spread to zero reduces Thompson sampling to the
        // greedy rule, including uniform tie-breaking.
        let cases: [&[f64]; 3] = [&[0.1, 0.4], &[2.0, -1.0, 2.0], &[0.0, 0.0]];
        for means in cases {
            let dists: Vec<_> = means.iter().map(|&m| g(m, 0.0)).collect();
            let mut r1 = seeded(11);
            let mut r2 = seeded(12);
            let mut freq_t = vec![0usize; means.len()];
            let mut freq_e = vec![0usize; means.len()];
            for _ in 0..20_000 {
                freq_t[thompson_choice(&dists, &mut r1)] += 1;
                freq_e[epsilon_greedy(means, 0.0, &mut r2)] += 1;
            }
            for (t, e) in freq_t.iter().zip(&freq_e) {
                assert!((*t as f64 - *e as f64).abs() / 20_000.0 < 0.02, "{freq_t:?} {freq_e:?}");
            }
        }
    }

    #[test]
    fn epsilon_greedy_explores_at_rate() {
        let mut rng = seeded(8);
        let n = 100_000;
        let other = (0..n).filter(|_| epsilon_greedy(&[0.0, 1.0], 0.2, &mut rng) == 0).count();
        // random action is the non-greedy one half the time
        assert!((other as f64 / n as f64 - 0.1).abs() < 0.005);
    }
}
