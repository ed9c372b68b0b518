//! Initial return entropy: how spread out the undiscounted returns from
//! the start state are under a uniform random policy. Low values mean
//! random behaviour almost always sees the same return, i.e. a hard
//! exploration problem.
//!
//! Entropy is the Shannon entropy (nats) of an equal-width histogram over
//! the observed return range, so it is bounded, unaffected by shifting all
//! rewards, and zero for a single repeated return.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng as _;

use crate::envs::Environment;
use crate::rng::seeded;
use crate::{Error, Result};

pub const DEFAULT_TRACES: usize = 50_000;
pub const DEFAULT_MAX_STEPS: usize = 500;
pub const DEFAULT_BINS: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct ReturnHistogram {
    /// `counts.len() + 1` strictly increasing edges.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl ReturnHistogram {
    pub fn bin_width(&self, bin: usize) -> f64 {
        self.bin_edges[bin + 1] - self.bin_edges[bin]
    }

    /// Count divided by `total * width`; integrates to one.
    pub fn density(&self, bin: usize) -> f64 {
        self.counts[bin] as f64 / (self.total as f64 * self.bin_width(bin))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IreResult {
    pub entropy_nats: f64,
    pub num_traces: usize,
    /// Step limit the returns were sampled with, if known.
    pub max_steps: Option<usize>,
    pub histogram: ReturnHistogram,
}

/// Runs `num_traces` episodes with uniformly random actions, each cut off
/// after `max_steps`, and returns their undiscounted returns.
pub fn sample_initial_returns(
    env: &mut dyn Environment,
    num_traces: usize,
    max_steps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if num_traces == 0 || max_steps == 0 {
        return Err(Error::Argument("num_traces and max_steps must be positive".into()));
    }
    let mut rng = seeded(seed);
    let actions = env.num_actions();
    let mut returns = Vec::with_capacity(num_traces);
    for _ in 0..num_traces {
        env.reset();
        let mut total = 0.0;
        for _ in 0..max_steps {
            let step = env.step(rng.random_range(0..actions))?;
            total += step.reward;
            if step.terminal {
                break;
            }
        }
        returns.push(total);
    }
    Ok(returns)
}

/// Histogram entropy of `returns` over `num_bins` equal-width bins spanning
/// their range. A single distinct value gives one bin and entropy 0.
pub fn estimate_ire(returns: &[f64], num_bins: usize) -> Result<IreResult> {
    if returns.is_empty() || num_bins == 0 {
        return Err(Error::Argument("need at least one return and one bin".into()));
    }
    if returns.iter().any(|r| !r.is_finite()) {
        return Err(Error::Numeric("returns must be finite".into()));
    }
    let lo = returns.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = returns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (bin_edges, counts) = if lo == hi {
        (vec![lo - 0.5, lo + 0.5], vec![returns.len() as u64])
    } else {
        let width = (hi - lo) / num_bins as f64;
        let mut edges: Vec<f64> = (0..num_bins).map(|i| lo + i as f64 * width).collect();
        edges.push(hi);
        let mut counts = vec![0u64; num_bins];
        for &r in returns {
            let bin = (((r - lo) / width) as usize).min(num_bins - 1);
            counts[bin] += 1;
        }
        (edges, counts)
    };
    let total = returns.len() as u64;
    let entropy_nats = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum::<f64>()
        .max(0.0);
    Ok(IreResult {
        entropy_nats,
        num_traces: returns.len(),
        max_steps: None,
        histogram: ReturnHistogram {
            bin_edges,
            counts,
            total,
        },
    })
}

/// Samples returns and estimates their entropy in one go.
pub fn initial_return_entropy(
    env: &mut dyn Environment,
    num_traces: usize,
    max_steps: usize,
    num_bins: usize,
    seed: u64,
) -> Result<IreResult> {
    let returns = sample_initial_returns(env, num_traces, max_steps, seed)?;
    let mut result = estimate_ire(&returns, num_bins)?;
    result.max_steps = Some(max_steps);
    Ok(result)
}

/// Writes the histogram as CSV (`bin_left,bin_right,count,density`) after a
/// `#` comment line with the entropy and trace count.
pub fn export_histogram(result: &IreResult, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(
        out,
        "# entropy_nats={} traces={}",
        result.entropy_nats, result.num_traces
    )
    .map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_left", "bin_right", "count", "density"])?;
    let h = &result.histogram;
    for (bin, count) in h.counts.iter().enumerate() {
        w.write_record([
            h.bin_edges[bin].to_string(),
            h.bin_edges[bin + 1].to_string(),
            count.to_string(),
            h.density(bin).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads back a file written by [`export_histogram`].
pub fn read_histogram(path: &Path) -> Result<ReturnHistogram> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut comment = String::new();
    reader.read_line(&mut comment).map_err(|e| Error::io(path, e))?;
    if !comment.starts_with('#') {
        return Err(Error::Config(format!("{}: missing comment line", path.display())));
    }
    let mut edges = Vec::new();
    let mut counts = Vec::new();
    for record in csv::Reader::from_reader(reader).records() {
        let record = record?;
        let field = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Config(format!("{}: malformed row {record:?}", path.display())))
        };
        if edges.is_empty() {
            edges.push(field(0)?);
        }
        edges.push(field(1)?);
        counts.push(field(2)? as u64);
    }
    let total = counts.iter().sum();
    Ok(ReturnHistogram {
        bin_edges: edges,
        counts,
        total,
    })
}

/// Entropy of a Bernoulli(`p`) variable in nats.
pub fn bernoulli_entropy(p: f64) -> f64 {
    let term = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
    term(p) + term(1.0 - p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_cartpole, make_chain, make_diagnostic_mdp, ChainConfig};
    use proptest::prelude::*;

    #[test]
    fn identical_returns_have_zero_entropy() {
        let r = estimate_ire(&[3.0; 10], 50).unwrap();
        assert_eq!(r.entropy_nats, 0.0);
        assert_eq!(r.histogram.counts, vec![10]);
    }

    #[test]
    fn k_distinct_values_give_ln_k() {
        let returns: Vec<f64> = (0..400).map(|i| (i % 4) as f64).collect();
        let r = estimate_ire(&returns, 50).unwrap();
        assert!((r.entropy_nats - 4f64.ln()).abs() < 1e-12);
        assert_eq!(r.histogram.counts.iter().filter(|&&c| c > 0).count(), 4);
    }

    #[test]
    fn diagnostic_leaves_are_uniform() {
        let mut env = make_diagnostic_mdp(2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let returns = sample_initial_returns(&mut env, 100_000, 500, 1).unwrap();
        for v in 0..4 {
            let f = returns.iter().filter(|&&r| r == v as f64).count() as f64 / 1e5;
            assert!((f - 0.25).abs() < 0.01, "leaf {v}: {f}");
        }
    }

    #[test]
    fn chain_success_rate_and_entropy() {
        let mut env = make_chain(ChainConfig::unordered(10, 4)).unwrap();
        let returns = sample_initial_returns(&mut env, DEFAULT_TRACES, DEFAULT_MAX_STEPS, 2).unwrap();
        let p = 2f64.powi(-9);
        let hits = returns.iter().filter(|&&r| r == 1.0).count() as f64;
        let sd = (DEFAULT_TRACES as f64 * p * (1.0 - p)).sqrt();
        assert!((hits - DEFAULT_TRACES as f64 * p).abs() < 4.0 * sd, "{hits} hits");
        let r = estimate_ire(&returns, DEFAULT_BINS).unwrap();
        let exact = bernoulli_entropy(p);
        assert!((exact - 0.014_129).abs() < 1e-5);
        assert!((r.entropy_nats - exact).abs() < 0.2 * exact, "{}", r.entropy_nats);
    }

    #[test]
    fn single_trace_is_valid() {
        let mut env = make_cartpole(3);
        let returns = sample_initial_returns(&mut env, 1, 500, 0).unwrap();
        assert_eq!(returns.len(), 1);
        let r = estimate_ire(&returns, 50).unwrap();
        assert_eq!(r.entropy_nats, 0.0);
    }

    #[test]
    fn long_chain_is_harder_than_diagnostic_tree() {
        let mut chain = make_chain(ChainConfig::unordered(20, 0)).unwrap();
        let mut tree = make_diagnostic_mdp(2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let a = initial_return_entropy(&mut chain, DEFAULT_TRACES, 500, 50, 0).unwrap();
        let b = initial_return_entropy(&mut tree, DEFAULT_TRACES, 500, 50, 0).unwrap();
        assert!(a.entropy_nats < b.entropy_nats);
        assert_eq!(a.max_steps, Some(500));
    }

    #[test]
    fn export_round_trip() {
        let returns: Vec<f64> = (0..97).map(|i| ((i * 7) % 13) as f64 * 0.5).collect();
        let r = estimate_ire(&returns, 8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hist.csv");
        export_histogram(&r, &path).unwrap();
        let back = read_histogram(&path).unwrap();
        assert_eq!(back.counts, r.histogram.counts);
        assert_eq!(back.bin_edges, r.histogram.bin_edges);
        let mass: f64 = (0..back.counts.len()).map(|b| back.density(b) * back.bin_width(b)).sum();
        assert!((mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_bins_are_exported() {
        let r = estimate_ire(&[0.0, 10.0], 5).unwrap();
        assert_eq!(r.histogram.counts, vec![1, 0, 0, 0, 1]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        export_histogram(&r, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2 + 5);
        assert!(text.starts_with("# entropy_nats="));
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(estimate_ire(&[], 5).is_err());
        assert!(estimate_ire(&[1.0], 0).is_err());
    }

    proptest! {
        #[test]
        fn shifting_rewards_keeps_entropy(
            returns in prop::collection::vec(-50.0f64..50.0, 1..200),
            shift in -1e3f64..1e3,
            bins in 1usize..60,
        ) {
            // Exact invariance needs the shift to be representable without
            // rounding; integer-valued returns and shifts are.
            let base: Vec<f64> = returns.iter().map(|r| r.round()).collect();
            let shifted: Vec<f64> = base.iter().map(|r| r + shift.round()).collect();
            let a = estimate_ire(&base, bins).unwrap();
            let b = estimate_ire(&shifted, bins).unwrap();
            prop_assert_eq!(a.entropy_nats, b.entropy_nats);
            prop_assert_eq!(a.histogram.counts, b.histogram.counts);
        }

        #[test]
        fn entropy_bounds(returns in prop::collection::vec(-5.0f64..5.0, 1..300), bins in 1usize..60) {
            let r = estimate_ire(&returns, bins).unwrap();
            let occupied = r.histogram.counts.iter().filter(|&&c| c > 0).count();
            prop_assert!(r.entropy_nats >= 0.0);
            prop_assert!(r.entropy_nats <= (occupied as f64).ln() + 1e-12);
            prop_assert_eq!(r.histogram.counts.iter().sum::<u64>(), r.histogram.total);
            prop_assert!(r.histogram.bin_edges.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
