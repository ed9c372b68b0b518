use rand::Rng as _;

use crate::rng::{seeded, Rng};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct LayerSpan {
    inputs: usize,
    outputs: usize,
    /// Offset of the `inputs x outputs` weight block, stored input-major.
    weights: usize,
    bias: usize,
}

/// Multilayer perceptron with all parameters in one flat buffer.
///
/// Weight `(i -> j)` of layer `l` lives at `span.weights + i * outputs + j`,
/// followed by the layer's bias vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    spans: Vec<LayerSpan>,
    params: Vec<f64>,
}

/// Per-hidden-unit keep indicators for one network architecture.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMask {
    keep_prob: f64,
    layers: Vec<Vec<bool>>,
}

/// Gradient buffer laid out exactly like [`Mlp`] parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    values: Vec<f64>,
}

/// Intermediate values of a forward pass, reused by backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input followed by every masked hidden activation.
    activations: Vec<Vec<f64>>,
    /// Per hidden unit: derivative of the masked activation w.r.t. its
    /// pre-activation (0, or the dropout scale).
    slopes: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

/// Forward pass over a row-major minibatch, reused by
/// [`Mlp::backward_batch`].
#[derive(Clone, Debug)]
pub struct BatchCache {
    rows: usize,
    activations: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl BatchCache {
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// `rows x output_dim`, row-major.
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

/// `c += a * b` for row-major `a: m x k` (or its transpose, with `a_t`),
/// `b: k x n` (or transposed, with `b_t`) and `c: m x n`.
#[allow(clippy::too_many_arguments)]
fn gemm_acc(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, c: &mut [f64]) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the strides describe matrices that lie inside the slices,
    // checked by the length assertion above; `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn build_spans(sizes: &[usize]) -> (Vec<LayerSpan>, usize) {
    let mut spans = Vec::with_capacity(sizes.len() - 1);
    let mut offset = 0;
    for w in sizes.windows(2) {
        let (inputs, outputs) = (w[0], w[1]);
        spans.push(LayerSpan {
            inputs,
            outputs,
            weights: offset,
            bias: offset + inputs * outputs,
        });
        offset += inputs * outputs + outputs;
    }
    (spans, offset)
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::Config(format!(
            "a network needs at least 2 layer sizes, got {}",
            sizes.len()
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::Config(format!("layer sizes must be positive: {sizes:?}")));
    }
    Ok(())
}

/// Dot product with four independent accumulators; fixed summation order.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, ra) = a.split_at(a.len() - a.len() % 4);
    let (cb, rb) = b.split_at(ca.len());
    for (x, y) in ca.chunks_exact(4).zip(cb.chunks_exact(4)) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

impl Mlp {
    /// Creates a network with fan-in scaled uniform weights
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` and zero biases.
    pub fn new(layer_sizes: &[usize], init_seed: u64) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let (spans, total) = build_spans(layer_sizes);
        let mut params = vec![0.0; total];
        let mut rng = seeded(init_seed);
        for span in &spans {
            let bound = 1.0 / (span.inputs as f64).sqrt();
            for w in &mut params[span.weights..span.bias] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(Mlp {
            sizes: layer_sizes.to_vec(),
            spans,
            params,
        })
    }

    /// A network of the given shape with every parameter zero.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let (spans, total) = build_spans(layer_sizes);
        Ok(Mlp {
            sizes: layer_sizes.to_vec(),
            spans,
            params: vec![0.0; total],
        })
    }

    pub(crate) fn from_parts(layer_sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let (spans, total) = build_spans(layer_sizes);
        if params.len() != total {
            return Err(Error::Argument(format!(
                "expected {total} parameters for {layer_sizes:?}, got {}",
                params.len()
            )));
        }
        Ok(Mlp {
            sizes: layer_sizes.to_vec(),
            spans,
            params,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    /// Number of weight matrices.
    pub fn num_layers(&self) -> usize {
        self.spans.len()
    }

    /// `(outputs, inputs)` shape of layer `l`'s weight matrix.
    pub fn weight_shape(&self, l: usize) -> (usize, usize) {
        (self.spans[l].outputs, self.spans[l].inputs)
    }

    pub fn weight(&self, l: usize, output: usize, input: usize) -> f64 {
        let s = self.spans[l];
        self.params[s.weights + input * s.outputs + output]
    }

    pub fn weight_mut(&mut self, l: usize, output: usize, input: usize) -> &mut f64 {
        let s = self.spans[l];
        &mut self.params[s.weights + input * s.outputs + output]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let s = self.spans[l];
        &self.params[s.bias..s.bias + s.outputs]
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut [f64] {
        let s = self.spans[l];
        &mut self.params[s.bias..s.bias + s.outputs]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            values: vec![0.0; self.params.len()],
        }
    }

    /// Overwrites this network's parameters with `other`'s.
    pub fn copy_from(&mut self, other: &Mlp) -> Result<()> {
        if self.sizes != other.sizes {
            return Err(Error::Argument(format!(
                "architecture mismatch: {:?} vs {:?}",
                self.sizes, other.sizes
            )));
        }
        self.params.copy_from_slice(&other.params);
        Ok(())
    }

    /// Draws an independent Bernoulli(`keep_prob`) indicator per hidden unit.
    pub fn sample_mask(&self, keep_prob: f64, rng: &mut Rng) -> Result<DropoutMask> {
        check_keep_prob(keep_prob)?;
        let layers = self.sizes[1..self.sizes.len() - 1]
            .iter()
            .map(|&n| {
                if keep_prob == 1.0 {
                    vec![true; n]
                } else {
                    (0..n).map(|_| rng.random_bool(keep_prob)).collect()
                }
            })
            .collect();
        Ok(DropoutMask { keep_prob, layers })
    }

    fn check_input(&self, input: &[f64], mask: Option<&DropoutMask>) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Argument(format!(
                "input has {} features, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        if let Some(m) = mask {
            let hidden = &self.sizes[1..self.sizes.len() - 1];
            if m.layers.len() != hidden.len() || m.layers.iter().zip(hidden).any(|(l, &n)| l.len() != n) {
                return Err(Error::Argument("dropout mask does not match network architecture".into()));
            }
        }
        Ok(())
    }

    /// Evaluates the network. `None` is the all-ones mask.
    pub fn forward(&self, input: &[f64], mask: Option<&DropoutMask>) -> Result<Vec<f64>> {
        Ok(self.forward_cached(input, mask)?.output)
    }

    /// Forward pass that keeps what [`Mlp::backward_cached`] needs.
    pub fn forward_cached(&self, input: &[f64], mask: Option<&DropoutMask>) -> Result<ForwardCache> {
        self.check_input(input, mask)?;
        let hidden = self.spans.len() - 1;
        let mut activations = Vec::with_capacity(self.spans.len());
        let mut slopes = Vec::with_capacity(hidden);
        let mut current = input.to_vec();
        for (l, span) in self.spans.iter().enumerate() {
            let mut z = self.params[span.bias..span.bias + span.outputs].to_vec();
            for (i, &x) in current.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let row = &self.params[span.weights + i * span.outputs..][..span.outputs];
                for (zj, &w) in z.iter_mut().zip(row) {
                    *zj += w * x;
                }
            }
            activations.push(current);
            if l == hidden {
                return Ok(ForwardCache {
                    activations,
                    slopes,
                    output: z,
                });
            }
            let (keep, scale) = match mask {
                Some(m) => (Some(&m.layers[l]), 1.0 / m.keep_prob),
                None => (None, 1.0),
            };
            let mut slope = vec![0.0; z.len()];
            for (j, zj) in z.iter_mut().enumerate() {
                let kept = keep.is_none_or(|k| k[j]);
                if *zj > 0.0 && kept {
                    *zj *= scale;
                    slope[j] = scale;
                } else {
                    *zj = 0.0;
                }
            }
            slopes.push(slope);
            current = z;
        }
        unreachable!("network has at least one layer")
    }

    /// Exact parameter gradients of `output_gradient . forward(input, mask)`.
    pub fn backward(&self, input: &[f64], mask: Option<&DropoutMask>, output_gradient: &[f64]) -> Result<Gradients> {
        let cache = self.forward_cached(input, mask)?;
        let mut grads = self.zero_gradients();
        self.backward_cached(&cache, output_gradient, &mut grads)?;
        Ok(grads)
    }

    /// Adds the gradients for one cached forward pass into `grads`.
    pub fn backward_cached(&self, cache: &ForwardCache, output_gradient: &[f64], grads: &mut Gradients) -> Result<()> {
        if output_gradient.len() != self.output_dim() {
            return Err(Error::Argument(format!(
                "output gradient has {} entries, network outputs {}",
                output_gradient.len(),
                self.output_dim()
            )));
        }
        if grads.values.len() != self.params.len() {
            return Err(Error::Argument("gradient buffer does not match network".into()));
        }
        let mut delta = output_gradient.to_vec();
        for (l, span) in self.spans.iter().enumerate().rev() {
            let a_prev = &cache.activations[l];
            let g = &mut grads.values;
            for (gb, &d) in g[span.bias..span.bias + span.outputs].iter_mut().zip(&delta) {
                *gb += d;
            }
            for (i, &x) in a_prev.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let row = &mut g[span.weights + i * span.outputs..][..span.outputs];
                for (gw, &d) in row.iter_mut().zip(&delta) {
                    *gw += x * d;
                }
            }
            if l == 0 {
                break;
            }
            let slope = &cache.slopes[l - 1];
            delta = (0..span.inputs)
                .map(|i| {
                    if slope[i] == 0.0 {
                        0.0
                    } else {
                        let row = &self.params[span.weights + i * span.outputs..][..span.outputs];
                        slope[i] * dot(row, &delta)
                    }
                })
                .collect();
        }
        Ok(())
    }
}

impl Mlp {
    /// Forward pass over `rows` inputs stacked row-major in `inputs`, with
    /// one optional dropout mask per row.
    pub fn forward_batch(&self, inputs: &[f64], rows: usize, masks: Option<&[DropoutMask]>) -> Result<BatchCache> {
        if inputs.len() != rows * self.input_dim() {
            return Err(Error::Argument(format!(
                "batch of {rows} rows needs {} inputs, got {}",
                rows * self.input_dim(),
                inputs.len()
            )));
        }
        if let Some(ms) = masks {
            if ms.len() != rows {
                return Err(Error::Argument(format!("{} masks for {rows} rows", ms.len())));
            }
            for m in ms {
                self.check_input(&inputs[..self.input_dim()], Some(m))?;
            }
        }
        let hidden = self.spans.len() - 1;
        let mut activations = Vec::with_capacity(self.spans.len());
        let mut slopes = Vec::with_capacity(hidden);
        let mut current = inputs.to_vec();
        for (l, span) in self.spans.iter().enumerate() {
            let bias = &self.params[span.bias..span.bias + span.outputs];
            let mut z = Vec::with_capacity(rows * span.outputs);
            for _ in 0..rows {
                z.extend_from_slice(bias);
            }
            let w = &self.params[span.weights..span.bias];
            gemm_acc(rows, span.inputs, span.outputs, &current, false, w, false, &mut z);
            activations.push(current);
            if l == hidden {
                return Ok(BatchCache {
                    rows,
                    activations,
                    slopes,
                    output: z,
                });
            }
            let mut slope = vec![0.0; z.len()];
            for r in 0..rows {
                let (keep, scale) = match masks {
                    Some(ms) => (Some(&ms[r].layers[l]), 1.0 / ms[r].keep_prob),
                    None => (None, 1.0),
                };
                let zr = &mut z[r * span.outputs..][..span.outputs];
                let sr = &mut slope[r * span.outputs..][..span.outputs];
                for (j, (zj, sj)) in zr.iter_mut().zip(sr).enumerate() {
                    if *zj > 0.0 && keep.is_none_or(|k| k[j]) {
                        *zj *= scale;
                        *sj = scale;
                    } else {
                        *zj = 0.0;
                    }
                }
            }
            slopes.push(slope);
            current = z;
        }
        unreachable!("network has at least one layer")
    }

    /// Adds the summed parameter gradients of `sum_r out_grads[r] . output[r]`
    /// into `grads`; `out_grads` is `rows x output_dim`, row-major.
    pub fn backward_batch(&self, cache: &BatchCache, out_grads: &[f64], grads: &mut Gradients) -> Result<()> {
        let rows = cache.rows;
        if out_grads.len() != rows * self.output_dim() {
            return Err(Error::Argument(format!(
                "output gradient has {} entries, expected {}",
                out_grads.len(),
                rows * self.output_dim()
            )));
        }
        if grads.values.len() != self.params.len() {
            return Err(Error::Argument("gradient buffer does not match network".into()));
        }
        let mut delta = out_grads.to_vec();
        for (l, span) in self.spans.iter().enumerate().rev() {
            let g = &mut grads.values;
            for r in 0..rows {
                let dr = &delta[r * span.outputs..][..span.outputs];
                for (gb, &d) in g[span.bias..span.bias + span.outputs].iter_mut().zip(dr) {
                    *gb += d;
                }
            }
            let a_prev = &cache.activations[l];
            gemm_acc(
                span.inputs,
                rows,
                span.outputs,
                a_prev,
                true,
                &delta,
                false,
                &mut g[span.weights..span.bias],
            );
            if l == 0 {
                break;
            }
            let mut next = vec![0.0; rows * span.inputs];
            let w = &self.params[span.weights..span.bias];
            gemm_acc(rows, span.outputs, span.inputs, &delta, false, w, true, &mut next);
            for (d, &s) in next.iter_mut().zip(&cache.slopes[l - 1]) {
                *d *= s;
            }
            delta = next;
        }
        Ok(())
    }
}

pub(crate) fn check_keep_prob(keep_prob: f64) -> Result<()> {
    if !(keep_prob > 0.0 && keep_prob <= 1.0) {
        return Err(Error::Argument(format!("keep_prob {keep_prob} must be in (0, 1]")));
    }
    Ok(())
}

impl DropoutMask {
    /// The all-ones mask for `net`.
    pub fn ones(net: &Mlp) -> Self {
        DropoutMask {
            keep_prob: 1.0,
            layers: net.sizes[1..net.sizes.len() - 1].iter().map(|&n| vec![true; n]).collect(),
        }
    }

    pub fn keep_prob(&self) -> f64 {
        self.keep_prob
    }

    pub fn layers(&self) -> &[Vec<bool>] {
        &self.layers
    }

    /// Fraction of kept units over all layers.
    pub fn keep_fraction(&self) -> f64 {
        let total: usize = self.layers.iter().map(Vec::len).sum();
        let kept: usize = self.layers.iter().map(|l| l.iter().filter(|&&k| k).count()).sum();
        kept as f64 / total as f64
    }
}

impl Gradients {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|g| *g *= factor);
    }

    pub fn fill_zero(&mut self) {
        self.values.fill(0.0);
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|g| g.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_difference(net: &Mlp, input: &[f64], mask: Option<&DropoutMask>, out_grad: &[f64], h: f64) -> Vec<f64> {
        let objective = |n: &Mlp| -> f64 {
            n.forward(input, mask)
                .unwrap()
                .iter()
                .zip(out_grad)
                .map(|(o, g)| o * g)
                .sum()
        };
        let mut probe = net.clone();
        (0..net.num_params())
            .map(|k| {
                let orig = probe.params[k];
                probe.params[k] = orig + h;
                let up = objective(&probe);
                probe.params[k] = orig - h;
                let down = objective(&probe);
                probe.params[k] = orig;
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn construction_is_seeded() {
        let a = Mlp::new(&[4, 8, 2], 3).unwrap();
        let b = Mlp::new(&[4, 8, 2], 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, Mlp::new(&[4, 8, 2], 4).unwrap());
        assert!(a.bias(0).iter().all(|&b| b == 0.0));
    }

    #[test]
    fn layer_shapes_chain() {
        let net = Mlp::new(&[4, 128, 128, 128, 2], 0).unwrap();
        assert_eq!(net.num_layers(), 4);
        let shapes: Vec<_> = (0..4).map(|l| net.weight_shape(l)).collect();
        assert_eq!(shapes, vec![(128, 4), (128, 128), (128, 128), (2, 128)]);

        let small = Mlp::new(&[2, 3, 1], 0).unwrap();
        assert_eq!(small.num_layers(), 2);
        assert_eq!(small.weight_shape(0), (3, 2));
        assert_eq!(small.weight_shape(1), (1, 3));
        assert_eq!(small.num_params(), 2 * 3 + 3 + 3 + 1);
    }

    #[test]
    fn invalid_sizes_are_config_errors() {
        assert!(matches!(Mlp::new(&[4], 0), Err(Error::Config(_))));
        assert!(matches!(Mlp::new(&[4, 0, 2], 0), Err(Error::Config(_))));
    }

    #[test]
    fn keep_prob_bounds() {
        let net = Mlp::new(&[3, 5, 1], 0).unwrap();
        let mut rng = seeded(0);
        assert!(matches!(net.sample_mask(0.0, &mut rng), Err(Error::Argument(_))));
        assert!(matches!(net.sample_mask(1.5, &mut rng), Err(Error::Argument(_))));
        let ones = net.sample_mask(1.0, &mut rng).unwrap();
        assert_eq!(ones, DropoutMask::ones(&net));
    }

    #[test]
    fn masks_repeat_for_equal_rng_state() {
        let net = Mlp::new(&[3, 64, 64, 1], 0).unwrap();
        let a = net.sample_mask(0.5, &mut seeded(9)).unwrap();
        let b = net.sample_mask(0.5, &mut seeded(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[3, 6, 6, 2]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 0.5], None).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn ones_mask_matches_unmasked() {
        let net = Mlp::new(&[3, 6, 6, 2], 5).unwrap();
        let x = [0.3, -0.7, 1.1];
        let plain = net.forward(&x, None).unwrap();
        assert_eq!(plain, net.forward(&x, Some(&DropoutMask::ones(&net))).unwrap());
        assert_eq!(plain, net.forward(&x, None).unwrap());
    }

    #[test]
    fn dropped_unit_outgoing_weights_are_irrelevant() {
        let mut net = Mlp::new(&[3, 6, 4, 2], 5).unwrap();
        let mut mask = net.sample_mask(1.0, &mut seeded(0)).unwrap();
        mask.keep_prob = 0.5;
        mask.layers[0][2] = false;
        let x = [0.3, -0.7, 1.1];
        let before = net.forward(&x, Some(&mask)).unwrap();
        for j in 0..4 {
            *net.weight_mut(1, j, 2) = 0.0;
        }
        assert_eq!(before, net.forward(&x, Some(&mask)).unwrap());
    }

    #[test]
    fn shape_mismatch_is_an_argument_error() {
        let net = Mlp::new(&[3, 4, 2], 0).unwrap();
        assert!(matches!(net.forward(&[1.0], None), Err(Error::Argument(_))));
        let other = Mlp::new(&[3, 5, 2], 0).unwrap();
        let mask = DropoutMask::ones(&other);
        assert!(matches!(net.forward(&[1.0, 2.0, 3.0], Some(&mask)), Err(Error::Argument(_))));
        assert!(matches!(net.backward(&[1.0, 2.0, 3.0], None, &[1.0]), Err(Error::Argument(_))));
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let net = Mlp::new(&[3, 5, 5, 2], 1).unwrap();
        let g = net.backward(&[0.2, 0.4, -1.0], None, &[0.0, 0.0]).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dead_relu_unit_has_zero_incoming_gradient() {
        let mut net = Mlp::new(&[2, 3, 1], 4).unwrap();
        let x = [1.0, 1.0];
        // push unit 1 of the hidden layer far negative
        net.bias_mut(0)[1] = -100.0;
        let g = net.backward(&x, None, &[1.0]).unwrap();
        let s = net.spans[0];
        for i in 0..2 {
            assert_eq!(g.values()[s.weights + i * s.outputs + 1], 0.0);
        }
        assert_eq!(g.values()[s.bias + 1], 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seeded(77);
        let net = Mlp::new(&[3, 7, 5, 2], 8).unwrap();
        let mask = net.sample_mask(0.8, &mut rng).unwrap();
        let x = [0.5, -1.2, 0.9];
        let out_grad = [0.7, -1.3];
        let analytic = net.backward(&x, Some(&mask), &out_grad).unwrap();
        let numeric = central_difference(&net, &x, Some(&mask), &out_grad, 1e-5);
        for (a, n) in analytic.values().iter().zip(&numeric) {
            assert!((a - n).abs() <= 1e-6 * (1.0 + a.abs().max(n.abs())), "{a} vs {n}");
        }
    }

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f64> = (0..11).map(|i| i as f64 * 0.5 - 2.0).collect();
        let b: Vec<f64> = (0..11).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn batch_pass_matches_row_by_row() {
        let mut rng = seeded(5);
        let net = Mlp::new(&[3, 6, 4, 2], 9).unwrap();
        let rows = 5;
        let inputs: Vec<f64> = (0..rows * 3).map(|i| (i as f64 * 0.37).sin()).collect();
        let masks: Vec<DropoutMask> = (0..rows).map(|_| net.sample_mask(0.7, &mut rng).unwrap()).collect();
        let out_grads: Vec<f64> = (0..rows * 2).map(|i| (i as f64 * 0.61).cos()).collect();

        let cache = net.forward_batch(&inputs, rows, Some(&masks)).unwrap();
        let mut batch_grads = net.zero_gradients();
        net.backward_batch(&cache, &out_grads, &mut batch_grads).unwrap();

        let mut single_grads = net.zero_gradients();
        for r in 0..rows {
            let x = &inputs[r * 3..][..3];
            let c = net.forward_cached(x, Some(&masks[r])).unwrap();
            for (b, s) in cache.output()[r * 2..][..2].iter().zip(c.output()) {
                assert!((b - s).abs() < 1e-12);
            }
            net.backward_cached(&c, &out_grads[r * 2..][..2], &mut single_grads).unwrap();
        }
        for (b, s) in batch_grads.values().iter().zip(single_grads.values()) {
            assert!((b - s).abs() < 1e-12, "{b} vs {s}");
        }
    }

    #[test]
    fn batch_shape_errors() {
        let net = Mlp::new(&[2, 3, 1], 0).unwrap();
        assert!(matches!(net.forward_batch(&[0.0; 5], 2, None), Err(Error::Argument(_))));
        let cache = net.forward_batch(&[0.0; 4], 2, None).unwrap();
        let mut g = net.zero_gradients();
        assert!(matches!(net.backward_batch(&cache, &[1.0], &mut g), Err(Error::Argument(_))));
    }
}
