//! Dense continuous-weight multilayer perceptron.
//!
//! This is the representation used during training and the reference
//! implementation the sparse ternary engine is checked against. Every neuron
//! (hidden and output alike) computes `tanh(sum_i w_ij * a_i - c_j)`: weights
//! feed a plain sum and the threshold `c_j` is subtracted, never added as a
//! bias.
//!
//! Weight matrices are stored source-major: row `i` of a layer's matrix holds
//! the outgoing weights of source neuron `i`. The sparsity reports in
//! [`crate::analysis`] and the wire format in [`crate::store`] rely on this
//! orientation.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// The only activation shipped: odd, bounded, `tanh`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
}

/// Layer-size description of a network: input, one or more hidden layers,
/// output. All neurons share the same activation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    layer_sizes: Vec<usize>,
    activation: Activation,
}

impl NetworkSpec {
    /// Validates and builds a spec. Requires at least `input:hidden:output`
    /// and strictly positive sizes.
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 3 {
            return Err(Error::Config(format!(
                "need at least 3 layer sizes (input, hidden, output), got {}",
                layer_sizes.len()
            )));
        }
        if let Some(pos) = layer_sizes.iter().position(|&s| s == 0) {
            return Err(Error::Config(format!("layer {pos} has size 0")));
        }
        Ok(Self {
            layer_sizes,
            activation: Activation::Tanh,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of weight layers (= number of non-input layers).
    pub fn weight_layer_count(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn hidden_layer_count(&self) -> usize {
        self.layer_sizes.len() - 2
    }

    /// Total number of weight positions, zero or not.
    pub fn weight_positions(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1])
            .sum()
    }

    /// "784:64:16:10"-style rendering.
    pub fn shape_string(&self) -> String {
        self.layer_sizes
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(":")
    }
}

/// Dense network: per-layer weight matrix `[fan_in x fan_out]` plus a real
/// threshold per destination neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    weights: Vec<Mat>,
    thresholds: Vec<Vec<f64>>,
}

/// Pre-activations and activations recorded by a forward pass, for one input
/// batch. `activations[0]` is the input itself.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub pre_activations: Vec<Mat>,
    pub activations: Vec<Mat>,
}

/// Gradient of the output error with respect to every weight and threshold,
/// summed over the examples of the traced batch.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Mat>,
    pub thresholds: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            weights: net
                .weights
                .iter()
                .map(|w| Mat::zeros(w.rows(), w.cols()))
                .collect(),
            thresholds: net.thresholds.iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *x += *y;
            }
        }
        for (a, b) in self.thresholds.iter_mut().zip(&other.thresholds) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }
}

/// Draws a fresh network: weights i.i.d. uniform on [-0.5, 0.5], thresholds
/// uniform on [-0.1, 0.1]. Deterministic for a given seed.
pub fn init_network(spec: &NetworkSpec, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w_dist = Uniform::new_inclusive(-0.5, 0.5);
    let c_dist = Uniform::new_inclusive(-0.1, 0.1);

    let mut weights = Vec::with_capacity(spec.weight_layer_count());
    let mut thresholds = Vec::with_capacity(spec.weight_layer_count());
    for pair in spec.layer_sizes.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let mut w = Mat::zeros(fan_in, fan_out);
        for v in w.as_mut_slice() {
            *v = w_dist.sample(&mut rng);
        }
        weights.push(w);
        thresholds.push((0..fan_out).map(|_| c_dist.sample(&mut rng)).collect());
    }
    Network {
        spec: spec.clone(),
        weights,
        thresholds,
    }
}

impl Network {
    /// Builds a network from explicit parameters, checking shapes.
    pub fn from_parts(
        spec: NetworkSpec,
        weights: Vec<Mat>,
        thresholds: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let sizes = spec.layer_sizes();
        if weights.len() != sizes.len() - 1 || thresholds.len() != sizes.len() - 1 {
            return Err(Error::Shape(format!(
                "expected {} weight layers, got {} (thresholds {})",
                sizes.len() - 1,
                weights.len(),
                thresholds.len()
            )));
        }
        for (l, pair) in sizes.windows(2).enumerate() {
            if weights[l].rows() != pair[0] || weights[l].cols() != pair[1] {
                return Err(Error::Shape(format!(
                    "layer {l}: weight matrix is {}x{}, expected {}x{}",
                    weights[l].rows(),
                    weights[l].cols(),
                    pair[0],
                    pair[1]
                )));
            }
            if thresholds[l].len() != pair[1] {
                return Err(Error::Shape(format!(
                    "layer {l}: {} thresholds, expected {}",
                    thresholds[l].len(),
                    pair[1]
                )));
            }
        }
        Ok(Self {
            spec,
            weights,
            thresholds,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[Mat] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Mat] {
        &mut self.weights
    }

    pub fn thresholds(&self) -> &[Vec<f64>] {
        &self.thresholds
    }

    pub fn thresholds_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.thresholds
    }

    /// Forward pass for one input vector.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardTrace)> {
        let batch = Mat::from_vec(1, input.len(), input.to_vec());
        let (out, trace) = self.forward_batch(&batch)?;
        Ok((out.row(0).to_vec(), trace))
    }

    /// Forward pass for a batch (one input per row).
    pub fn forward_batch(&self, input: &Mat) -> Result<(Mat, ForwardTrace)> {
        if input.cols() != self.spec.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} features, network expects {}",
                input.cols(),
                self.spec.input_dim()
            )));
        }
        let n = input.rows();
        let mut pre_activations = Vec::with_capacity(self.weights.len());
        let mut activations = Vec::with_capacity(self.weights.len() + 1);
        activations.push(input.clone());

        for (w, c) in self.weights.iter().zip(&self.thresholds) {
            let prev = activations.last().unwrap();
            let mut pre = Mat::zeros(n, w.cols());
            for r in 0..n {
                let src = prev.row(r);
                let dst = pre.row_mut(r);
                // start from -c, then accumulate source contributions
                for (d, &cj) in dst.iter_mut().zip(c) {
                    *d = -cj;
                }
                for (i, &a) in src.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    let wrow = w.row(i);
                    for (d, &wij) in dst.iter_mut().zip(wrow) {
                        *d += wij * a;
                    }
                }
            }
            let mut act = pre.clone();
            for v in act.as_mut_slice() {
                *v = v.tanh();
            }
            pre_activations.push(pre);
            activations.push(act);
        }

        let output = activations.last().unwrap().clone();
        Ok((
            output,
            ForwardTrace {
                pre_activations,
                activations,
            },
        ))
    }

    /// Backpropagates the squared output error `sum_k (o_k - t_k)^2`, summed
    /// over the traced batch. Returns exact analytic gradients for every
    /// weight and threshold; the threshold gradient is the negated sum of
    /// pre-activation deltas.
    pub fn backward(&self, trace: &ForwardTrace, targets: &Mat) -> Result<Gradients> {
        let output = trace.activations.last().ok_or_else(|| {
            Error::Contract("trace has no activations".to_string())
        })?;
        if trace.activations.len() != self.weights.len() + 1 {
            return Err(Error::Contract(format!(
                "trace has {} activation layers, network has {}",
                trace.activations.len(),
                self.weights.len() + 1
            )));
        }
        for (l, w) in self.weights.iter().enumerate() {
            if trace.activations[l].cols() != w.rows() {
                return Err(Error::Contract(format!(
                    "trace layer {l} width {} does not match fan-in {}",
                    trace.activations[l].cols(),
                    w.rows()
                )));
            }
        }
        if targets.rows() != output.rows() || targets.cols() != output.cols() {
            return Err(Error::Shape(format!(
                "targets are {}x{}, outputs are {}x{}",
                targets.rows(),
                targets.cols(),
                output.rows(),
                output.cols()
            )));
        }

        let n = output.rows();
        let mut grads = Gradients::zeros_like(self);

        // delta = dE/d(pre-activation), per example currently being processed
        let mut delta = vec![0.0; output.cols()];
        let mut delta_prev: Vec<f64> = Vec::new();

        for ex in 0..n {
            // output layer: dE/do = 2(o - t), through tanh' = 1 - o^2
            let o = output.row(ex);
            let t = targets.row(ex);
            delta.resize(o.len(), 0.0);
            for k in 0..o.len() {
                delta[k] = 2.0 * (o[k] - t[k]) * (1.0 - o[k] * o[k]);
            }

            for l in (0..self.weights.len()).rev() {
                let w = &self.weights[l];
                let prev_act = trace.activations[l].row(ex);

                // parameter gradients
                let gw = &mut grads.weights[l];
                for (i, &a) in prev_act.iter().enumerate() {
                    if a != 0.0 {
                        let grow = gw.row_mut(i);
                        for (g, &d) in grow.iter_mut().zip(&delta) {
                            *g += a * d;
                        }
                    }
                }
                for (g, &d) in grads.thresholds[l].iter_mut().zip(&delta) {
                    *g -= d;
                }

                // propagate to the previous layer
                if l > 0 {
                    delta_prev.clear();
                    delta_prev.resize(w.rows(), 0.0);
                    for (i, dp) in delta_prev.iter_mut().enumerate() {
                        let wrow = w.row(i);
                        let mut s = 0.0;
                        for (wij, &d) in wrow.iter().zip(&delta) {
                            s += wij * d;
                        }
                        let a = prev_act[i];
                        *dp = s * (1.0 - a * a);
                    }
                    std::mem::swap(&mut delta, &mut delta_prev);
                }
            }
        }
        Ok(grads)
    }

    /// Consistently permutes the neurons of hidden layer `layer` (1-based
    /// within hidden layers is not used here: `layer` indexes weight layers,
    /// so `layer = 0` permutes the first hidden layer). The function is used
    /// by tests and by dead-neuron pruning.
    pub fn permute_layer(&mut self, layer: usize, perm: &[usize]) {
        assert!(layer + 1 < self.weights.len(), "cannot permute output");
        let width = self.weights[layer].cols();
        assert_eq!(perm.len(), width);

        // columns of the incoming matrix
        let old_in = self.weights[layer].clone();
        for r in 0..old_in.rows() {
            for (new_c, &old_c) in perm.iter().enumerate() {
                *self.weights[layer].at_mut(r, new_c) = old_in.at(r, old_c);
            }
        }
        // thresholds
        let old_c = self.thresholds[layer].clone();
        for (new_i, &old_i) in perm.iter().enumerate() {
            self.thresholds[layer][new_i] = old_c[old_i];
        }
        // rows of the outgoing matrix
        let old_out = self.weights[layer + 1].clone();
        for (new_r, &old_r) in perm.iter().enumerate() {
            self.weights[layer + 1]
                .row_mut(new_r)
                .copy_from_slice(old_out.row(old_r));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(sizes: &[usize]) -> NetworkSpec {
        NetworkSpec::new(sizes.to_vec()).unwrap()
    }

    #[test]
    fn spec_rejects_degenerate_shapes() {
        assert!(NetworkSpec::new(vec![2, 1]).is_err());
        assert!(NetworkSpec::new(vec![2, 0, 1]).is_err());
        assert!(NetworkSpec::new(vec![2, 2, 1]).is_ok());
    }

    #[test]
    fn init_respects_ranges_and_shapes() {
        let net = init_network(&spec(&[2, 2, 1]), 7);
        assert_eq!(net.weights()[0].rows(), 2);
        assert_eq!(net.weights()[0].cols(), 2);
        assert_eq!(net.weights()[1].rows(), 2);
        assert_eq!(net.weights()[1].cols(), 1);
        for w in net.weights() {
            assert!(w.iter().all(|v| v.abs() <= 0.5));
        }
        for c in net.thresholds() {
            assert!(c.iter().all(|v| v.abs() <= 0.1));
        }
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_network(&spec(&[3, 4, 2]), 42);
        let b = init_network(&spec(&[3, 4, 2]), 42);
        assert_eq!(a, b);
        let c = init_network(&spec(&[3, 4, 2]), 43);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_weights_output_depends_only_on_threshold() {
        let s = spec(&[3, 2, 2]);
        let mut net = init_network(&s, 1);
        for w in net.weights_mut() {
            w.fill(0.0);
        }
        let c_out = net.thresholds()[1].clone();
        let (y1, _) = net.forward(&[0.3, -0.2, 0.9]).unwrap();
        let (y2, _) = net.forward(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(y1, y2);
        for (y, c) in y1.iter().zip(&c_out) {
            assert_eq!(*y, (-c).tanh());
        }
    }

    #[test]
    fn symmetric_input_cancels() {
        // single neuron, w = [1, 1], c = 0, x = [0.5, -0.5] -> tanh(0) = 0
        let s = spec(&[2, 1, 1]);
        let net = Network::from_parts(
            s,
            vec![
                Mat::from_vec(2, 1, vec![1.0, 1.0]),
                Mat::from_vec(1, 1, vec![0.0]),
            ],
            vec![vec![0.0], vec![0.0]],
        )
        .unwrap();
        let (_, trace) = net.forward(&[0.5, -0.5]).unwrap();
        assert_eq!(trace.activations[1].at(0, 0), 0.0);
    }

    /// Independent straight-line re-implementation of the matrix recurrence,
    /// kept deliberately naive (triple loop, no batching).
    fn naive_forward(net: &Network, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for (w, c) in net.weights().iter().zip(net.thresholds()) {
            let mut next = vec![0.0; w.cols()];
            for j in 0..w.cols() {
                let mut z = -c[j];
                for i in 0..w.rows() {
                    z += w.at(i, j) * a[i];
                }
                next[j] = z.tanh();
            }
            a = next;
        }
        a
    }

    #[test]
    fn forward_matches_naive_reimplementation() {
        let s = spec(&[784, 30, 14, 10]);
        let net = init_network(&s, 99);
        let mut rng_x = 0u64;
        let x: Vec<f64> = (0..784)
            .map(|_| {
                // cheap deterministic pseudo-input
                rng_x = rng_x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((rng_x >> 33) as f64 / (1u64 << 31) as f64) - 0.5
            })
            .collect();
        let (y, _) = net.forward(&x).unwrap();
        let y_ref = naive_forward(&net, &x);
        for (a, b) in y.iter().zip(&y_ref) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let net = init_network(&spec(&[3, 2, 1]), 0);
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn forward_is_pure() {
        let net = init_network(&spec(&[4, 5, 3]), 5);
        let x = [0.1, -0.9, 0.4, 0.0];
        let (y1, _) = net.forward(&x).unwrap();
        let (y2, _) = net.forward(&x).unwrap();
        assert_eq!(y1, y2); // identical bits
    }

    #[test]
    fn activations_stay_strictly_inside_unit_interval() {
        let net = init_network(&spec(&[10, 8, 8, 2]), 3);
        let x: Vec<f64> = (0..10).map(|i| (i as f64 / 10.0) - 0.5).collect();
        let (_, trace) = net.forward(&x).unwrap();
        for act in &trace.activations[1..] {
            for v in act.iter() {
                assert!(v > -1.0 && v < 1.0);
            }
        }
        for pre in &trace.pre_activations {
            assert!(pre.iter().all(f64::is_finite));
        }
    }

    #[test]
    fn zero_error_means_zero_gradient() {
        let net = init_network(&spec(&[3, 4, 2]), 11);
        let (y, trace) = net.forward(&[0.2, -0.1, 0.7]).unwrap();
        let targets = Mat::from_vec(1, 2, y);
        let g = net.backward(&trace, &targets).unwrap();
        for gw in &g.weights {
            assert!(gw.iter().all(|v| v == 0.0));
        }
        for gc in &g.thresholds {
            assert!(gc.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn backward_rejects_mismatched_targets() {
        let net = init_network(&spec(&[3, 4, 2]), 11);
        let (_, trace) = net.forward(&[0.2, -0.1, 0.7]).unwrap();
        let bad = Mat::zeros(1, 3);
        assert!(net.backward(&trace, &bad).is_err());
    }

    /// Central finite differences over every parameter of a small net.
    #[test]
    fn backward_matches_finite_differences() {
        let s = spec(&[3, 4, 3, 2]);
        let mut net = init_network(&s, 17);
        let x = Mat::from_vec(2, 3, vec![0.3, -0.7, 0.1, 0.9, 0.2, -0.4]);
        let t = Mat::from_vec(2, 2, vec![0.5, -0.5, -0.9, 0.9]);

        let (_, trace) = net.forward_batch(&x).unwrap();
        let g = net.backward(&trace, &t).unwrap();

        let loss = |net: &Network, x: &Mat, t: &Mat| -> f64 {
            let (y, _) = net.forward_batch(x).unwrap();
            let mut e = 0.0;
            for r in 0..y.rows() {
                for c in 0..y.cols() {
                    let d = y.at(r, c) - t.at(r, c);
                    e += d * d;
                }
            }
            e
        };

        let h = 1e-5;
        for l in 0..net.weights().len() {
            for i in 0..net.weights()[l].rows() {
                for j in 0..net.weights()[l].cols() {
                    let orig = net.weights()[l].at(i, j);
                    *net.weights_mut()[l].at_mut(i, j) = orig + h;
                    let up = loss(&net, &x, &t);
                    *net.weights_mut()[l].at_mut(i, j) = orig - h;
                    let dn = loss(&net, &x, &t);
                    *net.weights_mut()[l].at_mut(i, j) = orig;
                    let numeric = (up - dn) / (2.0 * h);
                    let analytic = g.weights[l].at(i, j);
                    let scale = analytic.abs().max(numeric.abs()).max(1e-4);
                    assert!(
                        (analytic - numeric).abs() / scale < 1e-4,
                        "w[{l}][{i}][{j}]: {analytic} vs {numeric}"
                    );
                }
            }
            for j in 0..net.thresholds()[l].len() {
                let orig = net.thresholds()[l][j];
                net.thresholds_mut()[l][j] = orig + h;
                let up = loss(&net, &x, &t);
                net.thresholds_mut()[l][j] = orig - h;
                let dn = loss(&net, &x, &t);
                net.thresholds_mut()[l][j] = orig;
                let numeric = (up - dn) / (2.0 * h);
                let analytic = g.thresholds[l][j];
                let scale = analytic.abs().max(numeric.abs()).max(1e-4);
                assert!(
                    (analytic - numeric).abs() / scale < 1e-4,
                    "c[{l}][{j}]: {analytic} vs {numeric}"
                );
            }
        }
    }

    /// The threshold gradient must equal the negated gradient of an
    /// equivalent bias-as-weight-from-constant-(+1)-input formulation.
    #[test]
    fn threshold_gradient_sign_convention() {
        // 1:1:1 net with weight w and threshold c ...
        let s1 = spec(&[1, 1, 1]);
        let net1 = Network::from_parts(
            s1,
            vec![
                Mat::from_vec(1, 1, vec![0.8]),
                Mat::from_vec(1, 1, vec![-0.6]),
            ],
            vec![vec![0.3], vec![-0.2]],
        )
        .unwrap();
        // ... vs a 2:1:1 net where input 1 is constant +1 with weight b = -c
        // and thresholds zeroed.
        let s2 = spec(&[2, 1, 1]);
        let net2 = Network::from_parts(
            s2,
            vec![
                Mat::from_vec(2, 1, vec![0.8, -0.3]),
                Mat::from_vec(1, 1, vec![-0.6]),
            ],
            vec![vec![0.0], vec![-0.2]],
        )
        .unwrap();
        // net2's hidden layer computes tanh(0.8 x + (-0.3)*1 - 0), identical
        // to net1's tanh(0.8 x - 0.3); output layers are shared verbatim.
        let x = 0.4;
        let t = Mat::from_vec(1, 1, vec![0.1]);

        let (y1, tr1) = net1.forward(&[x]).unwrap();
        let (y2, tr2) = net2.forward(&[x, 1.0]).unwrap();
        assert!((y1[0] - y2[0]).abs() < 1e-15);

        let g1 = net1.backward(&tr1, &t).unwrap();
        let g2 = net2.backward(&tr2, &t).unwrap();
        // gradient wrt c equals minus the gradient wrt the bias weight
        assert!((g1.thresholds[0][0] + g2.weights[0].at(1, 0)).abs() < 1e-12);
    }

    #[test]
    fn permuting_hidden_neurons_preserves_outputs_closely() {
        // Floating-point addition is not associative, so a permutation can
        // shift the last ulp of a downstream sum; 1e-12 covers that.
        let s = spec(&[5, 6, 4, 2]);
        let mut net = init_network(&s, 23);
        let x = [0.2, -0.4, 0.8, 0.1, -0.9];
        let (y0, _) = net.forward(&x).unwrap();
        net.permute_layer(0, &[3, 1, 5, 0, 2, 4]);
        net.permute_layer(1, &[2, 0, 3, 1]);
        let (y1, _) = net.forward(&x).unwrap();
        for (a, b) in y0.iter().zip(&y1) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }
}
