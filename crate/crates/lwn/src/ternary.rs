//! Multiplication-free inference over frozen {-1, 0, +1} models.
//!
//! Connectivity is stored as two CSR-style index lists per layer, one for
//! +1 weights and one for -1 weights, keyed by destination neuron. The
//! forward kernel only ever sees those index lists: it adds the plus
//! sources, subtracts the minus sources, subtracts the threshold and takes
//! `tanh`. There is no weight value anywhere in the kernel, so the absence
//! of weight multiplications is structural, not an optimization.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::network::{Network, NetworkSpec};

/// Per-destination index lists in CSR layout: sources of destination `j`
/// are `indices[offsets[j]..offsets[j + 1]]`, strictly ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedConnectivity {
    offsets: Vec<usize>,
    indices: Vec<u32>,
}

impl SignedConnectivity {
    fn with_destinations(fan_out: usize) -> Self {
        Self {
            offsets: vec![0; fan_out + 1],
            indices: Vec::new(),
        }
    }

    #[inline]
    pub fn sources(&self, destination: usize) -> &[u32] {
        &self.indices[self.offsets[destination]..self.offsets[destination + 1]]
    }

    pub fn destination_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.indices.len()
    }
}

/// One frozen layer: sign-split connectivity plus 32-bit thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct TernaryLayer {
    fan_in: usize,
    pub plus: SignedConnectivity,
    pub minus: SignedConnectivity,
    pub thresholds: Vec<f32>,
}

impl TernaryLayer {
    pub fn fan_in(&self) -> usize {
        self.fan_in
    }

    pub fn fan_out(&self) -> usize {
        self.thresholds.len()
    }

    /// Total weight positions of this layer, zero or not.
    pub fn positions(&self) -> usize {
        self.fan_in * self.fan_out()
    }

    pub fn nonzero_count(&self) -> usize {
        self.plus.edge_count() + self.minus.edge_count()
    }

    /// Incoming nonzero count of one destination neuron (its receptive
    /// field size).
    pub fn fan_in_of(&self, destination: usize) -> usize {
        self.plus.sources(destination).len() + self.minus.sources(destination).len()
    }

    /// Signed dense row reconstruction: the outgoing weights of `source`.
    pub fn dense_row(&self, source: usize) -> Vec<i8> {
        let mut row = vec![0i8; self.fan_out()];
        for (j, slot) in row.iter_mut().enumerate() {
            if self.plus.sources(j).binary_search(&(source as u32)).is_ok() {
                *slot = 1;
            } else if self.minus.sources(j).binary_search(&(source as u32)).is_ok() {
                *slot = -1;
            }
        }
        row
    }
}

/// A frozen network with weights in {-1, 0, +1}. Immutable and cheap to
/// share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct TernaryModel {
    spec: NetworkSpec,
    layers: Vec<TernaryLayer>,
}

impl TernaryModel {
    pub fn from_layers(spec: NetworkSpec, layers: Vec<TernaryLayer>) -> Result<Self> {
        let sizes = spec.layer_sizes();
        if layers.len() != sizes.len() - 1 {
            return Err(Error::Shape(format!(
                "expected {} layers, got {}",
                sizes.len() - 1,
                layers.len()
            )));
        }
        for (l, (layer, pair)) in layers.iter().zip(sizes.windows(2)).enumerate() {
            if layer.fan_in != pair[0] || layer.fan_out() != pair[1] {
                return Err(Error::Shape(format!(
                    "layer {l} is {}x{}, expected {}x{}",
                    layer.fan_in,
                    layer.fan_out(),
                    pair[0],
                    pair[1]
                )));
            }
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[TernaryLayer] {
        &self.layers
    }

    /// Total number of weight positions (the dense count `fan_in x fan_out`
    /// summed over layers).
    pub fn weight_positions(&self) -> usize {
        self.layers.iter().map(TernaryLayer::positions).sum()
    }

    /// Number of nonzero weights.
    pub fn nonzero_count(&self) -> usize {
        self.layers.iter().map(TernaryLayer::nonzero_count).sum()
    }

    /// Fraction of zero weights in [0, 1].
    pub fn sparsity(&self) -> f64 {
        let n = self.weight_positions();
        if n == 0 {
            return 0.0;
        }
        1.0 - self.nonzero_count() as f64 / n as f64
    }

    /// Multiplication-free forward pass for one input vector.
    pub fn infer(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.spec.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} features, model expects {}",
                input.len(),
                self.spec.input_dim()
            )));
        }
        let mut activations = input.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            next.clear();
            next.reserve(layer.fan_out());
            for j in 0..layer.fan_out() {
                next.push(neuron_output(
                    layer.plus.sources(j),
                    layer.minus.sources(j),
                    &activations,
                    layer.thresholds[j],
                ));
            }
            std::mem::swap(&mut activations, &mut next);
        }
        Ok(activations)
    }

    /// Batch variant of [`TernaryModel::infer`], one input per row.
    pub fn infer_batch(&self, inputs: &Mat) -> Result<Mat> {
        if inputs.cols() != self.spec.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} features, model expects {}",
                inputs.cols(),
                self.spec.input_dim()
            )));
        }
        let mut out = Mat::zeros(inputs.rows(), self.spec.output_dim());
        for r in 0..inputs.rows() {
            let y = self.infer(inputs.row(r))?;
            out.row_mut(r).copy_from_slice(&y);
        }
        Ok(out)
    }

    /// Expands back to a dense [`Network`]; exact inverse of [`freeze`].
    pub fn to_dense(&self) -> Network {
        let mut weights = Vec::with_capacity(self.layers.len());
        let mut thresholds = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mut w = Mat::zeros(layer.fan_in, layer.fan_out());
            for j in 0..layer.fan_out() {
                for &i in layer.plus.sources(j) {
                    *w.at_mut(i as usize, j) = 1.0;
                }
                for &i in layer.minus.sources(j) {
                    *w.at_mut(i as usize, j) = -1.0;
                }
            }
            weights.push(w);
            thresholds.push(layer.thresholds.iter().map(|&c| c as f64).collect());
        }
        Network::from_parts(self.spec.clone(), weights, thresholds)
            .expect("frozen model has consistent shapes")
    }
}

/// The inner neuron kernel: additions, subtractions, one threshold subtract
/// and a `tanh`. Takes index lists only; no weight value is reachable here.
#[inline]
fn neuron_output(plus: &[u32], minus: &[u32], activations: &[f64], threshold: f32) -> f64 {
    let mut sum = 0.0;
    for &i in plus {
        sum += activations[i as usize];
    }
    for &i in minus {
        sum -= activations[i as usize];
    }
    (sum - threshold as f64).tanh()
}

/// Converts a trained network whose weights are all exactly in {-1, 0, +1}
/// into the sign-split sparse form. Thresholds are narrowed to `f32`, the
/// storage width of the wire format. Any non-discrete weight is refused
/// with its coordinates.
pub fn freeze(net: &Network) -> Result<TernaryModel> {
    let mut layers = Vec::with_capacity(net.weights().len());
    for (l, (w, c)) in net.weights().iter().zip(net.thresholds()).enumerate() {
        let mut plus = SignedConnectivity::with_destinations(w.cols());
        let mut minus = SignedConnectivity::with_destinations(w.cols());
        for j in 0..w.cols() {
            for i in 0..w.rows() {
                let v = w.at(i, j);
                if v == 1.0 {
                    plus.indices.push(i as u32);
                } else if v == -1.0 {
                    minus.indices.push(i as u32);
                } else if v != 0.0 {
                    return Err(Error::NonDiscreteWeight {
                        layer: l,
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
            plus.offsets[j + 1] = plus.indices.len();
            minus.offsets[j + 1] = minus.indices.len();
        }
        layers.push(TernaryLayer {
            fan_in: w.rows(),
            plus,
            minus,
            thresholds: c.iter().map(|&v| v as f32).collect(),
        });
    }
    Ok(TernaryModel {
        spec: net.spec().clone(),
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_network;
    use crate::testutil::random_discrete_network;
    use crate::trainer::nearest_discrete;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn freeze_of_zero_matrix_has_empty_lists() {
        let spec = NetworkSpec::new(vec![3, 2, 1]).unwrap();
        let mut net = init_network(&spec, 1);
        for w in net.weights_mut() {
            w.fill(0.0);
        }
        let model = freeze(&net).unwrap();
        assert_eq!(model.nonzero_count(), 0);
        for layer in model.layers() {
            assert_eq!(layer.plus.edge_count(), 0);
            assert_eq!(layer.minus.edge_count(), 0);
        }
    }

    #[test]
    fn freeze_rejects_non_discrete_weights_with_coordinates() {
        let spec = NetworkSpec::new(vec![3, 2, 1]).unwrap();
        let mut net = init_network(&spec, 1);
        for w in net.weights_mut() {
            w.fill(0.0);
        }
        *net.weights_mut()[1].at_mut(1, 0) = 0.999;
        match freeze(&net) {
            Err(Error::NonDiscreteWeight {
                layer,
                row,
                col,
                value,
            }) => {
                assert_eq!((layer, row, col), (1, 1, 0));
                assert_eq!(value, 0.999);
            }
            other => panic!("expected NonDiscreteWeight, got {other:?}"),
        }
    }

    #[test]
    fn freeze_then_densify_round_trips_exactly() {
        for seed in 0..5 {
            let net = random_discrete_network(&[6, 5, 4, 3], seed);
            let model = freeze(&net).unwrap();
            let dense = model.to_dense();
            for (a, b) in net.weights().iter().zip(dense.weights()) {
                assert_eq!(a, b);
            }
            // thresholds round-trip through the f32 narrowing
            for (a, b) in net.thresholds().iter().zip(dense.thresholds()) {
                for (x, y) in a.iter().zip(b) {
                    assert_eq!(*x as f32, *y as f32);
                }
            }
            assert_eq!(freeze(&dense).unwrap(), model);
        }
    }

    #[test]
    fn index_lists_are_ascending_and_disjoint() {
        let net = random_discrete_network(&[20, 10, 5], 3);
        let model = freeze(&net).unwrap();
        for layer in model.layers() {
            for j in 0..layer.fan_out() {
                let p = layer.plus.sources(j);
                let m = layer.minus.sources(j);
                assert!(p.windows(2).all(|w| w[0] < w[1]));
                assert!(m.windows(2).all(|w| w[0] < w[1]));
                assert!(p.iter().all(|i| (*i as usize) < layer.fan_in()));
                assert!(m.iter().all(|i| (*i as usize) < layer.fan_in()));
                assert!(p.iter().all(|i| m.binary_search(i).is_err()));
            }
        }
    }

    #[test]
    fn infer_matches_dense_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for seed in 0..10 {
            let net = random_discrete_network(&[8, 7, 6, 3], seed);
            let model = freeze(&net).unwrap();
            let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y_sparse = model.infer(&x).unwrap();
            let (y_dense, _) = net.forward(&x).unwrap();
            for (a, b) in y_sparse.iter().zip(&y_dense) {
                assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn empty_connectivity_outputs_threshold_only() {
        let spec = NetworkSpec::new(vec![2, 2, 1]).unwrap();
        let mut net = init_network(&spec, 1);
        for w in net.weights_mut() {
            w.fill(0.0);
        }
        net.thresholds_mut()[0] = vec![0.25, -0.5];
        net.thresholds_mut()[1] = vec![0.75];
        let model = freeze(&net).unwrap();
        let y = model.infer(&[0.9, -0.9]).unwrap();
        assert!((y[0] - (-0.75f32 as f64).tanh()).abs() < 1e-12);
    }

    #[test]
    fn infer_rejects_dimension_mismatch() {
        let net = random_discrete_network(&[4, 3, 2], 0);
        let model = freeze(&net).unwrap();
        assert!(matches!(model.infer(&[1.0, 2.0]), Err(Error::Shape(_))));
    }

    /// A hand-built 2:2:1 ternary net solves XOR on bipolar inputs. The
    /// threshold assignment below was confirmed by exhaustively searching
    /// the grid {-2, -1.5, ..., 2} for the fixed +-1 weight pattern; the
    /// search runs here first so the hardcoded answer cannot go stale.
    #[test]
    fn hand_built_xor_net_classifies_all_corners() {
        let spec = NetworkSpec::new(vec![2, 2, 1]).unwrap();
        let cases = [
            ([1.0f64, 1.0], false),
            ([1.0, -1.0], true),
            ([-1.0, 1.0], true),
            ([-1.0, -1.0], false),
        ];
        let build = |c1: f64, c2: f64, c3: f64| {
            Network::from_parts(
                spec.clone(),
                vec![
                    Mat::from_vec(2, 2, vec![1.0, -1.0, -1.0, 1.0]),
                    Mat::from_vec(2, 1, vec![1.0, 1.0]),
                ],
                vec![vec![c1, c2], vec![c3]],
            )
            .unwrap()
        };
        let grid: Vec<f64> = (-4..=4).map(|i| i as f64 * 0.5).collect();

        // oracle: enumerate the grid and collect every solving assignment
        let mut solutions = Vec::new();
        for &c1 in &grid {
            for &c2 in &grid {
                for &c3 in &grid {
                    let model = freeze(&build(c1, c2, c3)).unwrap();
                    let solves = cases.iter().all(|(x, positive)| {
                        let y = model.infer(x).unwrap()[0];
                        (y > 0.0) == *positive
                    });
                    if solves {
                        solutions.push((c1, c2, c3));
                    }
                }
            }
        }
        assert!(
            solutions.contains(&(1.0, 1.0, -1.0)),
            "expected assignment missing; found {solutions:?}"
        );

        // the frozen hardcoded assignment classifies all four corners
        let model = freeze(&build(1.0, 1.0, -1.0)).unwrap();
        for (x, positive) in cases {
            let y = model.infer(&x).unwrap()[0];
            assert_eq!(y > 0.0, positive, "input {x:?}");
        }
    }

    /// Throughput must scale with the nonzero count, not the dense size.
    #[test]
    fn sparse_model_infers_faster_than_dense_twin() {
        use std::time::Instant;

        let sizes = [256, 512, 256, 10];
        let dense_net = {
            let spec = NetworkSpec::new(sizes.to_vec()).unwrap();
            let mut net = init_network(&spec, 5);
            let mut rng = ChaCha8Rng::seed_from_u64(50);
            for w in net.weights_mut() {
                for v in w.as_mut_slice() {
                    *v = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                }
            }
            net
        };
        let sparse_net = {
            let mut net = dense_net.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(51);
            for w in net.weights_mut() {
                for v in w.as_mut_slice() {
                    if rng.gen_bool(0.95) {
                        *v = 0.0;
                    }
                }
            }
            net
        };
        let dense = freeze(&dense_net).unwrap();
        let sparse = freeze(&sparse_net).unwrap();
        let x: Vec<f64> = (0..256).map(|i| ((i * 37) % 100) as f64 / 100.0 - 0.5).collect();

        let time = |model: &TernaryModel| {
            let reps = 200;
            let start = Instant::now();
            let mut sink = 0.0;
            for _ in 0..reps {
                sink += model.infer(&x).unwrap()[0];
            }
            std::hint::black_box(sink);
            start.elapsed()
        };

        // warm up, then measure
        time(&dense);
        time(&sparse);
        let dense_t = time(&dense);
        let sparse_t = time(&sparse);
        assert!(
            dense_t >= sparse_t * 2,
            "dense {dense_t:?} should be at least 2x slower than 95%-sparse {sparse_t:?}"
        );
    }

    #[test]
    fn nearest_discrete_agrees_with_freeze_domain() {
        // every value nearest_discrete can produce is freezable
        let spec = NetworkSpec::new(vec![1, 1, 1]).unwrap();
        for v in [-1.2, -0.5, 0.0, 0.49, 0.51, 2.0] {
            let q = nearest_discrete(v);
            let net = Network::from_parts(
                spec.clone(),
                vec![
                    Mat::from_vec(1, 1, vec![q]),
                    Mat::from_vec(1, 1, vec![0.0]),
                ],
                vec![vec![0.0], vec![0.0]],
            )
            .unwrap();
            assert!(freeze(&net).is_ok());
        }
    }
}
