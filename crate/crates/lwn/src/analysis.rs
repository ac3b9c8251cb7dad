//! Sparsity forensics over frozen models.
//!
//! Everything here follows the source-major row convention: row `i` of a
//! layer's weight matrix holds the outgoing weights of source neuron `i`.
//! An all-zero row in the first weight matrix therefore means an ignored
//! input feature; an all-zero row deeper in the stack means the matching
//! hidden neuron is dropped (it can be deleted without changing any
//! output). Columns are destinations, so all-zero columns are neurons that
//! receive nothing and emit a constant `tanh(-c)`.

use std::fmt;

use crate::ternary::{TernaryLayer, TernaryModel};

/// Per-weight-layer sparsity statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStats {
    pub positions: usize,
    pub nonzero: usize,
    /// Sources whose outgoing row is entirely zero.
    pub all_zero_rows: usize,
    /// Destinations whose incoming column is entirely zero.
    pub all_zero_cols: usize,
    /// Mean receptive-field size over destinations: nonzeros / fan_out.
    pub avg_fan_in: f64,
    pub max_fan_in: usize,
    /// Largest outgoing nonzero count over sources (the complementary view
    /// of `max_fan_in`; both readings of "fan" are reported).
    pub max_fan_out: usize,
    /// `fan_in_histogram[k]` = number of destinations with exactly `k`
    /// nonzero incoming weights.
    pub fan_in_histogram: Vec<usize>,
}

/// Whole-model sparsity report.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityReport {
    /// Total weight positions N.
    pub total_positions: usize,
    /// Nonzero weights.
    pub nonzero: usize,
    /// Percentage of zero weights, in [0, 100].
    pub zero_pct: f64,
    pub per_layer: Vec<LayerStats>,
    /// Input features with an all-zero outgoing row.
    pub ignored_inputs: Vec<usize>,
    /// Per hidden layer: neurons whose outgoing row is all zero.
    pub dropped_neurons: Vec<Vec<usize>>,
    /// Functioning neuron count over hidden and output layers.
    pub functioning: usize,
    /// Nonzero weights per functioning neuron; 0 when nothing functions.
    pub weights_per_functioning_neuron: f64,
}

fn zero_row_sources(layer: &TernaryLayer) -> Vec<usize> {
    let mut has_out = vec![false; layer.fan_in()];
    for j in 0..layer.fan_out() {
        for &i in layer.plus.sources(j) {
            has_out[i as usize] = true;
        }
        for &i in layer.minus.sources(j) {
            has_out[i as usize] = true;
        }
    }
    has_out
        .iter()
        .enumerate()
        .filter_map(|(i, &h)| (!h).then_some(i))
        .collect()
}

fn zero_col_destinations(layer: &TernaryLayer) -> Vec<usize> {
    (0..layer.fan_out())
        .filter(|&j| layer.fan_in_of(j) == 0)
        .collect()
}

/// Per-layer index sets of functioning neurons. Layer `l` of the result
/// corresponds to weight layer `l`'s destinations, i.e. hidden layers first,
/// output layer last. A hidden neuron functions when it has at least one
/// nonzero incoming and one nonzero outgoing weight; an output neuron only
/// needs a nonzero incoming weight. Input features are not neurons and are
/// not counted.
pub fn functioning_neurons(model: &TernaryModel) -> Vec<Vec<usize>> {
    let layers = model.layers();
    let mut result = Vec::with_capacity(layers.len());
    for (l, layer) in layers.iter().enumerate() {
        let incoming: Vec<bool> = (0..layer.fan_out())
            .map(|j| layer.fan_in_of(j) > 0)
            .collect();
        let functioning: Vec<usize> = if l + 1 < layers.len() {
            let outgoing_dead = zero_row_sources(&layers[l + 1]);
            let mut has_out = vec![true; layer.fan_out()];
            for i in outgoing_dead {
                has_out[i] = false;
            }
            (0..layer.fan_out())
                .filter(|&j| incoming[j] && has_out[j])
                .collect()
        } else {
            (0..layer.fan_out()).filter(|&j| incoming[j]).collect()
        };
        result.push(functioning);
    }
    result
}

/// Computes every sparsity statistic of a frozen model.
pub fn analyze(model: &TernaryModel) -> SparsityReport {
    let layers = model.layers();
    let mut per_layer = Vec::with_capacity(layers.len());
    for layer in layers {
        let fan_ins: Vec<usize> = (0..layer.fan_out()).map(|j| layer.fan_in_of(j)).collect();
        let max_fan_in = fan_ins.iter().copied().max().unwrap_or(0);
        let mut histogram = vec![0usize; max_fan_in + 1];
        for &f in &fan_ins {
            histogram[f] += 1;
        }
        let mut outgoing = vec![0usize; layer.fan_in()];
        for j in 0..layer.fan_out() {
            for &i in layer.plus.sources(j) {
                outgoing[i as usize] += 1;
            }
            for &i in layer.minus.sources(j) {
                outgoing[i as usize] += 1;
            }
        }
        per_layer.push(LayerStats {
            positions: layer.positions(),
            nonzero: layer.nonzero_count(),
            all_zero_rows: zero_row_sources(layer).len(),
            all_zero_cols: zero_col_destinations(layer).len(),
            avg_fan_in: layer.nonzero_count() as f64 / layer.fan_out() as f64,
            max_fan_in,
            max_fan_out: outgoing.iter().copied().max().unwrap_or(0),
            fan_in_histogram: histogram,
        });
    }

    let total_positions = model.weight_positions();
    let nonzero = model.nonzero_count();
    let ignored_inputs = zero_row_sources(&layers[0]);
    let dropped_neurons: Vec<Vec<usize>> = layers[1..]
        .iter()
        .map(zero_row_sources)
        .collect();
    let functioning: usize = functioning_neurons(model).iter().map(Vec::len).sum();

    SparsityReport {
        total_positions,
        nonzero,
        zero_pct: 100.0 * (1.0 - nonzero as f64 / total_positions as f64),
        per_layer,
        ignored_inputs,
        dropped_neurons,
        functioning,
        weights_per_functioning_neuron: if functioning == 0 {
            0.0
        } else {
            nonzero as f64 / functioning as f64
        },
    }
}

/// Removes every dropped hidden neuron reported by [`analyze`] (one pass,
/// no cascade). The pruned model produces bit-identical outputs: a dropped
/// neuron feeds nothing, so deleting its row and column removes no addend
/// from any downstream sum.
pub fn prune_dropped(model: &TernaryModel) -> TernaryModel {
    use crate::network::{Network, NetworkSpec};

    let report = analyze(model);
    let dense = model.to_dense();
    let sizes = dense.spec().layer_sizes();

    // keep[l] = surviving neuron indices of layer l (including input/output)
    let mut keep: Vec<Vec<usize>> = Vec::with_capacity(sizes.len());
    keep.push((0..sizes[0]).collect());
    for (h, size) in sizes[1..sizes.len() - 1].iter().enumerate() {
        let dropped = &report.dropped_neurons[h];
        let mut kept: Vec<usize> = (0..*size).filter(|i| !dropped.contains(i)).collect();
        if kept.is_empty() {
            // a layer cannot be emptied; one dead neuron keeps the chain
            // intact and still contributes nothing
            kept.push(0);
        }
        keep.push(kept);
    }
    keep.push((0..sizes[sizes.len() - 1]).collect());

    let new_sizes: Vec<usize> = keep.iter().map(Vec::len).collect();
    let spec = NetworkSpec::new(new_sizes).expect("pruning keeps at least one neuron per layer");

    let mut weights = Vec::new();
    let mut thresholds = Vec::new();
    for l in 0..sizes.len() - 1 {
        let old = &dense.weights()[l];
        let mut w = crate::linalg::Mat::zeros(keep[l].len(), keep[l + 1].len());
        for (ni, &oi) in keep[l].iter().enumerate() {
            for (nj, &oj) in keep[l + 1].iter().enumerate() {
                *w.at_mut(ni, nj) = old.at(oi, oj);
            }
        }
        weights.push(w);
        thresholds.push(
            keep[l + 1]
                .iter()
                .map(|&j| dense.thresholds()[l][j])
                .collect(),
        );
    }
    let net = Network::from_parts(spec, weights, thresholds).expect("pruned shapes agree");
    crate::ternary::freeze(&net).expect("pruning preserves discreteness")
}

impl fmt::Display for SparsityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "total_positions = {}", self.total_positions)?;
        writeln!(f, "nonzero = {}", self.nonzero)?;
        writeln!(f, "zero_pct = {:.1}", self.zero_pct)?;
        writeln!(f, "functioning_neurons = {}", self.functioning)?;
        writeln!(
            f,
            "weights_per_functioning_neuron = {:.2}",
            self.weights_per_functioning_neuron
        )?;
        writeln!(f, "ignored_inputs = {}", self.ignored_inputs.len())?;
        if !self.ignored_inputs.is_empty() {
            writeln!(f, "ignored_input_indices = {:?}", self.ignored_inputs)?;
        }
        for (h, dropped) in self.dropped_neurons.iter().enumerate() {
            writeln!(f, "dropped_neurons[hidden {}] = {}", h + 1, dropped.len())?;
        }
        writeln!(
            f,
            "layer\tpositions\tnonzero\tzero_rows\tzero_cols\tavg_fan_in\tmax_fan_in\tmax_fan_out"
        )?;
        for (l, s) in self.per_layer.iter().enumerate() {
            writeln!(
                f,
                "{}\t{}\t{}\t{}\t{}\t{:.2}\t{}\t{}",
                l,
                s.positions,
                s.nonzero,
                s.all_zero_rows,
                s.all_zero_cols,
                s.avg_fan_in,
                s.max_fan_in,
                s.max_fan_out
            )?;
        }
        Ok(())
    }
}
