//! Classification metrics: confusion matrices, accuracy, precision, recall,
//! F1 and G-mean. Class prediction is winner-take-all over the output
//! neurons with ties broken toward the lower class index.

use crate::datapipe::DataSet;
use crate::error::{Error, Result};
use crate::network::Network;
use crate::ternary::TernaryModel;

/// Index of the largest output; ties resolve to the lower index.
#[inline]
pub fn argmax(outputs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in outputs.iter().enumerate().skip(1) {
        if v > outputs[best] {
            best = i;
        }
    }
    best
}

/// Counts indexed `[true class][predicted class]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        Self {
            n_classes,
            counts: vec![0; n_classes * n_classes],
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>, n_classes: usize) -> Self {
        let mut cm = Self::new(n_classes);
        for (truth, predicted) in pairs {
            cm.record(truth, predicted);
        }
        cm
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.n_classes + predicted] += 1;
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    #[inline]
    pub fn count(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.n_classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Fraction of correctly classified examples, any class count.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let correct: u64 = (0..self.n_classes).map(|c| self.count(c, c)).sum();
        correct as f64 / total as f64
    }

    /// 1 - accuracy.
    pub fn misclassification(&self) -> f64 {
        1.0 - self.accuracy()
    }

    /// Multiplies every count by an integer factor (test aid; scores are
    /// scale-invariant).
    pub fn scaled(&self, factor: u64) -> ConfusionMatrix {
        ConfusionMatrix {
            n_classes: self.n_classes,
            counts: self.counts.iter().map(|c| c * factor).collect(),
        }
    }
}

/// Binary scores around a designated positive class. Zero-denominator
/// conventions: precision/recall are 0 when undefined, F1 is 0 when
/// precision + recall is 0, G-mean is 0 when either class recall is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub g_mean: f64,
}

/// Computes binary scores from a 2x2 confusion matrix.
pub fn scores(cm: &ConfusionMatrix, positive_class: usize) -> Result<Scores> {
    if cm.n_classes != 2 {
        return Err(Error::Contract(format!(
            "precision/recall/F1/G-mean need a binary confusion matrix, got {} classes",
            cm.n_classes
        )));
    }
    if positive_class > 1 {
        return Err(Error::Contract(format!(
            "positive class {positive_class} out of range"
        )));
    }
    let neg = 1 - positive_class;
    let tp = cm.count(positive_class, positive_class) as f64;
    let fn_ = cm.count(positive_class, neg) as f64;
    let fp = cm.count(neg, positive_class) as f64;
    let tn = cm.count(neg, neg) as f64;

    let precision = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
    let recall = if tp + fn_ == 0.0 { 0.0 } else { tp / (tp + fn_) };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let tnr = if tn + fp == 0.0 { 0.0 } else { tn / (tn + fp) };
    Ok(Scores {
        accuracy: cm.accuracy(),
        precision,
        recall,
        f1,
        g_mean: (recall * tnr).sqrt(),
    })
}

fn check_dims(output_dim: usize, ds: &DataSet) -> Result<()> {
    if output_dim != ds.n_classes {
        return Err(Error::Shape(format!(
            "model emits {output_dim} outputs, dataset has {} classes",
            ds.n_classes
        )));
    }
    Ok(())
}

/// Evaluates a frozen ternary model over a dataset.
pub fn evaluate(model: &TernaryModel, ds: &DataSet) -> Result<ConfusionMatrix> {
    check_dims(model.spec().output_dim(), ds)?;
    let outputs = model.infer_batch(&ds.x)?;
    let mut cm = ConfusionMatrix::new(ds.n_classes);
    for (r, &truth) in ds.labels.iter().enumerate() {
        cm.record(truth, argmax(outputs.row(r)));
    }
    Ok(cm)
}

/// Evaluates a dense network over a dataset (used during training, before
/// freezing).
pub fn evaluate_network(net: &Network, ds: &DataSet) -> Result<ConfusionMatrix> {
    check_dims(net.spec().output_dim(), ds)?;
    let (outputs, _) = net.forward_batch(&ds.x)?;
    let mut cm = ConfusionMatrix::new(ds.n_classes);
    for (r, &truth) in ds.labels.iter().enumerate() {
        cm.record(truth, argmax(outputs.row(r)));
    }
    Ok(cm)
}

impl std::fmt::Display for Scores {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "accuracy = {:.3}", self.accuracy)?;
        writeln!(f, "precision = {:.3}", self.precision)?;
        writeln!(f, "recall = {:.3}", self.recall)?;
        writeln!(f, "f1 = {:.3}", self.f1)?;
        write!(f, "g_mean = {:.3}", self.g_mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapipe::synth;
    use crate::testutil::random_discrete_network;
    use crate::ternary::freeze;

    fn cm_from(tp: u64, fn_: u64, fp: u64, tn: u64) -> ConfusionMatrix {
        // positive class = 1
        let mut cm = ConfusionMatrix::new(2);
        for _ in 0..tp {
            cm.record(1, 1);
        }
        for _ in 0..fn_ {
            cm.record(1, 0);
        }
        for _ in 0..fp {
            cm.record(0, 1);
        }
        for _ in 0..tn {
            cm.record(0, 0);
        }
        cm
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.3, 0.3, 0.1]), 0);
        assert_eq!(argmax(&[0.1, 0.5, 0.5]), 1);
        assert_eq!(argmax(&[-1.0]), 0);
    }

    #[test]
    fn degenerate_all_negative_matrix_uses_documented_conventions() {
        let cm = cm_from(0, 0, 0, 10);
        let s = scores(&cm, 1).unwrap();
        assert_eq!(s.precision, 0.0);
        assert_eq!(s.recall, 0.0);
        assert_eq!(s.f1, 0.0);
        assert_eq!(s.g_mean, 0.0);
        assert_eq!(s.accuracy, 1.0);
    }

    #[test]
    fn fraud_shaped_counts_match_hand_arithmetic() {
        let cm = cm_from(81, 19, 17, 85_283);
        let s = scores(&cm, 1).unwrap();
        assert!((s.precision - 81.0 / 98.0).abs() < 1e-12);
        assert!((s.recall - 0.81).abs() < 1e-12);
        let p = 81.0 / 98.0;
        let r = 0.81;
        assert!((s.f1 - 2.0 * p * r / (p + r)).abs() < 1e-12);
        // three-decimal renderings used in reports
        assert_eq!(format!("{:.3}", s.precision), "0.827");
        assert_eq!(format!("{:.3}", s.recall), "0.810");
        assert_eq!(format!("{:.3}", s.f1), "0.818");
    }

    #[test]
    fn perfect_binary_matrix_scores_one_everywhere() {
        let cm = cm_from(50, 0, 0, 50);
        let s = scores(&cm, 1).unwrap();
        assert_eq!(
            (s.accuracy, s.precision, s.recall, s.f1, s.g_mean),
            (1.0, 1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn scores_are_scale_invariant() {
        let cm = cm_from(13, 5, 7, 100);
        let s1 = scores(&cm, 1).unwrap();
        let s2 = scores(&cm.scaled(17), 1).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn g_mean_zero_iff_a_class_has_zero_recall() {
        let dead_positive = cm_from(0, 10, 3, 90);
        assert_eq!(scores(&dead_positive, 1).unwrap().g_mean, 0.0);
        let dead_negative = cm_from(10, 0, 90, 0);
        assert_eq!(scores(&dead_negative, 1).unwrap().g_mean, 0.0);
        let alive = cm_from(9, 1, 10, 80);
        assert!(scores(&alive, 1).unwrap().g_mean > 0.0);
    }

    #[test]
    fn scores_reject_multiclass_matrices() {
        let cm = ConfusionMatrix::new(3);
        assert!(scores(&cm, 0).is_err());
    }

    #[test]
    fn evaluate_matches_a_scalar_loop() {
        let net = random_discrete_network(&[5, 8, 3], 3);
        let model = freeze(&net).unwrap();
        let ds = synth::blobs(30, 3, 5, 1.5, 8);
        let cm = evaluate(&model, &ds).unwrap();

        let mut expected = ConfusionMatrix::new(3);
        for r in 0..ds.len() {
            let y = model.infer(ds.x.row(r)).unwrap();
            let mut best = 0;
            for k in 1..y.len() {
                if y[k] > y[best] {
                    best = k;
                }
            }
            expected.record(ds.labels[r], best);
        }
        assert_eq!(cm, expected);
        assert_eq!(cm.total() as usize, ds.len());
    }

    #[test]
    fn constant_model_fills_a_single_column() {
        // all-zero weights: outputs depend only on thresholds, so every
        // prediction is the same class
        let spec = crate::network::NetworkSpec::new(vec![4, 3, 3]).unwrap();
        let mut net = crate::network::init_network(&spec, 2);
        for w in net.weights_mut() {
            w.fill(0.0);
        }
        let model = freeze(&net).unwrap();
        let ds = synth::blobs(20, 3, 4, 1.0, 5);
        let cm = evaluate(&model, &ds).unwrap();
        let predicted_classes: Vec<usize> = (0..3)
            .filter(|&p| (0..3).any(|t| cm.count(t, p) > 0))
            .collect();
        assert_eq!(predicted_classes.len(), 1);
    }

    #[test]
    fn evaluate_rejects_dimension_mismatch() {
        let net = random_discrete_network(&[5, 8, 4], 3);
        let model = freeze(&net).unwrap();
        let ds = synth::blobs(10, 3, 5, 1.0, 8); // 3 classes vs 4 outputs
        assert!(matches!(evaluate(&model, &ds), Err(Error::Shape(_))));
    }
}
