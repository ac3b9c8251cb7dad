//! Dataset ingestion and preparation.
//!
//! Loaders produce a [`DataSet`] with one-hot targets at +-0.9 (the working
//! range of `tanh` outputs; exact +-1 would demand infinite pre-activations).
//! Continuous tabular features stay raw at load time; standardization
//! statistics are fitted on the training split only and replayed on the
//! other splits, so nothing leaks. MNIST-style pixel data stays in [0, 1]
//! as delivered.

pub mod cache;
pub mod mnist;
pub mod resample;
pub mod synth;
pub mod tabular;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Target value for the labelled class.
pub const TARGET_HIGH: f64 = 0.9;
/// Target value for every other class.
pub const TARGET_LOW: f64 = -0.9;

/// What a feature column holds after preprocessing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Continuous,
    /// Two-valued column mapped to {-1, +1}.
    Binary,
    /// One expanded column of a categorical feature, in {-1, +1}.
    CategoricalExpanded,
}

/// Feature matrix plus labels, targets and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub x: Mat,
    /// One-hot targets at +-0.9, one row per example.
    pub y: Mat,
    /// Class index per example.
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub feature_kinds: Vec<FeatureKind>,
    /// Ordered record of every transform applied.
    pub provenance: Vec<String>,
}

/// Builds the +-0.9 one-hot target matrix.
pub fn one_hot_targets(labels: &[usize], n_classes: usize) -> Mat {
    let mut y = Mat::zeros(labels.len(), n_classes);
    for (r, &label) in labels.iter().enumerate() {
        for (c, v) in y.row_mut(r).iter_mut().enumerate() {
            *v = if c == label { TARGET_HIGH } else { TARGET_LOW };
        }
    }
    y
}

impl DataSet {
    pub fn from_features(
        x: Mat,
        labels: Vec<usize>,
        n_classes: usize,
        feature_kinds: Vec<FeatureKind>,
        provenance: Vec<String>,
    ) -> Result<Self> {
        if labels.len() != x.rows() {
            return Err(Error::Data(format!(
                "{} labels for {} examples",
                labels.len(),
                x.rows()
            )));
        }
        if feature_kinds.len() != x.cols() {
            return Err(Error::Data(format!(
                "{} feature kinds for {} columns",
                feature_kinds.len(),
                x.cols()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Data(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        let y = one_hot_targets(&labels, n_classes);
        Ok(Self {
            x,
            y,
            labels,
            n_classes,
            feature_kinds,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// Examples per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// New dataset keeping `indices` in order.
    pub fn subset(&self, indices: &[usize]) -> DataSet {
        DataSet {
            x: self.x.select_rows(indices),
            y: self.y.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            feature_kinds: self.feature_kinds.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// First `n` examples (handy for desk-scale subsets).
    pub fn take(&self, n: usize) -> DataSet {
        let indices: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&indices)
    }

    pub fn push_provenance(&mut self, entry: impl Into<String>) {
        self.provenance.push(entry.into());
    }
}

/// Index partition of a stratified split: per-class proportions preserved
/// within rounding, deterministic for a seed, disjoint, covering.
pub fn stratified_split_indices(
    labels: &[usize],
    n_classes: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::Config(format!(
            "train_fraction {train_fraction} outside [0, 1]"
        )));
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        per_class[l].push(i);
    }
    if let Some(c) = per_class.iter().position(|v| v.len() < 2) {
        return Err(Error::Data(format!(
            "class {c} has {} examples; stratified splitting needs at least 2",
            per_class[c].len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut indices in per_class {
        indices.shuffle(&mut rng);
        let n = indices.len();
        let take = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
        train.extend_from_slice(&indices[..take]);
        test.extend_from_slice(&indices[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified 70/30-style split into (train, test).
pub fn stratified_split(
    ds: &DataSet,
    train_fraction: f64,
    seed: u64,
) -> Result<(DataSet, DataSet)> {
    let (train_idx, test_idx) =
        stratified_split_indices(&ds.labels, ds.n_classes, train_fraction, seed)?;
    let mut train = ds.subset(&train_idx);
    let mut test = ds.subset(&test_idx);
    let entry = format!("stratified_split(train_fraction={train_fraction}, seed={seed})");
    train.push_provenance(format!("{entry} [train]"));
    test.push_provenance(format!("{entry} [test]"));
    Ok((train, test))
}

/// Per-column standardization statistics, fitted on one dataset (the
/// training split) and replayed on any other.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessor {
    /// `(mean, std)` per column; `None` for non-continuous columns.
    stats: Vec<Option<(f64, f64)>>,
}

impl Preprocessor {
    /// Fits mean and (population) standard deviation of every continuous
    /// column.
    pub fn fit(ds: &DataSet) -> Preprocessor {
        let n = ds.len().max(1) as f64;
        let stats = (0..ds.dim())
            .map(|c| {
                if ds.feature_kinds[c] != FeatureKind::Continuous {
                    return None;
                }
                let mut sum = 0.0;
                for r in 0..ds.len() {
                    sum += ds.x.at(r, c);
                }
                let mean = sum / n;
                let mut var = 0.0;
                for r in 0..ds.len() {
                    let d = ds.x.at(r, c) - mean;
                    var += d * d;
                }
                Some((mean, (var / n).sqrt()))
            })
            .collect();
        Preprocessor { stats }
    }

    /// Standardizes continuous columns with the fitted statistics, then
    /// clips to [-1, 1]. Zero-variance columns map to 0.
    pub fn apply(&self, ds: &mut DataSet) -> Result<()> {
        if self.stats.len() != ds.dim() {
            return Err(Error::Shape(format!(
                "preprocessor fitted on {} columns, dataset has {}",
                self.stats.len(),
                ds.dim()
            )));
        }
        for (c, stat) in self.stats.iter().enumerate() {
            if let Some((mean, std)) = stat {
                for r in 0..ds.x.rows() {
                    let v = ds.x.at(r, c);
                    let z = if *std == 0.0 { 0.0 } else { (v - mean) / std };
                    *ds.x.at_mut(r, c) = z.clamp(-1.0, 1.0);
                }
            }
        }
        ds.push_provenance("standardize(train_stats) + clip[-1,1]");
        Ok(())
    }
}

/// Fits on `train`, applies to `train` and every dataset in `others`.
pub fn standardize_with_train_stats(
    train: &mut DataSet,
    others: &mut [&mut DataSet],
) -> Result<Preprocessor> {
    let prep = Preprocessor::fit(train);
    prep.apply(train)?;
    for ds in others {
        prep.apply(ds)?;
    }
    Ok(prep)
}
