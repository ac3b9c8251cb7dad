//! Class-imbalance resamplers for binary training sets.
//!
//! All three operate on the training partition only; the caller keeps the
//! test split out of reach. Each returns a new balanced dataset and leaves
//! its input untouched.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Mat;

use super::{one_hot_targets, DataSet};

struct BinarySplit {
    minority_class: usize,
    minority: Vec<usize>,
    majority: Vec<usize>,
}

fn binary_split(ds: &DataSet) -> Result<BinarySplit> {
    if ds.n_classes != 2 {
        return Err(Error::Contract(format!(
            "resampling requires binary classification, got {} classes",
            ds.n_classes
        )));
    }
    let counts = ds.class_counts();
    let minority_class = if counts[0] <= counts[1] { 0 } else { 1 };
    let mut minority = Vec::new();
    let mut majority = Vec::new();
    for (i, &l) in ds.labels.iter().enumerate() {
        if l == minority_class {
            minority.push(i);
        } else {
            majority.push(i);
        }
    }
    Ok(BinarySplit {
        minority_class,
        minority,
        majority,
    })
}

/// Subsamples the majority class without replacement down to the minority
/// count. A dataset that is already balanced comes back unchanged.
pub fn undersample(train: &DataSet, seed: u64) -> Result<DataSet> {
    let split = binary_split(train)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut majority = split.majority;
    majority.shuffle(&mut rng);
    majority.truncate(split.minority.len());

    let mut keep: Vec<usize> = split.minority;
    keep.extend(majority);
    keep.sort_unstable();
    let mut out = train.subset(&keep);
    out.push_provenance(format!("undersample(seed={seed})"));
    Ok(out)
}

/// Repeats minority examples (sampling with replacement) until both classes
/// have the majority count. Every appended row is an exact copy of an
/// original minority row.
pub fn oversample_repeat(train: &DataSet, seed: u64) -> Result<DataSet> {
    let split = binary_split(train)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let needed = split.majority.len() - split.minority.len();

    let mut x = train.x.clone();
    let mut labels = train.labels.clone();
    if needed > 0 {
        let mut extra = Mat::zeros(needed, train.dim());
        for r in 0..needed {
            let src = split.minority[rng.gen_range(0..split.minority.len())];
            extra.row_mut(r).copy_from_slice(train.x.row(src));
            labels.push(split.minority_class);
        }
        x = x.vstack(&extra);
    }
    let y = one_hot_targets(&labels, 2);
    let mut out = DataSet {
        x,
        y,
        labels,
        n_classes: 2,
        feature_kinds: train.feature_kinds.clone(),
        provenance: train.provenance.clone(),
    };
    out.push_provenance(format!("oversample_repeat(seed={seed})"));
    Ok(out)
}

/// Synthetic minority oversampling: new points interpolate between a
/// minority example and one of its `k` nearest minority neighbours,
/// `x_new = x + u * (x_nn - x)` with `u ~ Uniform(0, 1)`. `k` silently
/// clamps to `minority_size - 1`; a minority of one cannot interpolate and
/// is an error.
pub fn smote(train: &DataSet, k: usize, seed: u64) -> Result<DataSet> {
    if k == 0 {
        return Err(Error::Config("smote requires k >= 1".into()));
    }
    let split = binary_split(train)?;
    let m = split.minority.len();
    if m < 2 {
        return Err(Error::Data(format!(
            "smote needs at least 2 minority examples, got {m}"
        )));
    }
    let k = k.min(m - 1);
    let needed = split.majority.len() - m;

    // k nearest minority neighbours per minority point (Euclidean;
    // deterministic tie-break on index)
    let neighbours: Vec<Vec<usize>> = (0..m)
        .map(|a| {
            let mut dists: Vec<(f64, usize)> = (0..m)
                .filter(|&b| b != a)
                .map(|b| {
                    let xa = train.x.row(split.minority[a]);
                    let xb = train.x.row(split.minority[b]);
                    let d2: f64 = xa
                        .iter()
                        .zip(xb)
                        .map(|(p, q)| (p - q) * (p - q))
                        .sum();
                    (d2, b)
                })
                .collect();
            dists.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
            dists.into_iter().take(k).map(|(_, b)| b).collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = train.x.clone();
    let mut labels = train.labels.clone();
    if needed > 0 {
        let mut extra = Mat::zeros(needed, train.dim());
        for s in 0..needed {
            let a = s % m;
            let nn = neighbours[a][rng.gen_range(0..neighbours[a].len())];
            let u: f64 = rng.gen();
            let base = train.x.row(split.minority[a]);
            let towards = train.x.row(split.minority[nn]);
            for (c, v) in extra.row_mut(s).iter_mut().enumerate() {
                *v = base[c] + u * (towards[c] - base[c]);
            }
            labels.push(split.minority_class);
        }
        x = x.vstack(&extra);
    }
    let y = one_hot_targets(&labels, 2);
    let mut out = DataSet {
        x,
        y,
        labels,
        n_classes: 2,
        feature_kinds: train.feature_kinds.clone(),
        provenance: train.provenance.clone(),
    };
    out.push_provenance(format!("smote(k={k}, seed={seed})"));
    Ok(out)
}
