//! Training regimen that drives weights into {-1, 0, +1}.
//!
//! Every epoch interleaves two descent objectives over mini-batches:
//!
//! 1. error reduction: a momentum-SGD step on the squared output error;
//! 2. weight discretization: a drift `w <- w - eta_d * 2 (w - Q(w))` pulling
//!    each weight toward its nearest discrete value `Q(w) in {-1, 0, +1}`
//!    (thresholds are exempt and stay free reals).
//!
//! After the batches, the black-hole pass snaps any weight within radius
//! `r` of an attractor exactly onto it. Both `eta_d` and `r` ramp up as the
//! training error falls: `scale(e) = clamp(1 - E0(e)/E_ref, 0, 1)` with
//! `E_ref` the first epoch's error, so early training is pure error descent
//! and discretization pressure grows only once the error shrinks.
//!
//! Once almost all weights are discrete, [`try_round_and_finalize`] rounds
//! every weight, keeps the result if validation accuracy survives the
//! rounding, and otherwise rolls back bit-exactly and training resumes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datapipe::DataSet;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::metrics::evaluate_network;
use crate::network::{init_network, Gradients, Network, NetworkSpec};
use crate::ternary::{freeze, TernaryModel};

/// Nearest value in {-1, 0, +1}. Ties at |w| = 0.5 resolve toward 0, and
/// anything beyond the outer attractors clamps to the nearest of them.
#[inline]
pub fn nearest_discrete(w: f64) -> f64 {
    if w > 0.5 {
        1.0
    } else if w < -0.5 {
        -1.0
    } else {
        0.0
    }
}

/// Gradient of the per-weight discretization penalty `(w - Q(w))^2`.
#[inline]
pub fn discretization_gradient(w: f64) -> f64 {
    2.0 * (w - nearest_discrete(w))
}

/// One drift step of the weight-discretization objective. A contraction
/// toward `Q(w)` whenever `2 * eta <= 1`.
#[inline]
pub fn drift_value(w: f64, eta: f64) -> f64 {
    w - eta * discretization_gradient(w)
}

fn default_learning_rate() -> f64 {
    0.01
}
fn default_momentum() -> f64 {
    0.9
}
fn default_batch_size() -> usize {
    32
}
fn default_max_epochs() -> usize {
    1000
}
fn default_discretization_rate() -> f64 {
    0.05
}
fn default_blackhole_radius() -> f64 {
    0.1
}
fn default_round_trigger() -> f64 {
    0.01
}
fn default_discrete_tolerance() -> f64 {
    1e-3
}
fn default_acceptance_drop() -> f64 {
    0.25
}
fn default_eval_period() -> usize {
    10
}
fn default_threads() -> usize {
    1
}

/// All training knobs. Defaults keep discretization deliberately slow
/// relative to error descent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    /// Peak drift rate of the discretization step (`eta_d` at full ramp).
    #[serde(default = "default_discretization_rate")]
    pub discretization_rate_max: f64,
    /// Peak black-hole radius. Must stay below 0.5 so a snap can never move
    /// a weight across the midpoint between two attractors.
    #[serde(default = "default_blackhole_radius")]
    pub blackhole_radius_max: f64,
    /// Rounding is attempted once at most this fraction of weights is
    /// non-discrete.
    #[serde(default = "default_round_trigger")]
    pub round_trigger_fraction: f64,
    /// A weight counts as discrete when `|w - Q(w)|` is at most this.
    #[serde(default = "default_discrete_tolerance")]
    pub discrete_tolerance: f64,
    /// Acceptable validation-accuracy drop (percentage points) when rounding.
    #[serde(default = "default_acceptance_drop")]
    pub acceptance_drop: f64,
    /// Minimum number of epochs between rounding attempts.
    #[serde(default = "default_eval_period")]
    pub eval_period: usize,
    pub seed: u64,
    /// Data-parallel chunks per batch. Gradients are reduced in fixed chunk
    /// order, so runs are reproducible for a given (seed, threads) pair.
    #[serde(default = "default_threads")]
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: default_learning_rate(),
            momentum: default_momentum(),
            batch_size: default_batch_size(),
            max_epochs: default_max_epochs(),
            discretization_rate_max: default_discretization_rate(),
            blackhole_radius_max: default_blackhole_radius(),
            round_trigger_fraction: default_round_trigger(),
            discrete_tolerance: default_discrete_tolerance(),
            acceptance_drop: default_acceptance_drop(),
            eval_period: default_eval_period(),
            seed: 0,
            threads: default_threads(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.discretization_rate_max < 0.0 {
            return Err(Error::Config(
                "discretization_rate_max must be non-negative".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.blackhole_radius_max) {
            return Err(Error::Config(
                "blackhole_radius_max must lie in [0, 0.5)".into(),
            ));
        }
        if !(self.round_trigger_fraction > 0.0 && self.round_trigger_fraction <= 1.0) {
            return Err(Error::Config(
                "round_trigger_fraction must lie in (0, 1]".into(),
            ));
        }
        if self.discrete_tolerance <= 0.0 {
            return Err(Error::Config("discrete_tolerance must be positive".into()));
        }
        // The tolerance must sit inside the black hole, except in the
        // degenerate disabled case (radius 0).
        if self.blackhole_radius_max > 0.0 && self.discrete_tolerance >= self.blackhole_radius_max
        {
            return Err(Error::Config(
                "discrete_tolerance must be smaller than blackhole_radius_max".into(),
            ));
        }
        if self.acceptance_drop < 0.0 {
            return Err(Error::Config("acceptance_drop must be non-negative".into()));
        }
        if self.eval_period == 0 {
            return Err(Error::Config("eval_period must be positive".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be positive".into()));
        }
        Ok(())
    }
}

/// Where a training run currently stands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainStatus {
    Running,
    /// All weights were rounded to {-1, 0, +1} and validation accuracy held.
    RoundedAccepted,
    /// The epoch budget ran out before an accepted rounding.
    Exhausted,
}

#[derive(Debug, Clone)]
struct ParamSnapshot {
    weights: Vec<Mat>,
    thresholds: Vec<Vec<f64>>,
}

impl ParamSnapshot {
    fn of(net: &Network) -> Self {
        Self {
            weights: net.weights().to_vec(),
            thresholds: net.thresholds().to_vec(),
        }
    }

    fn restore(&self, net: &mut Network) {
        net.weights_mut().clone_from_slice(&self.weights);
        net.thresholds_mut().clone_from_slice(&self.thresholds);
    }
}

/// Complete mutable state of a training run.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub net: Network,
    velocity_weights: Vec<Mat>,
    velocity_thresholds: Vec<Vec<f64>>,
    pub epoch: usize,
    /// First epoch's training error; reference point of the ramp schedule.
    pub error_reference: Option<f64>,
    pub error_history: Vec<f64>,
    pub penalty_history: Vec<f64>,
    pub nondiscrete_history: Vec<f64>,
    pub val_accuracy_history: Vec<f64>,
    pub test_misclassification_history: Vec<f64>,
    pub best_val_accuracy: f64,
    /// Highest-validation-accuracy rounded network among rejected attempts.
    best_attempt: Option<(f64, Network)>,
    rollback: Option<ParamSnapshot>,
    pub status: TrainStatus,
    rng: ChaCha8Rng,
}

impl TrainState {
    pub fn new(net: Network, cfg: &TrainConfig) -> Self {
        let velocity_weights = net
            .weights()
            .iter()
            .map(|w| Mat::zeros(w.rows(), w.cols()))
            .collect();
        let velocity_thresholds = net.thresholds().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            net,
            velocity_weights,
            velocity_thresholds,
            epoch: 0,
            error_reference: None,
            error_history: Vec::new(),
            penalty_history: Vec::new(),
            nondiscrete_history: Vec::new(),
            val_accuracy_history: Vec::new(),
            test_misclassification_history: Vec::new(),
            best_val_accuracy: f64::NEG_INFINITY,
            best_attempt: None,
            rollback: None,
            status: TrainStatus::Running,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9E37_79B9_7F4A_7C15),
        }
    }

    /// Ramp factor for the current epoch: 0 before any error is known, then
    /// `clamp(1 - E0/E_ref, 0, 1)` using the latest completed epoch's error.
    pub fn schedule_scale(&self) -> f64 {
        match (self.error_reference, self.error_history.last()) {
            (Some(reference), Some(&latest)) if reference > 0.0 => {
                (1.0 - latest / reference).clamp(0.0, 1.0)
            }
            _ => 0.0,
        }
    }

    /// Fraction of weights farther than `tolerance` from their nearest
    /// discrete value.
    pub fn nondiscrete_fraction(&self, tolerance: f64) -> f64 {
        nondiscrete_fraction(&self.net, tolerance)
    }
}

pub fn nondiscrete_fraction(net: &Network, tolerance: f64) -> f64 {
    let mut total = 0usize;
    let mut loose = 0usize;
    for w in net.weights() {
        total += w.len();
        loose += w
            .iter()
            .filter(|&v| (v - nearest_discrete(v)).abs() > tolerance)
            .count();
    }
    loose as f64 / total as f64
}

/// Sum of `(w - Q(w))^2` over all weights. Thresholds are excluded.
pub fn discretization_penalty(net: &Network) -> f64 {
    net.weights()
        .iter()
        .map(|w| {
            w.iter()
                .map(|v| {
                    let d = v - nearest_discrete(v);
                    d * d
                })
                .sum::<f64>()
        })
        .sum()
}

/// Squared output error summed over a batch.
fn squared_error(outputs: &Mat, targets: &Mat) -> f64 {
    outputs
        .as_slice()
        .iter()
        .zip(targets.as_slice())
        .map(|(o, t)| (o - t) * (o - t))
        .sum()
}

/// Loss decomposition: total = error + discretization penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub error: f64,
    pub penalty: f64,
}

/// Evaluates the combined training loss of `net` on a batch.
pub fn loss(net: &Network, inputs: &Mat, targets: &Mat) -> Result<LossBreakdown> {
    if inputs.rows() == 0 {
        return Err(Error::Contract("loss of an empty batch".into()));
    }
    let (outputs, _) = net.forward_batch(inputs)?;
    let error = squared_error(&outputs, targets);
    let penalty = discretization_penalty(net);
    Ok(LossBreakdown {
        total: error + penalty,
        error,
        penalty,
    })
}

/// Batch gradient of the output error plus the batch error itself.
/// With `threads > 1` the batch is split into that many contiguous chunks
/// whose gradients are reduced in chunk order (deterministic).
fn batch_gradient(
    net: &Network,
    inputs: &Mat,
    targets: &Mat,
    threads: usize,
) -> Result<(Gradients, f64)> {
    if threads <= 1 || inputs.rows() < 2 * threads {
        let (outputs, trace) = net.forward_batch(inputs)?;
        let error = squared_error(&outputs, targets);
        let grads = net.backward(&trace, targets)?;
        return Ok((grads, error));
    }

    let n = inputs.rows();
    let chunk = n.div_ceil(threads);
    let ranges: Vec<(usize, usize)> = (0..n)
        .step_by(chunk)
        .map(|start| (start, (start + chunk).min(n)))
        .collect();

    let parts: Vec<Result<(Gradients, f64)>> = ranges
        .par_iter()
        .map(|&(start, end)| {
            let idx: Vec<usize> = (start..end).collect();
            let xs = inputs.select_rows(&idx);
            let ts = targets.select_rows(&idx);
            let (outputs, trace) = net.forward_batch(&xs)?;
            let error = squared_error(&outputs, &ts);
            let grads = net.backward(&trace, &ts)?;
            Ok((grads, error))
        })
        .collect();

    let mut total = Gradients::zeros_like(net);
    let mut error = 0.0;
    for part in parts {
        let (g, e) = part?;
        total.add(&g);
        error += e;
    }
    Ok((total, error))
}

/// Runs one full training epoch: per batch an error-reduction step followed
/// by the discretization drift, then the black-hole snap, then bookkeeping.
pub fn epoch(state: &mut TrainState, train: &DataSet, cfg: &TrainConfig) -> Result<()> {
    if state.status != TrainStatus::Running {
        return Err(Error::Contract(format!(
            "epoch called with status {:?}",
            state.status
        )));
    }
    if train.x.rows() == 0 {
        return Err(Error::Contract("epoch on an empty training set".into()));
    }

    let scale = state.schedule_scale();
    let drift_rate = cfg.discretization_rate_max * scale;
    let snap_radius = cfg.blackhole_radius_max * scale;

    // Divergence recovery point: the last epoch boundary with finite loss.
    let backup = state.clone();

    let mut order: Vec<usize> = (0..train.x.rows()).collect();
    order.shuffle(&mut state.rng);

    let mut epoch_error = 0.0;
    for batch in order.chunks(cfg.batch_size) {
        let xs = train.x.select_rows(batch);
        let ts = train.y.select_rows(batch);

        let (grads, batch_error) = batch_gradient(&state.net, &xs, &ts, cfg.threads)?;
        if !batch_error.is_finite() {
            let epoch_now = state.epoch;
            *state = backup;
            return Err(Error::Diverged {
                epoch: epoch_now,
                state: Box::new(state.clone()),
            });
        }
        epoch_error += batch_error;

        // (a) error reduction: momentum SGD on the batch-mean gradient
        let inv = 1.0 / batch.len() as f64;
        for (l, gw) in grads.weights.iter().enumerate() {
            let v = state.velocity_weights[l].as_mut_slice();
            let w = state.net.weights_mut()[l].as_mut_slice();
            for ((vi, wi), gi) in v.iter_mut().zip(w.iter_mut()).zip(gw.as_slice()) {
                *vi = cfg.momentum * *vi - cfg.learning_rate * inv * gi;
                *wi += *vi;
            }
        }
        for (l, gc) in grads.thresholds.iter().enumerate() {
            let v = &mut state.velocity_thresholds[l];
            let c = &mut state.net.thresholds_mut()[l];
            for ((vi, ci), gi) in v.iter_mut().zip(c.iter_mut()).zip(gc) {
                *vi = cfg.momentum * *vi - cfg.learning_rate * inv * gi;
                *ci += *vi;
            }
        }

        // (b) discretization drift: weights only
        if drift_rate > 0.0 {
            for w in state.net.weights_mut() {
                for wi in w.as_mut_slice() {
                    *wi = drift_value(*wi, drift_rate);
                }
            }
        }
    }

    // (c) black hole: snap weights within the radius exactly onto attractors
    if snap_radius > 0.0 {
        blackhole_snap(&mut state.net, snap_radius);
    }

    state.epoch += 1;
    if state.error_reference.is_none() {
        state.error_reference = Some(epoch_error);
    }
    state.error_history.push(epoch_error);
    state
        .penalty_history
        .push(discretization_penalty(&state.net));
    state
        .nondiscrete_history
        .push(state.nondiscrete_fraction(cfg.discrete_tolerance));
    Ok(())
}

/// Sets every weight within `radius` of its nearest discrete value exactly
/// onto it. A radius below 0.5 can never move a weight across the midpoint
/// between two attractors.
pub fn blackhole_snap(net: &mut Network, radius: f64) {
    for w in net.weights_mut() {
        for wi in w.as_mut_slice() {
            let q = nearest_discrete(*wi);
            if (*wi - q).abs() <= radius {
                *wi = q;
            }
        }
    }
}

/// Rounds every weight in place to its nearest discrete value.
fn round_all_weights(net: &mut Network) {
    for w in net.weights_mut() {
        for wi in w.as_mut_slice() {
            *wi = nearest_discrete(*wi);
        }
    }
}

/// Rounds all weights to {-1, 0, +1} and keeps the result if validation
/// accuracy stays within `acceptance_drop` percentage points of the best
/// accuracy seen before rounding; otherwise restores the exact pre-rounding
/// parameters. Returns `true` when the rounding was accepted.
pub fn try_round_and_finalize(
    state: &mut TrainState,
    val: &DataSet,
    cfg: &TrainConfig,
) -> Result<bool> {
    let fraction = state.nondiscrete_fraction(cfg.discrete_tolerance);
    if fraction > cfg.round_trigger_fraction {
        return Err(Error::Contract(format!(
            "rounding attempted with {:.4} of weights non-discrete (trigger {:.4})",
            fraction, cfg.round_trigger_fraction
        )));
    }

    state.rollback = Some(ParamSnapshot::of(&state.net));
    round_all_weights(&mut state.net);

    let accuracy = evaluate_network(&state.net, val)?.accuracy();
    let accepted = accuracy >= state.best_val_accuracy - cfg.acceptance_drop / 100.0;
    if accepted {
        state.status = TrainStatus::RoundedAccepted;
    } else {
        if state
            .best_attempt
            .as_ref()
            .map_or(true, |(best, _)| accuracy > *best)
        {
            state.best_attempt = Some((accuracy, state.net.clone()));
        }
        let snapshot = state.rollback.take().unwrap();
        snapshot.restore(&mut state.net);
    }
    state.rollback = None;
    Ok(accepted)
}

/// One row of the per-epoch training curves.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub error_loss: f64,
    pub penalty_loss: f64,
    pub nondiscrete_fraction: f64,
    pub val_accuracy: f64,
    pub test_misclassification: f64,
}

/// Training curves plus the final status of the run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub status: TrainStatus,
    pub shape: String,
    pub rows: Vec<EpochRow>,
    /// Validation accuracy of the returned (discrete) model.
    pub final_val_accuracy: f64,
    pub rounding_attempts: usize,
}

impl TrainReport {
    /// Writes the curves as tab-separated text, one row per epoch. Lines in
    /// `preamble` are emitted first as `# `-prefixed comments.
    pub fn write_tabular<W: std::io::Write>(&self, out: &mut W, preamble: &[String]) -> std::io::Result<()> {
        for line in preamble {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "# status = {:?}", self.status)?;
        writeln!(out, "# shape = {}", self.shape)?;
        writeln!(
            out,
            "epoch\terror\tpenalty\tnondiscrete_fraction\tval_accuracy\ttest_misclassification"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                r.epoch,
                r.error_loss,
                r.penalty_loss,
                r.nondiscrete_fraction,
                r.val_accuracy,
                r.test_misclassification
            )?;
        }
        Ok(())
    }
}

/// Disjoint data partitions used by [`train`].
#[derive(Debug, Clone, Copy)]
pub struct DataSplits<'a> {
    pub train: &'a DataSet,
    pub val: &'a DataSet,
    pub test: &'a DataSet,
}

/// Result of a full training run: the frozen ternary model plus its curves.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TernaryModel,
    pub report: TrainReport,
}

fn check_split(spec: &NetworkSpec, name: &str, ds: &DataSet) -> Result<()> {
    if ds.x.rows() == 0 {
        return Err(Error::Data(format!("{name} split is empty")));
    }
    if ds.x.cols() != spec.input_dim() {
        return Err(Error::Shape(format!(
            "{name} split has {} features, network expects {}",
            ds.x.cols(),
            spec.input_dim()
        )));
    }
    if ds.y.cols() != spec.output_dim() {
        return Err(Error::Shape(format!(
            "{name} split has {} target columns, network expects {}",
            ds.y.cols(),
            spec.output_dim()
        )));
    }
    Ok(())
}

/// Full outer loop: epochs, per-epoch evaluation, rounding attempts gated by
/// `eval_period`, and a forced rounding on budget exhaustion. The returned
/// model always has weights exactly in {-1, 0, +1}; `report.status` says
/// whether the rounding was accepted or the run merely exhausted its budget.
pub fn train(spec: &NetworkSpec, splits: &DataSplits, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_split(spec, "train", splits.train)?;
    check_split(spec, "validation", splits.val)?;
    check_split(spec, "test", splits.test)?;

    let mut state = TrainState::new(init_network(spec, cfg.seed), cfg);
    let mut last_attempt: Option<usize> = None;
    let mut attempts = 0usize;

    while state.epoch < cfg.max_epochs && state.status == TrainStatus::Running {
        epoch(&mut state, splits.train, cfg)?;

        let val_accuracy = evaluate_network(&state.net, splits.val)?.accuracy();
        let test_accuracy = evaluate_network(&state.net, splits.test)?.accuracy();
        state.val_accuracy_history.push(val_accuracy);
        state
            .test_misclassification_history
            .push(1.0 - test_accuracy);
        if val_accuracy > state.best_val_accuracy {
            state.best_val_accuracy = val_accuracy;
        }

        let due = last_attempt.map_or(true, |e| state.epoch - e >= cfg.eval_period);
        if due && state.nondiscrete_fraction(cfg.discrete_tolerance) <= cfg.round_trigger_fraction
        {
            last_attempt = Some(state.epoch);
            attempts += 1;
            try_round_and_finalize(&mut state, splits.val, cfg)?;
        }
    }

    let final_val_accuracy;
    if state.status == TrainStatus::RoundedAccepted {
        final_val_accuracy = evaluate_network(&state.net, splits.val)?.accuracy();
    } else {
        // Budget exhausted: round anyway and return the best rounded model
        // seen, flagged as unaccepted.
        round_all_weights(&mut state.net);
        let rounded_accuracy = evaluate_network(&state.net, splits.val)?.accuracy();
        if let Some((attempt_accuracy, attempt_net)) = state.best_attempt.take() {
            if attempt_accuracy > rounded_accuracy {
                state.net = attempt_net;
                final_val_accuracy = attempt_accuracy;
            } else {
                final_val_accuracy = rounded_accuracy;
            }
        } else {
            final_val_accuracy = rounded_accuracy;
        }
        state.status = TrainStatus::Exhausted;
    }

    let model = freeze(&state.net)?;
    let rows = (0..state.error_history.len())
        .map(|i| EpochRow {
            epoch: i,
            error_loss: state.error_history[i],
            penalty_loss: state.penalty_history[i],
            nondiscrete_fraction: state.nondiscrete_history[i],
            val_accuracy: state.val_accuracy_history[i],
            test_misclassification: state.test_misclassification_history[i],
        })
        .collect();
    let report = TrainReport {
        status: state.status,
        shape: spec.shape_string(),
        rows,
        final_val_accuracy,
        rounding_attempts: attempts,
    };
    Ok(TrainOutcome { model, report })
}
