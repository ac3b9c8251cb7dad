//! Constructive 1-D approximation with ternary-weight bump networks.
//!
//! The building block is the bump `tanh(x - rho) + tanh(-(x - rho) + chi)`:
//! zero at both tails, peak `2*tanh(chi/2)` at `x = rho + chi/2`, realized
//! by a pair of hidden neurons with weights +1 and -1 and free thresholds.
//! Summing bumps (output weights +-1, amplitude via integer replication of
//! identical pairs) approximates arbitrary bounded 1-D functions.
//!
//! A [`BumpFit`] evaluates that superposition directly — the output
//! neuron's own `tanh` is deliberately left out of the demo evaluation, the
//! superposition being the quantity of interest. [`BumpFit::to_network`]
//! emits the same construction as a 1:(2K'):1 network whose weights all lie
//! in {0, +-1}, so it freezes into a ternary model.

use crate::linalg::Mat;
use crate::network::{Network, NetworkSpec};

/// The bump expression itself.
#[inline]
pub fn bump_value(rho: f64, chi: f64, x: f64) -> f64 {
    (x - rho).tanh() + (-(x - rho) + chi).tanh()
}

/// One greedy term: a bump at (`rho`, `chi`), added or subtracted,
/// replicated an integral number of times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpTerm {
    pub rho: f64,
    pub chi: f64,
    pub positive: bool,
    pub replication: usize,
}

impl BumpTerm {
    pub fn evaluate(&self, x: f64) -> f64 {
        let sign = if self.positive { 1.0 } else { -1.0 };
        sign * self.replication as f64 * bump_value(self.rho, self.chi, x)
    }
}

/// A sum of bump terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BumpFit {
    pub terms: Vec<BumpTerm>,
}

impl BumpFit {
    pub fn evaluate(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.evaluate(x)).sum()
    }

    /// Largest absolute error against `target` over the grid.
    pub fn sup_error(&self, grid: &[(f64, f64)]) -> f64 {
        grid.iter()
            .map(|&(x, t)| (self.evaluate(x) - t).abs())
            .fold(0.0, f64::max)
    }

    /// Number of hidden neurons the construction uses (two per replication).
    pub fn hidden_neurons(&self) -> usize {
        2 * self.terms.iter().map(|t| t.replication).sum::<usize>()
    }

    /// Emits the construction as a 1:(2K'):1 network. Hidden pair for a
    /// term: weights +1 and -1 with thresholds `rho` and `-(rho + chi)`;
    /// output weights carry the term's sign, replicated. The superposition
    /// appears at the output neuron's pre-activation (threshold 0).
    pub fn to_network(&self) -> Network {
        let hidden = self.hidden_neurons().max(1);
        let spec = NetworkSpec::new(vec![1, hidden, 1]).expect("valid shape");
        let mut w0 = Mat::zeros(1, hidden);
        let mut c0 = vec![0.0; hidden];
        let mut w1 = Mat::zeros(hidden, 1);
        let mut h = 0;
        for term in &self.terms {
            let sign = if term.positive { 1.0 } else { -1.0 };
            for _ in 0..term.replication {
                *w0.at_mut(0, h) = 1.0;
                c0[h] = term.rho;
                *w1.at_mut(h, 0) = sign;
                *w0.at_mut(0, h + 1) = -1.0;
                c0[h + 1] = -(term.rho + term.chi);
                *w1.at_mut(h + 1, 0) = sign;
                h += 2;
            }
        }
        Network::from_parts(spec, vec![w0, w1], vec![c0, vec![0.0]])
            .expect("construction has consistent shapes")
    }
}

/// Candidate grids for the greedy search.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub rho_candidates: Vec<f64>,
    pub chi_candidates: Vec<f64>,
    pub max_replication: usize,
}

impl FitConfig {
    /// Sensible grids for targets living on `[a, b]`: bump left edges span
    /// a padded interval, widths from narrow to interval-wide.
    pub fn for_interval(a: f64, b: f64) -> FitConfig {
        let span = (b - a).max(1e-9);
        let pad = 0.5 * span;
        let n_rho = 81;
        let rho_candidates = (0..n_rho)
            .map(|i| a - pad + (span + 2.0 * pad) * i as f64 / (n_rho - 1) as f64)
            .collect();
        // quadratic spacing: plenty of narrow (fine-amplitude) bumps plus a
        // few interval-wide ones
        let n_chi = 40;
        let chi_candidates = (1..=n_chi)
            .map(|i| {
                let t = i as f64 / n_chi as f64;
                1.5 * span * t * t
            })
            .collect();
        FitConfig {
            rho_candidates,
            chi_candidates,
            max_replication: 3,
        }
    }
}

/// Greedy fit. Each step prefers the (rho, chi, sign, replication) whose
/// addition most lowers the residual's sup-norm over the grid. A pure
/// sup-norm step stalls once the residual equioscillates (every bump's tail
/// pushes an opposite-sign extremum over the top), so when no candidate
/// lowers the maximum the step falls back to the steepest squared-error
/// descent and keeps going. The returned fit is the best-sup prefix of the
/// term sequence, which makes the reported sup-norm non-increasing in the
/// budget.
pub fn fit_1d(grid: &[(f64, f64)], budget: usize, cfg: &FitConfig) -> BumpFit {
    let mut fit = BumpFit::default();
    if grid.is_empty() || budget == 0 {
        return fit;
    }

    // residual r = target - current fit
    let mut residual: Vec<f64> = grid.iter().map(|&(_, t)| t).collect();
    let mut sup = residual.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut l2 = residual.iter().map(|v| v * v).sum::<f64>();

    // bump curves are reused across all greedy steps
    let params: Vec<(f64, f64)> = cfg
        .rho_candidates
        .iter()
        .flat_map(|&rho| cfg.chi_candidates.iter().map(move |&chi| (rho, chi)))
        .collect();
    let curves: Vec<Vec<f64>> = params
        .iter()
        .map(|&(rho, chi)| grid.iter().map(|&(x, _)| bump_value(rho, chi, x)).collect())
        .collect();

    let mut best_prefix = 0usize;
    let mut best_sup = sup;

    for _ in 0..budget {
        if sup == 0.0 {
            break;
        }
        // (new_sup, new_l2, curve index, positive, replication)
        let mut by_sup: Option<(f64, f64, usize, bool, usize)> = None;
        let mut by_l2: Option<(f64, f64, usize, bool, usize)> = None;
        for (ci, curve) in curves.iter().enumerate() {
            for positive in [true, false] {
                let sign = if positive { 1.0 } else { -1.0 };
                for m in 1..=cfg.max_replication {
                    let amp = sign * m as f64;
                    let mut cand_sup = 0.0f64;
                    let mut cand_l2 = 0.0f64;
                    for (r, b) in residual.iter().zip(curve) {
                        let v = r - amp * b;
                        cand_l2 += v * v;
                        let a = v.abs();
                        if a > cand_sup {
                            cand_sup = a;
                        }
                    }
                    if by_sup
                        .map_or(true, |(s, l, ..)| cand_sup < s || (cand_sup == s && cand_l2 < l))
                    {
                        by_sup = Some((cand_sup, cand_l2, ci, positive, m));
                    }
                    if by_l2.map_or(true, |(_, l, ..)| cand_l2 < l) {
                        by_l2 = Some((cand_sup, cand_l2, ci, positive, m));
                    }
                }
            }
        }
        let sup_choice = by_sup.expect("candidate grids are non-empty");
        let l2_choice = by_l2.expect("candidate grids are non-empty");
        let (new_sup, new_l2, ci, positive, m) = if sup_choice.0 < sup {
            sup_choice
        } else if l2_choice.1 < l2 {
            l2_choice
        } else {
            break; // no candidate makes any progress
        };

        let (rho, chi) = params[ci];
        let amp = if positive { m as f64 } else { -(m as f64) };
        for (r, b) in residual.iter_mut().zip(&curves[ci]) {
            *r -= amp * b;
        }
        sup = new_sup;
        l2 = new_l2;
        fit.terms.push(BumpTerm {
            rho,
            chi,
            positive,
            replication: m,
        });
        if sup < best_sup {
            best_sup = sup;
            best_prefix = fit.terms.len();
        }
    }
    fit.terms.truncate(best_prefix);
    fit
}

/// Samples a function on a uniform grid, pairing points with targets.
pub fn sample_grid(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let x = a + (b - a) * i as f64 / (n - 1).max(1) as f64;
            (x, f(x))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ternary::freeze;

    #[test]
    fn zero_width_bump_vanishes_identically() {
        for x in [-5.0, -0.3, 0.0, 1.7, 42.0] {
            assert_eq!(bump_value(2.0, 0.0, x), 0.0);
        }
    }

    #[test]
    fn tails_cancel() {
        assert!(bump_value(0.0, 2.0, 40.0).abs() < 1e-12);
        assert!(bump_value(0.0, 2.0, -40.0).abs() < 1e-12);
    }

    #[test]
    fn peak_location_and_height() {
        // dense grid confirms the maximum sits at rho + chi/2 with value
        // 2 tanh(chi/2)
        let (rho, chi) = (1.0, 2.0);
        let grid = sample_grid(rho - 6.0, rho + chi + 6.0, 200_001, |x| {
            bump_value(rho, chi, x)
        });
        let (mut best_x, mut best_v) = (0.0, f64::MIN);
        for &(x, v) in &grid {
            if v > best_v {
                best_v = v;
                best_x = x;
            }
        }
        assert!((best_x - (rho + chi / 2.0)).abs() < 1e-4);
        assert!((best_v - 2.0 * (chi / 2.0).tanh()).abs() < 1e-9);
    }

    #[test]
    fn bump_is_even_about_its_peak() {
        let (rho, chi) = (0.7, 1.3);
        let mid = rho + chi / 2.0;
        for t in [0.1, 0.5, 1.0, 2.5, 7.0] {
            let a = bump_value(rho, chi, mid + t);
            let b = bump_value(rho, chi, mid - t);
            assert!((a - b).abs() < 1e-12, "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn zero_target_yields_zero_terms() {
        let grid = sample_grid(0.0, 1.0, 101, |_| 0.0);
        let fit = fit_1d(&grid, 10, &FitConfig::for_interval(0.0, 1.0));
        assert!(fit.terms.is_empty());
        assert_eq!(fit.sup_error(&grid), 0.0);
    }

    #[test]
    fn single_bump_target_is_recovered_exactly() {
        // target is bump(1, 2, .): candidate grids contain (1, 2), so one
        // term suffices
        let grid = sample_grid(-3.0, 5.0, 801, |x| bump_value(1.0, 2.0, x));
        let cfg = FitConfig {
            rho_candidates: vec![0.0, 0.5, 1.0, 1.5],
            chi_candidates: vec![1.0, 2.0, 3.0],
            max_replication: 2,
        };
        let fit = fit_1d(&grid, 1, &cfg);
        assert_eq!(fit.terms.len(), 1);
        assert!(fit.sup_error(&grid) < 1e-6);
    }

    #[test]
    fn residual_sup_norm_is_non_increasing_in_budget() {
        let grid = sample_grid(0.0, std::f64::consts::PI, 301, f64::sin);
        let cfg = FitConfig::for_interval(0.0, std::f64::consts::PI);
        let mut last = f64::INFINITY;
        for k in [0, 1, 2, 4, 8, 16, 32] {
            let fit = fit_1d(&grid, k, &cfg);
            let err = fit.sup_error(&grid);
            assert!(err <= last + 1e-12, "K={k}: {err} > {last}");
            last = err;
        }
    }

    #[test]
    fn sine_fit_meets_the_frozen_bound() {
        let grid = sample_grid(0.0, std::f64::consts::PI, 1000, f64::sin);
        let cfg = FitConfig::for_interval(0.0, std::f64::consts::PI);
        let fit = fit_1d(&grid, 40, &cfg);
        assert!(
            fit.sup_error(&grid) <= 0.05,
            "sup error {}",
            fit.sup_error(&grid)
        );
    }

    #[test]
    fn emitted_network_is_ternary_and_realizes_the_superposition() {
        let grid = sample_grid(0.0, 2.0, 101, |x| (x - 1.0).abs());
        let fit = fit_1d(&grid, 6, &FitConfig::for_interval(0.0, 2.0));
        let net = fit.to_network();
        assert!(freeze(&net).is_ok());
        // the output pre-activation equals the superposition
        for &(x, _) in grid.iter().step_by(17) {
            let (_, trace) = net.forward(&[x]).unwrap();
            let pre = trace.pre_activations.last().unwrap().at(0, 0);
            assert!((pre - fit.evaluate(x)).abs() < 1e-9, "x={x}");
        }
    }
}
