//! Oracle probes: true conditional cumulative risks, the oracle selector
//! and excess-risk gaps, computable only when the generating truth is
//! known.
//!
//! On synthetic data the true risk of algorithm `j` after `t` test slices
//! decomposes as the per-observation average of squared bias against the
//! true regression function plus the conditional noise variance; the noise
//! term is common to all algorithms and equals the true risk of the truth
//! itself.

use crate::panel::{Observation, TimeIndex};

use super::SuperLearnerError;

/// Access to the synthetic ground truth: the true regression function and
/// the conditional noise variance per observation.
pub trait TruthModel {
    /// True mean conditional cost; zero whenever the observation is not
    /// declared.
    fn theta_star(&self, city_index: usize, obs: &Observation) -> f64;
    /// Conditional variance of the cost given the observation's features.
    fn conditional_variance(&self, city_index: usize, obs: &Observation) -> f64;
}

/// Excess-risk comparison of the empirical selection against the oracle
/// selection at one ledger time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessGap {
    /// True excess risk of the empirically selected algorithm.
    pub excess_selected: f64,
    /// True excess risk of the oracle selection.
    pub excess_oracle: f64,
    /// `excess_selected - (1 + eps) * excess_oracle`.
    pub gap: f64,
}

/// Per-algorithm true conditional cumulative risks accumulated alongside a
/// schedule run.
#[derive(Debug, Clone)]
pub struct OracleProbe {
    n_streams: usize,
    n_cities: usize,
    times: Vec<TimeIndex>,
    /// Per slice, per stream: sum over cities of squared bias.
    bias_sums: Vec<Vec<f64>>,
    /// Per slice: sum over cities of conditional noise variance.
    noise_sums: Vec<f64>,
    /// Discrete selections recorded after each committed slice.
    selections: Vec<usize>,
}

impl OracleProbe {
    /// Fails when no ground truth is available.
    pub fn require<T>(truth: Option<T>) -> Result<T, SuperLearnerError> {
        truth.ok_or(SuperLearnerError::ProbeRequiresTruth)
    }

    pub fn new(n_streams: usize, n_cities: usize) -> Self {
        OracleProbe {
            n_streams,
            n_cities,
            times: Vec::new(),
            bias_sums: Vec::new(),
            noise_sums: Vec::new(),
            selections: Vec::new(),
        }
    }

    /// Accumulates one test slice: per-stream squared-bias sums and the
    /// slice's total conditional noise variance.
    pub fn record_slice(
        &mut self,
        time: TimeIndex,
        bias_sums: Vec<f64>,
        noise_sum: f64,
    ) -> Result<(), SuperLearnerError> {
        if bias_sums.len() != self.n_streams {
            return Err(SuperLearnerError::DimensionMismatch);
        }
        self.times.push(time);
        self.bias_sums.push(bias_sums);
        self.noise_sums.push(noise_sum);
        Ok(())
    }

    /// Records the empirical (discrete) selection made at the current
    /// ledger time.
    pub fn record_selection(&mut self, j: usize) {
        self.selections.push(j);
    }

    pub fn updates(&self) -> usize {
        self.times.len()
    }

    fn check(&self, j: usize, t: usize) -> Result<(), SuperLearnerError> {
        if j >= self.n_streams {
            return Err(SuperLearnerError::UnknownStream(j));
        }
        if t == 0 || t > self.times.len() {
            return Err(SuperLearnerError::BadLedgerTime {
                t,
                committed: self.times.len(),
            });
        }
        Ok(())
    }

    /// True conditional cumulative risk of stream `j` after `t` slices.
    pub fn true_risk(&self, j: usize, t: usize) -> Result<f64, SuperLearnerError> {
        self.check(j, t)?;
        let bias: f64 = self.bias_sums[..t].iter().map(|s| s[j]).sum();
        let noise: f64 = self.noise_sums[..t].iter().sum();
        Ok((bias + noise) / (t as f64 * self.n_cities as f64))
    }

    /// True risk of the truth itself: the average conditional noise
    /// variance after `t` slices.
    pub fn truth_risk(&self, t: usize) -> Result<f64, SuperLearnerError> {
        self.check(0, t)?;
        let noise: f64 = self.noise_sums[..t].iter().sum();
        Ok(noise / (t as f64 * self.n_cities as f64))
    }

    /// Oracle selector: stream minimizing the true risk at time `t`
    /// (lowest-index tie break).
    pub fn oracle_select(&self, t: usize) -> Result<usize, SuperLearnerError> {
        self.check(0, t)?;
        let mut best = 0;
        let mut best_value = self.true_risk(0, t)?;
        for j in 1..self.n_streams {
            let value = self.true_risk(j, t)?;
            if value < best_value {
                best = j;
                best_value = value;
            }
        }
        Ok(best)
    }

    /// Empirical selection recorded at time `t`.
    pub fn selected(&self, t: usize) -> Result<usize, SuperLearnerError> {
        self.check(0, t)?;
        self.selections
            .get(t - 1)
            .copied()
            .ok_or(SuperLearnerError::BadLedgerTime {
                t,
                committed: self.selections.len(),
            })
    }

    /// Excess-risk gap at time `t`:
    /// `(R(selected) - R(truth)) - (1 + eps) * (R(oracle) - R(truth))`.
    pub fn excess_gap(&self, t: usize, eps: f64) -> Result<ExcessGap, SuperLearnerError> {
        let selected = self.selected(t)?;
        let oracle = self.oracle_select(t)?;
        let truth = self.truth_risk(t)?;
        let excess_selected = self.true_risk(selected, t)? - truth;
        let excess_oracle = self.true_risk(oracle, t)? - truth;
        Ok(ExcessGap {
            excess_selected,
            excess_oracle,
            gap: excess_selected - (1.0 + eps) * excess_oracle,
        })
    }
}
