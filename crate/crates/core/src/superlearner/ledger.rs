//! Sequential cross-validated risk accounting.
//!
//! A [`RiskLedger`] tracks, per algorithm (stream), the running sum of
//! squared one-step-ahead test residuals, plus per-slice totals feeding the
//! overall-cost penalty. The cumulative risk after `t` committed test
//! slices over `|A|` cities is `sum / (t * |A|)`; the penalized criterion
//! adds `lambda / t` times the summed squared gaps between each slice's
//! actual total cost and a predicted total.
//!
//! With the literal penalty variant the predicted total is the one made by
//! the discrete meta-selection trace (bootstrapped at stream 0), so the
//! penalty is the same constant for every stream at fixed `t` and cannot
//! change the argmin; the per-algorithm variant substitutes each stream's
//! own predicted total, which does discriminate.

use serde::{Deserialize, Serialize};

use crate::learners::Predictor;
use crate::panel::{PanelSlice, TimeIndex};

use super::{SimplexWeights, SuperLearnerError};

/// Which predicted total enters the overall-cost penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyVariant {
    /// The meta-selection trace's predicted total (stream-constant at
    /// fixed `t`).
    #[default]
    Literal,
    /// Each stream's own predicted total.
    PerAlgorithm,
}

#[derive(Debug, Clone)]
struct LedgerSlice {
    time: TimeIndex,
    /// Per-stream sum over cities of squared residuals on this slice.
    sq_sums: Vec<f64>,
    actual_total: f64,
    /// Per-stream predicted total cost for this slice.
    stream_totals: Vec<f64>,
    /// Predicted total of the meta trace (selection made at the previous
    /// time).
    meta_total: f64,
}

/// Incremental per-algorithm risk sums and penalty records.
#[derive(Debug, Clone)]
pub struct RiskLedger {
    n_streams: usize,
    n_cities: usize,
    lambda: f64,
    variant: PenaltyVariant,
    last_time: Option<TimeIndex>,
    cum_sq: Vec<f64>,
    slices: Vec<LedgerSlice>,
}

impl RiskLedger {
    pub fn new(n_streams: usize, n_cities: usize, lambda: f64, variant: PenaltyVariant) -> Self {
        RiskLedger {
            n_streams,
            n_cities,
            lambda,
            variant,
            last_time: None,
            cum_sq: vec![0.0; n_streams],
            slices: Vec::new(),
        }
    }

    pub fn n_streams(&self) -> usize {
        self.n_streams
    }

    pub fn n_cities(&self) -> usize {
        self.n_cities
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of committed test slices (the ledger time `t`).
    pub fn updates(&self) -> usize {
        self.slices.len()
    }

    pub fn times(&self) -> impl Iterator<Item = TimeIndex> + '_ {
        self.slices.iter().map(|s| s.time)
    }

    /// Commits one test slice: `preds[j][city]` are the one-step-ahead
    /// predictions of stream `j` (fitted strictly before `time`),
    /// `actuals[city]` the realized costs, `meta_total` the predicted total
    /// of the meta trace for this slice.
    pub fn commit_slice(
        &mut self,
        time: TimeIndex,
        preds: &[Vec<f64>],
        actuals: &[f64],
        meta_total: f64,
    ) -> Result<(), SuperLearnerError> {
        if let Some(last) = self.last_time {
            if time != last.next() {
                return Err(SuperLearnerError::NonSequentialUpdate {
                    expected: last.next(),
                    got: time,
                });
            }
        }
        if preds.len() != self.n_streams
            || actuals.len() != self.n_cities
            || preds.iter().any(|p| p.len() != self.n_cities)
        {
            return Err(SuperLearnerError::DimensionMismatch);
        }
        let mut sq_sums = vec![0.0; self.n_streams];
        let mut stream_totals = vec![0.0; self.n_streams];
        for (j, stream) in preds.iter().enumerate() {
            let mut sq = 0.0;
            let mut total = 0.0;
            for (p, y) in stream.iter().zip(actuals) {
                let r = y - p;
                sq += r * r;
                total += p;
            }
            sq_sums[j] = sq;
            stream_totals[j] = total;
            self.cum_sq[j] += sq;
        }
        self.slices.push(LedgerSlice {
            time,
            sq_sums,
            actual_total: actuals.iter().sum(),
            stream_totals,
            meta_total,
        });
        self.last_time = Some(time);
        Ok(())
    }

    fn check(&self, j: usize, t: usize) -> Result<(), SuperLearnerError> {
        if j >= self.n_streams {
            return Err(SuperLearnerError::UnknownStream(j));
        }
        if t == 0 || t > self.slices.len() {
            return Err(SuperLearnerError::BadLedgerTime {
                t,
                committed: self.slices.len(),
            });
        }
        Ok(())
    }

    /// Cumulative empirical risk `R(j, t)`: the per-observation mean of
    /// squared test residuals over the first `t` committed slices.
    pub fn empirical_risk(&self, j: usize, t: usize) -> Result<f64, SuperLearnerError> {
        self.check(j, t)?;
        let sum: f64 = if t == self.slices.len() {
            self.cum_sq[j]
        } else {
            self.slices[..t].iter().map(|s| s.sq_sums[j]).sum()
        };
        Ok(sum / (t as f64 * self.n_cities as f64))
    }

    /// Summed squared overall-cost gaps over the first `t` slices for
    /// stream `j` under the configured penalty variant.
    fn penalty_sum(&self, j: usize, t: usize) -> f64 {
        self.slices[..t]
            .iter()
            .map(|s| {
                let predicted = match self.variant {
                    PenaltyVariant::Literal => s.meta_total,
                    PenaltyVariant::PerAlgorithm => s.stream_totals[j],
                };
                let gap = s.actual_total - predicted;
                gap * gap
            })
            .sum()
    }

    /// Penalized criterion `R(j, t) + (lambda / t) * penalty_sum`.
    pub fn penalized_risk(&self, j: usize, t: usize) -> Result<f64, SuperLearnerError> {
        let empirical = self.empirical_risk(j, t)?;
        if self.lambda == 0.0 {
            return Ok(empirical);
        }
        Ok(empirical + self.lambda / t as f64 * self.penalty_sum(j, t))
    }

    /// Index minimizing the penalized criterion at ledger time `t`; ties
    /// break to the lowest index.
    pub fn select(&self, t: usize) -> Result<usize, SuperLearnerError> {
        self.check(0, t)?;
        let mut best = 0;
        let mut best_value = self.penalized_risk(0, t)?;
        for j in 1..self.n_streams {
            let value = self.penalized_risk(j, t)?;
            if value < best_value {
                best = j;
                best_value = value;
            }
        }
        Ok(best)
    }

    /// Predicted total of stream `j` on the slice committed at ledger time
    /// `t`.
    pub fn stream_total(&self, j: usize, t: usize) -> Result<f64, SuperLearnerError> {
        self.check(j, t)?;
        Ok(self.slices[t - 1].stream_totals[j])
    }

    pub fn actual_total(&self, t: usize) -> Result<f64, SuperLearnerError> {
        self.check(0, t)?;
        Ok(self.slices[t - 1].actual_total)
    }
}

/// Applies each fitted predictor to the new slice and commits the
/// residuals. The predictors must have been fitted on history strictly
/// before the slice time.
pub fn update_ledger(
    ledger: &mut RiskLedger,
    predictors: &[Predictor],
    slice: &PanelSlice,
    meta_total: f64,
) -> Result<(), SuperLearnerError> {
    let preds: Vec<Vec<f64>> = predictors
        .iter()
        .map(|p| slice.observations.iter().map(|o| p.predict(o)).collect())
        .collect();
    let actuals: Vec<f64> = slice.observations.iter().map(|o| o.y).collect();
    ledger.commit_slice(slice.time, &preds, &actuals, meta_total)
}

/// Discrete selection at ledger time `t` (lowest-index tie break).
pub fn select_discrete(ledger: &RiskLedger, t: usize) -> Result<usize, SuperLearnerError> {
    ledger.select(t)
}

/// Continuous selection over a net-indexed ledger: the net point whose
/// penalized criterion is smallest at ledger time `t`.
pub fn select_continuous<'net>(
    ledger: &RiskLedger,
    net: &'net [SimplexWeights],
    t: usize,
) -> Result<(usize, &'net SimplexWeights), SuperLearnerError> {
    if net.is_empty() {
        return Err(SuperLearnerError::EmptyNet);
    }
    if net.len() != ledger.n_streams() {
        return Err(SuperLearnerError::DimensionMismatch);
    }
    let index = ledger.select(t)?;
    Ok((index, &net[index]))
}
