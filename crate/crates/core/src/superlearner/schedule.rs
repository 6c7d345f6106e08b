//! Staged one-step-ahead training schedule.
//!
//! The panel splits into four phases controlled by the stage lengths
//! `(w1, w2, w3)`:
//!
//! 1. slices `1..=w1`: training reserve, no risk accounting;
//! 2. slices `w1+1..=w1+w2`: base learners are refitted on each growing
//!    prefix and tested one step ahead; the base-level risk ledger starts;
//! 3. slices `w1+w2+1..=w1+w2+w3`: the meta-algorithms additionally
//!    produce one-step-ahead predictions from the base learners' cached
//!    outputs; the algorithm-level and net-level ledgers start;
//! 4. remaining slices: the overarching selectors forecast each slice from
//!    the previous time's selections; one report row per evaluation year.
//!
//! Predictions for a slice only ever use data from strictly earlier
//! slices. Within a time step the base-learner fits run in parallel; the
//! ledger commits are a single sequential step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::learners::{ridge_fit, BaseLearner, Predictor, Standardizer};
use crate::panel::{Panel, PanelSlice, TimeIndex};

use super::ledger::{PenaltyVariant, RiskLedger};
use super::probe::{OracleProbe, TruthModel};
use super::simplex::{epsilon_net, SimplexWeights};
use super::SuperLearnerError;

/// One meta-algorithm over the base-learner zoo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlgorithmSpec {
    /// The fixed base learner at this zoo index.
    Single { learner: usize },
    /// Sequential discrete selection over the base learners.
    DiscreteOverLearners,
    /// Sequential continuous selection over an epsilon-net on the base
    /// learners.
    NetOverLearners { epsilon: f64 },
    /// Pointwise mean of the base learners' predictions.
    Average,
    /// Pointwise lower median of the base learners' predictions.
    Median,
    /// Ridge-regression stacking on the base learners' one-step-ahead
    /// prediction history.
    RidgeStack { lambda: f64 },
}

impl AlgorithmSpec {
    pub fn label(&self, zoo: &[BaseLearner]) -> String {
        match self {
            AlgorithmSpec::Single { learner } => format!("single:{}", zoo[*learner].name),
            AlgorithmSpec::DiscreteOverLearners => "discrete_over_learners".to_owned(),
            AlgorithmSpec::NetOverLearners { epsilon } => {
                format!("net_over_learners:{epsilon}")
            }
            AlgorithmSpec::Average => "average_of_learners".to_owned(),
            AlgorithmSpec::Median => "median_of_learners".to_owned(),
            AlgorithmSpec::RidgeStack { lambda } => format!("ridge_stack:{lambda}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleConfig {
    /// Stage lengths `(w1, w2, w3)`; evaluation covers the remaining
    /// slices.
    pub stages: (usize, usize, usize),
    /// Overall-cost penalty coefficient of the overarching criteria.
    pub lambda: f64,
    /// Epsilon-net resolution of the continuous overarching selector.
    pub epsilon: f64,
    pub penalty_variant: PenaltyVariant,
    pub algorithms: Vec<AlgorithmSpec>,
}

impl ScheduleConfig {
    pub fn minimal_panel_length(&self) -> usize {
        self.stages.0 + self.stages.1 + self.stages.2 + 1
    }
}

/// One evaluation-year row of the forecast report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastRow {
    pub time: TimeIndex,
    /// Discrete selection made at the previous time.
    pub selected: usize,
    /// Continuous selection (net point) made at the previous time.
    pub weights: SimplexWeights,
    pub city_predictions: Vec<f64>,
    pub city_predictions_continuous: Vec<f64>,
    pub total_actual: f64,
    pub total_predicted: f64,
    pub total_predicted_continuous: f64,
    /// `total_predicted / total_actual`; absent when the actual total is 0.
    pub ratio: Option<f64>,
    pub ratio_continuous: Option<f64>,
    /// Per-algorithm cumulative empirical risks at the selection time.
    pub algorithm_risks: Vec<f64>,
    /// Per-algorithm predicted totals for this slice.
    pub algorithm_totals: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastReport {
    pub algorithm_labels: Vec<String>,
    pub rows: Vec<ForecastRow>,
}

/// Cached one-step-ahead predictions for one algorithm-phase test slice.
#[derive(Debug, Clone)]
pub struct AlgorithmSliceRecord {
    pub time: TimeIndex,
    pub actuals: Vec<f64>,
    pub declared: Vec<bool>,
    /// `preds[j][city]`.
    pub preds: Vec<Vec<f64>>,
}

/// Cached base-learner predictions for one base-phase test slice.
#[derive(Debug, Clone)]
pub struct BaseSliceRecord {
    pub time: TimeIndex,
    pub preds: Vec<Vec<f64>>,
}

/// Penalized criterion values of the two overarching selections at one
/// evaluation step.
#[derive(Debug, Clone, Copy)]
pub struct DominanceRecord {
    pub time: TimeIndex,
    /// Ledger time of the selection.
    pub t: usize,
    pub continuous_criterion: f64,
    pub discrete_criterion: f64,
}

#[derive(Debug)]
pub struct ScheduleOutput {
    pub base_names: Vec<String>,
    pub algorithm_labels: Vec<String>,
    pub base_ledger: RiskLedger,
    pub algorithm_ledger: RiskLedger,
    /// Epsilon-net over the algorithms (contains all vertices).
    pub net: Vec<SimplexWeights>,
    pub net_ledger: RiskLedger,
    pub report: ForecastReport,
    pub slice_records: Vec<AlgorithmSliceRecord>,
    pub base_records: Vec<BaseSliceRecord>,
    pub dominance: Vec<DominanceRecord>,
    pub probe: Option<OracleProbe>,
}

enum AlgState {
    Single(usize),
    Discrete,
    Net {
        net: Vec<SimplexWeights>,
        ledger: RiskLedger,
        current: usize,
    },
    Average,
    Median,
    RidgeStack {
        lambda: f64,
    },
}

/// Convex combination of prediction streams, masked and clamped.
fn combine(weights: &[f64], streams: &[Vec<f64>], declared: &[bool], bound: f64) -> Vec<f64> {
    (0..declared.len())
        .map(|c| {
            if !declared[c] {
                return 0.0;
            }
            let value: f64 = weights.iter().zip(streams).map(|(w, s)| w * s[c]).sum();
            value.clamp(0.0, bound)
        })
        .collect()
}

fn predict_algorithm(
    state: &AlgState,
    base_preds: &[Vec<f64>],
    declared: &[bool],
    bound: f64,
    stack_rows: &[(Vec<f64>, f64)],
    base_selection: usize,
) -> Result<Vec<f64>, SuperLearnerError> {
    let k = base_preds.len();
    let n = declared.len();
    Ok(match state {
        AlgState::Single(learner) => base_preds[*learner].clone(),
        AlgState::Discrete => base_preds[base_selection].clone(),
        AlgState::Net { net, current, .. } => {
            combine(net[*current].as_slice(), base_preds, declared, bound)
        }
        AlgState::Average => {
            let weights = vec![1.0 / k as f64; k];
            combine(&weights, base_preds, declared, bound)
        }
        AlgState::Median => {
            let mut buffer = vec![0.0; k];
            (0..n)
                .map(|c| {
                    if !declared[c] {
                        return 0.0;
                    }
                    for (slot, stream) in buffer.iter_mut().zip(base_preds) {
                        *slot = stream[c];
                    }
                    buffer.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    buffer[(k - 1) / 2]
                })
                .collect()
        }
        AlgState::RidgeStack { lambda } => {
            if stack_rows.is_empty() {
                // no declared history yet: fall back to the plain average
                let weights = vec![1.0 / k as f64; k];
                return Ok(combine(&weights, base_preds, declared, bound));
            }
            let rows: Vec<Vec<f64>> = stack_rows.iter().map(|(r, _)| r.clone()).collect();
            let targets: Vec<f64> = stack_rows.iter().map(|(_, y)| *y).collect();
            let (intercept, coefs, standardizer) = ridge_fit(&rows, &targets, *lambda)?;
            stacked_predictions(
                base_preds,
                declared,
                bound,
                intercept,
                &coefs,
                &standardizer,
            )
        }
    })
}

fn stacked_predictions(
    base_preds: &[Vec<f64>],
    declared: &[bool],
    bound: f64,
    intercept: f64,
    coefs: &[f64],
    standardizer: &Standardizer,
) -> Vec<f64> {
    let k = base_preds.len();
    let mut row = vec![0.0; k];
    (0..declared.len())
        .map(|c| {
            if !declared[c] {
                return 0.0;
            }
            for (slot, stream) in row.iter_mut().zip(base_preds) {
                *slot = stream[c];
            }
            standardizer.apply(&mut row);
            let value = intercept + coefs.iter().zip(&row).map(|(w, v)| w * v).sum::<f64>();
            value.clamp(0.0, bound)
        })
        .collect()
}

fn validate(
    panel: &Panel,
    zoo: &[BaseLearner],
    config: &ScheduleConfig,
) -> Result<(), SuperLearnerError> {
    let (w1, w2, w3) = config.stages;
    if w1 == 0 || w2 == 0 || w3 == 0 {
        return Err(SuperLearnerError::BadStages);
    }
    let need = config.minimal_panel_length();
    if panel.n_slices() < need {
        return Err(SuperLearnerError::PanelTooShort {
            need,
            got: panel.n_slices(),
        });
    }
    if zoo.is_empty() {
        return Err(SuperLearnerError::BadConfig("empty learner zoo".into()));
    }
    if config.algorithms.len() < 2 {
        return Err(SuperLearnerError::BadConfig(
            "continuous selection needs at least 2 algorithms".into(),
        ));
    }
    if config.lambda.is_nan() || config.lambda < 0.0 || !config.lambda.is_finite() {
        return Err(SuperLearnerError::BadConfig(format!(
            "lambda must be nonnegative and finite, got {}",
            config.lambda
        )));
    }
    for spec in &config.algorithms {
        match spec {
            AlgorithmSpec::Single { learner } if *learner >= zoo.len() => {
                return Err(SuperLearnerError::BadConfig(format!(
                    "single-learner algorithm references zoo index {learner}, zoo has {}",
                    zoo.len()
                )));
            }
            AlgorithmSpec::RidgeStack { lambda } if lambda.is_nan() || *lambda <= 0.0 => {
                return Err(SuperLearnerError::BadConfig(
                    "ridge_stack lambda must be positive".into(),
                ));
            }
            _ => {}
        }
    }
    Ok(())
}

/// Runs the staged schedule over the panel. When `truth` is supplied an
/// [`OracleProbe`] accumulates true risks alongside the empirical ledgers.
pub fn run_schedule(
    panel: &Panel,
    zoo: &[BaseLearner],
    config: &ScheduleConfig,
    truth: Option<&dyn TruthModel>,
) -> Result<ScheduleOutput, SuperLearnerError> {
    validate(panel, zoo, config)?;
    let (w1, w2, w3) = config.stages;
    let n_cities = panel.n_cities();
    let bound = panel.cost_bound();
    let k = zoo.len();
    let j = config.algorithms.len();

    let net = epsilon_net(j, config.epsilon)?;
    let mut base_ledger = RiskLedger::new(k, n_cities, 0.0, PenaltyVariant::Literal);
    let mut alg_ledger = RiskLedger::new(j, n_cities, config.lambda, config.penalty_variant);
    let mut net_ledger =
        RiskLedger::new(net.len(), n_cities, config.lambda, config.penalty_variant);

    let mut states: Vec<AlgState> = config
        .algorithms
        .iter()
        .map(|spec| {
            Ok(match spec {
                AlgorithmSpec::Single { learner } => AlgState::Single(*learner),
                AlgorithmSpec::DiscreteOverLearners => AlgState::Discrete,
                AlgorithmSpec::NetOverLearners { epsilon } => {
                    let inner = epsilon_net(k, *epsilon)?;
                    let ledger =
                        RiskLedger::new(inner.len(), n_cities, 0.0, PenaltyVariant::Literal);
                    AlgState::Net {
                        net: inner,
                        ledger,
                        current: 0,
                    }
                }
                AlgorithmSpec::Average => AlgState::Average,
                AlgorithmSpec::Median => AlgState::Median,
                AlgorithmSpec::RidgeStack { lambda } => AlgState::RidgeStack { lambda: *lambda },
            })
        })
        .collect::<Result<_, SuperLearnerError>>()?;

    // Meta traces, bootstrapped at the first algorithm / net point.
    let mut base_selection = 0usize;
    let mut meta_selection = 0usize;
    let mut net_selection = 0usize;

    let mut stack_rows: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut predictors: Option<Vec<Predictor>> = None;
    let mut probe = truth.map(|_| OracleProbe::new(j, n_cities));

    let mut rows = Vec::new();
    let mut slice_records = Vec::new();
    let mut base_records = Vec::new();
    let mut dominance = Vec::new();

    let slices = panel.slices();
    for (s_idx, slice) in slices.iter().enumerate() {
        let s = s_idx + 1;
        if s > w1 {
            let fitted = predictors
                .as_ref()
                .expect("base learners fitted at the previous step");
            let base_preds: Vec<Vec<f64>> = fitted
                .par_iter()
                .map(|p| slice.observations.iter().map(|o| p.predict(o)).collect())
                .collect();
            let actuals: Vec<f64> = slice.observations.iter().map(|o| o.y).collect();
            let declared: Vec<bool> = slice.observations.iter().map(|o| o.declared).collect();

            // Algorithm-phase predictions use base state from strictly
            // earlier slices (selections updated after the previous
            // commit).
            let alg_preds: Option<Vec<Vec<f64>>> = if s > w1 + w2 {
                Some(
                    states
                        .iter()
                        .map(|st| {
                            predict_algorithm(
                                st,
                                &base_preds,
                                &declared,
                                bound,
                                &stack_rows,
                                base_selection,
                            )
                        })
                        .collect::<Result<_, _>>()?,
                )
            } else {
                None
            };

            // Evaluation row: forecast this slice from the previous time's
            // overarching selections.
            if let (true, Some(ap)) = (s > w1 + w2 + w3, alg_preds.as_ref()) {
                let t_prev = alg_ledger.updates();
                let discrete_city = ap[meta_selection].clone();
                let continuous_city = combine(net[net_selection].as_slice(), ap, &declared, bound);
                let total_actual: f64 = actuals.iter().sum();
                let total_predicted: f64 = discrete_city.iter().sum();
                let total_continuous: f64 = continuous_city.iter().sum();
                let algorithm_risks: Vec<f64> = (0..j)
                    .map(|jj| alg_ledger.empirical_risk(jj, t_prev))
                    .collect::<Result<_, _>>()?;
                let algorithm_totals: Vec<f64> =
                    ap.iter().map(|stream| stream.iter().sum()).collect();
                dominance.push(DominanceRecord {
                    time: slice.time,
                    t: t_prev,
                    continuous_criterion: net_ledger
                        .penalized_risk(net_ledger.select(t_prev)?, t_prev)?,
                    discrete_criterion: alg_ledger
                        .penalized_risk(alg_ledger.select(t_prev)?, t_prev)?,
                });
                let ratio_of =
                    |predicted: f64| (total_actual > 0.0).then_some(predicted / total_actual);
                rows.push(ForecastRow {
                    time: slice.time,
                    selected: meta_selection,
                    weights: net[net_selection].clone(),
                    total_actual,
                    total_predicted,
                    total_predicted_continuous: total_continuous,
                    ratio: ratio_of(total_predicted),
                    ratio_continuous: ratio_of(total_continuous),
                    city_predictions: discrete_city,
                    city_predictions_continuous: continuous_city,
                    algorithm_risks,
                    algorithm_totals,
                });
            }

            // Commit the base level and refresh base-level selections.
            let base_meta_total: f64 = base_preds[base_selection].iter().sum();
            base_ledger.commit_slice(slice.time, &base_preds, &actuals, base_meta_total)?;
            base_selection = base_ledger.select(base_ledger.updates())?;
            for st in &mut states {
                if let AlgState::Net {
                    net: inner,
                    ledger,
                    current,
                } = st
                {
                    let inner_preds: Vec<Vec<f64>> = inner
                        .iter()
                        .map(|w| combine(w.as_slice(), &base_preds, &declared, bound))
                        .collect();
                    ledger.commit_slice(slice.time, &inner_preds, &actuals, 0.0)?;
                    *current = ledger.select(ledger.updates())?;
                }
            }
            for c in 0..n_cities {
                if declared[c] {
                    stack_rows.push((
                        base_preds.iter().map(|stream| stream[c]).collect(),
                        actuals[c],
                    ));
                }
            }
            base_records.push(BaseSliceRecord {
                time: slice.time,
                preds: base_preds,
            });

            // Commit the algorithm level and refresh the overarching
            // selections.
            if let Some(ap) = alg_preds {
                let meta_total: f64 = ap[meta_selection].iter().sum();
                alg_ledger.commit_slice(slice.time, &ap, &actuals, meta_total)?;
                let net_preds: Vec<Vec<f64>> = net
                    .iter()
                    .map(|w| combine(w.as_slice(), &ap, &declared, bound))
                    .collect();
                net_ledger.commit_slice(slice.time, &net_preds, &actuals, meta_total)?;
                let t_now = alg_ledger.updates();
                meta_selection = alg_ledger.select(t_now)?;
                net_selection = net_ledger.select(t_now)?;

                if let (Some(probe), Some(truth)) = (probe.as_mut(), truth) {
                    let mut bias_sums = vec![0.0; j];
                    let mut noise_sum = 0.0;
                    for (c, obs) in slice.observations.iter().enumerate() {
                        let theta = truth.theta_star(c, obs);
                        noise_sum += truth.conditional_variance(c, obs);
                        for (jj, stream) in ap.iter().enumerate() {
                            let bias = stream[c] - theta;
                            bias_sums[jj] += bias * bias;
                        }
                    }
                    probe.record_slice(slice.time, bias_sums, noise_sum)?;
                    probe.record_selection(meta_selection);
                }
                slice_records.push(AlgorithmSliceRecord {
                    time: slice.time,
                    actuals,
                    declared,
                    preds: ap,
                });
            }
        }

        // Refit on the prefix through this slice for the next step.
        if s >= w1 && s_idx + 1 < slices.len() {
            let prefix = panel.history_prefix(slice.time)?;
            predictors = Some(
                zoo.par_iter()
                    .map(|l| l.fit(&prefix))
                    .collect::<Result<Vec<_>, _>>()?,
            );
        }
    }

    let algorithm_labels: Vec<String> = config
        .algorithms
        .iter()
        .map(|spec| spec.label(zoo))
        .collect();
    Ok(ScheduleOutput {
        base_names: zoo.iter().map(|l| l.name.clone()).collect(),
        algorithm_labels: algorithm_labels.clone(),
        base_ledger,
        algorithm_ledger: alg_ledger,
        net,
        net_ledger,
        report: ForecastReport {
            algorithm_labels,
            rows,
        },
        slice_records,
        base_records,
        dominance,
        probe,
    })
}

/// Applies a fitted predictor to every observation of the slice; the total
/// is the sum of the per-city predictions and non-declared cities
/// contribute exactly zero.
pub fn forecast_total(
    predictor: &Predictor,
    slice: &PanelSlice,
) -> Result<(Vec<f64>, f64), SuperLearnerError> {
    if let Some((n_x, n_z)) = predictor.dims() {
        for obs in &slice.observations {
            if obs.x.len() != n_x || obs.z.len() != n_z {
                return Err(SuperLearnerError::BadConfig(format!(
                    "schema mismatch: predictor expects {n_x}+{n_z} covariates, \
                     observation has {}+{}",
                    obs.x.len(),
                    obs.z.len()
                )));
            }
        }
    }
    let per_city: Vec<f64> = slice
        .observations
        .iter()
        .map(|o| predictor.predict(o))
        .collect();
    let total = per_city.iter().sum();
    Ok((per_city, total))
}
