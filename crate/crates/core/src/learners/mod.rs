//! Base-learner zoo: mean, ridge, boosted-linear and KS-distance k-NN
//! learners, screening wrappers and the average/median combiners.
//!
//! Every fitted [`Predictor`] honors two invariants regardless of learner
//! kind: the prediction for a non-declared city is exactly zero, and
//! declared predictions are clamped to `[0, cost_bound]`. Learners train on
//! declared observations only; a history without any declared observation
//! yields the constant-zero predictor, flagged as degenerate.

mod design;
mod knn;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::{Observation, Panel};

use design::Candidate;
pub(crate) use design::{ridge_fit, DesignLayout, Standardizer};
use knn::{channel_samples, resolve_channels, KnnModel};

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("invalid hyperparameter: {0}")]
    BadHyperparameter(String),
    #[error("screening subset is empty")]
    EmptyScreen,
    #[error("unknown covariate `{0}`")]
    UnknownCovariate(String),
    #[error("singular design matrix")]
    SingularDesign,
    #[error("combiner requires at least one member")]
    EmptyCombiner,
}

/// Hyperparameters of one base learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerKind {
    /// Predicts the mean declared training cost.
    Mean,
    /// Closed-form ridge regression on standardized one-hot design.
    Ridge { lambda: f64 },
    /// Gradient boosting with single-covariate linear boosters.
    BoostedLinear { rounds: usize, shrinkage: f64 },
    /// k-NN under convex-weighted Kolmogorov-Smirnov channel distances.
    KnnKs {
        k: usize,
        channels: Vec<Vec<String>>,
        weights: Vec<f64>,
    },
}

/// A named base learner, optionally restricted to a covariate subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseLearner {
    pub name: String,
    #[serde(flatten)]
    pub kind: LearnerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen: Option<Vec<String>>,
}

impl BaseLearner {
    pub fn mean(name: &str) -> BaseLearner {
        BaseLearner {
            name: name.to_owned(),
            kind: LearnerKind::Mean,
            screen: None,
        }
    }

    pub fn ridge(name: &str, lambda: f64) -> Result<BaseLearner, LearnerError> {
        if lambda.is_nan() || lambda <= 0.0 || !lambda.is_finite() {
            return Err(LearnerError::BadHyperparameter(format!(
                "ridge lambda must be positive and finite, got {lambda}"
            )));
        }
        Ok(BaseLearner {
            name: name.to_owned(),
            kind: LearnerKind::Ridge { lambda },
            screen: None,
        })
    }

    pub fn boosted_linear(
        name: &str,
        rounds: usize,
        shrinkage: f64,
    ) -> Result<BaseLearner, LearnerError> {
        if rounds == 0 {
            return Err(LearnerError::BadHyperparameter(
                "boosted_linear rounds must be >= 1".into(),
            ));
        }
        if shrinkage.is_nan() || shrinkage <= 0.0 || shrinkage > 1.0 {
            return Err(LearnerError::BadHyperparameter(format!(
                "boosted_linear shrinkage must be in (0, 1], got {shrinkage}"
            )));
        }
        Ok(BaseLearner {
            name: name.to_owned(),
            kind: LearnerKind::BoostedLinear { rounds, shrinkage },
            screen: None,
        })
    }

    pub fn knn_ks(
        name: &str,
        k: usize,
        channels: Vec<Vec<String>>,
        weights: Vec<f64>,
    ) -> Result<BaseLearner, LearnerError> {
        if k == 0 {
            return Err(LearnerError::BadHyperparameter(
                "knn_ks k must be >= 1".into(),
            ));
        }
        if channels.is_empty() || channels.len() != weights.len() {
            return Err(LearnerError::BadHyperparameter(
                "knn_ks: channels and weights must be nonempty and aligned".into(),
            ));
        }
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) || weights.iter().sum::<f64>() <= 0.0
        {
            return Err(LearnerError::BadHyperparameter(
                "knn_ks: weights must be nonnegative with positive sum".into(),
            ));
        }
        Ok(BaseLearner {
            name: name.to_owned(),
            kind: LearnerKind::KnnKs {
                k,
                channels,
                weights,
            },
            screen: None,
        })
    }

    /// Re-checks the hyperparameter invariants; used after
    /// deserialization, which bypasses the constructors.
    pub fn validate(&self) -> Result<(), LearnerError> {
        match &self.kind {
            LearnerKind::Mean => {}
            LearnerKind::Ridge { lambda } => {
                BaseLearner::ridge(&self.name, *lambda)?;
            }
            LearnerKind::BoostedLinear { rounds, shrinkage } => {
                BaseLearner::boosted_linear(&self.name, *rounds, *shrinkage)?;
            }
            LearnerKind::KnnKs {
                k,
                channels,
                weights,
            } => {
                BaseLearner::knn_ks(&self.name, *k, channels.clone(), weights.clone())?;
            }
        }
        if self.screen.as_ref().is_some_and(|s| s.is_empty()) {
            return Err(LearnerError::EmptyScreen);
        }
        Ok(())
    }

    /// Restricts the learner to a covariate subset. The subset must be
    /// nonempty; membership in the schema is checked at fit time. The
    /// declaration mask applies regardless of screening.
    pub fn screen(&self, subset: &[String]) -> Result<BaseLearner, LearnerError> {
        if subset.is_empty() {
            return Err(LearnerError::EmptyScreen);
        }
        let mut screened = self.clone();
        screened.screen = Some(subset.to_vec());
        Ok(screened)
    }

    /// Trains on the declared observations of `history` and returns a
    /// masked, clamped predictor.
    pub fn fit(&self, history: &Panel) -> Result<Predictor, LearnerError> {
        let declared: Vec<&Observation> = history.observations().filter(|o| o.declared).collect();
        let bound = history.cost_bound();
        let dims = Some((history.schema().n_x(), history.schema().n_z()));
        if declared.is_empty() {
            return Ok(Predictor {
                bound,
                degenerate: true,
                kind: PredictorKind::Zero,
                dims,
            });
        }
        let targets: Vec<f64> = declared.iter().map(|o| o.y).collect();
        let kind = match &self.kind {
            LearnerKind::Mean => {
                PredictorKind::Constant(targets.iter().sum::<f64>() / targets.len() as f64)
            }
            LearnerKind::Ridge { lambda } => {
                let layout = DesignLayout::new(history.schema(), self.screen.as_deref())?;
                let rows: Vec<Vec<f64>> = declared.iter().map(|o| layout.row(o)).collect();
                let (intercept, coefs, standardizer) = ridge_fit(&rows, &targets, *lambda)?;
                PredictorKind::Linear {
                    layout,
                    standardizer,
                    intercept,
                    coefs,
                }
            }
            LearnerKind::BoostedLinear { rounds, shrinkage } => {
                let layout = DesignLayout::new(history.schema(), self.screen.as_deref())?;
                let rows: Vec<Vec<f64>> = declared.iter().map(|o| layout.row(o)).collect();
                let levels: Vec<Vec<f64>> = declared.iter().map(|o| o.x.clone()).collect();
                let (f0, steps) =
                    fit_boosted(&layout, &rows, &levels, &targets, *rounds, *shrinkage);
                PredictorKind::Boosted { layout, f0, steps }
            }
            LearnerKind::KnnKs {
                k,
                channels,
                weights,
            } => {
                let resolved =
                    resolve_channels(history.schema(), channels, weights, self.screen.as_deref())?;
                let points: Vec<(Vec<Vec<f64>>, f64)> = declared
                    .iter()
                    .map(|o| (channel_samples(&resolved.channels, o), o.y))
                    .collect();
                PredictorKind::Knn(KnnModel {
                    k: *k,
                    channels: resolved,
                    points,
                })
            }
        };
        Ok(Predictor {
            bound,
            degenerate: false,
            kind,
            dims,
        })
    }
}

#[derive(Debug, Clone)]
enum BoostStep {
    /// `value = intercept + slope * row[column]` (shrinkage pre-applied).
    Linear {
        column: usize,
        intercept: f64,
        slope: f64,
    },
    /// Per-level contributions for a categorical covariate; levels unseen
    /// in training fall back to the round's mean residual.
    Levels { x_index: usize, values: Vec<f64> },
}

fn fit_boosted(
    layout: &DesignLayout,
    rows: &[Vec<f64>],
    raw_x: &[Vec<f64>],
    targets: &[f64],
    rounds: usize,
    shrinkage: f64,
) -> (f64, Vec<BoostStep>) {
    let n = targets.len() as f64;
    let f0 = targets.iter().sum::<f64>() / n;
    let mut residuals: Vec<f64> = targets.iter().map(|y| y - f0).collect();
    let mut steps = Vec::new();

    for _ in 0..rounds {
        let r_mean = residuals.iter().sum::<f64>() / n;
        let mut best: Option<(f64, usize)> = None;
        for (index, candidate) in layout.candidates.iter().enumerate() {
            let rss = match candidate {
                Candidate::Continuous { column } => {
                    let values: Vec<f64> = rows.iter().map(|r| r[*column]).collect();
                    match simple_fit(&values, &residuals, r_mean) {
                        Some((a, b)) => residuals
                            .iter()
                            .zip(&values)
                            .map(|(r, v)| {
                                let e = r - a - b * v;
                                e * e
                            })
                            .sum::<f64>(),
                        None => continue, // constant column
                    }
                }
                Candidate::Categorical { x_index, levels } => {
                    match level_means(raw_x, &residuals, *x_index, *levels) {
                        Some(means) => residuals
                            .iter()
                            .zip(raw_x)
                            .map(|(r, x)| {
                                let e = r - means[x[*x_index] as usize];
                                e * e
                            })
                            .sum::<f64>(),
                        None => continue, // single observed level
                    }
                }
            };
            if best.is_none_or(|(b_rss, _)| rss < b_rss) {
                best = Some((rss, index));
            }
        }
        let Some((_, choice)) = best else {
            break; // all-constant design: keep F0 only
        };
        match &layout.candidates[choice] {
            Candidate::Continuous { column } => {
                let values: Vec<f64> = rows.iter().map(|r| r[*column]).collect();
                let (a, b) = simple_fit(&values, &residuals, r_mean).unwrap();
                for (r, v) in residuals.iter_mut().zip(&values) {
                    *r -= shrinkage * (a + b * v);
                }
                steps.push(BoostStep::Linear {
                    column: *column,
                    intercept: shrinkage * a,
                    slope: shrinkage * b,
                });
            }
            Candidate::Categorical { x_index, levels } => {
                let means = level_means(raw_x, &residuals, *x_index, *levels).unwrap();
                for (r, x) in residuals.iter_mut().zip(raw_x) {
                    *r -= shrinkage * means[x[*x_index] as usize];
                }
                steps.push(BoostStep::Levels {
                    x_index: *x_index,
                    values: means.iter().map(|m| shrinkage * m).collect(),
                });
            }
        }
    }
    (f0, steps)
}

/// Least-squares line `a + b v` for the residuals; `None` when the column
/// is constant.
fn simple_fit(values: &[f64], residuals: &[f64], r_mean: f64) -> Option<(f64, f64)> {
    let n = values.len() as f64;
    let v_mean = values.iter().sum::<f64>() / n;
    let mut var = 0.0;
    let mut cov = 0.0;
    for (v, r) in values.iter().zip(residuals) {
        var += (v - v_mean) * (v - v_mean);
        cov += (v - v_mean) * (r - r_mean);
    }
    if var == 0.0 {
        return None;
    }
    let b = cov / var;
    Some((r_mean - b * v_mean, b))
}

/// Mean residual per level; unseen levels fall back to the overall mean.
/// `None` when only one level is observed.
fn level_means(
    raw_x: &[Vec<f64>],
    residuals: &[f64],
    x_index: usize,
    levels: u8,
) -> Option<Vec<f64>> {
    let mut sums = vec![0.0; levels as usize];
    let mut counts = vec![0usize; levels as usize];
    for (x, r) in raw_x.iter().zip(residuals) {
        let code = x[x_index] as usize;
        sums[code] += r;
        counts[code] += 1;
    }
    if counts.iter().filter(|c| **c > 0).count() < 2 {
        return None;
    }
    let overall = residuals.iter().sum::<f64>() / residuals.len() as f64;
    Some(
        sums.iter()
            .zip(&counts)
            .map(|(s, c)| if *c > 0 { s / *c as f64 } else { overall })
            .collect(),
    )
}

#[derive(Debug, Clone)]
enum PredictorKind {
    Zero,
    Constant(f64),
    Linear {
        layout: DesignLayout,
        standardizer: Standardizer,
        intercept: f64,
        coefs: Vec<f64>,
    },
    Boosted {
        layout: DesignLayout,
        f0: f64,
        steps: Vec<BoostStep>,
    },
    Knn(KnnModel),
    Average(Vec<Predictor>),
    Median(Vec<Predictor>),
}

/// Fitted state mapping an observation's features to a predicted cost.
#[derive(Debug, Clone)]
pub struct Predictor {
    bound: f64,
    degenerate: bool,
    kind: PredictorKind,
    /// `(n_x, n_z)` of the fitting schema; `None` for schema-free
    /// predictors.
    dims: Option<(usize, usize)>,
}

impl Predictor {
    /// Masked, clamped prediction: exactly 0 for non-declared inputs,
    /// otherwise the raw model output clamped to `[0, bound]`.
    pub fn predict(&self, obs: &Observation) -> f64 {
        if !obs.declared {
            return 0.0;
        }
        self.raw(obs).clamp(0.0, self.bound)
    }

    fn raw(&self, obs: &Observation) -> f64 {
        match &self.kind {
            PredictorKind::Zero => 0.0,
            PredictorKind::Constant(value) => *value,
            PredictorKind::Linear {
                layout,
                standardizer,
                intercept,
                coefs,
            } => {
                let mut row = layout.row(obs);
                standardizer.apply(&mut row);
                intercept + coefs.iter().zip(&row).map(|(c, v)| c * v).sum::<f64>()
            }
            PredictorKind::Boosted { layout, f0, steps } => {
                let row = layout.row(obs);
                let mut value = *f0;
                for step in steps {
                    value += match step {
                        BoostStep::Linear {
                            column,
                            intercept,
                            slope,
                        } => intercept + slope * row[*column],
                        BoostStep::Levels { x_index, values } => {
                            let code = obs.x[*x_index] as usize;
                            values.get(code).copied().unwrap_or(0.0)
                        }
                    };
                }
                value
            }
            PredictorKind::Knn(model) => model.predict(obs),
            PredictorKind::Average(members) => {
                members.iter().map(|m| m.predict(obs)).sum::<f64>() / members.len() as f64
            }
            PredictorKind::Median(members) => {
                let mut values: Vec<f64> = members.iter().map(|m| m.predict(obs)).collect();
                values.sort_by(|a, b| a.partial_cmp(b).unwrap());
                values[(values.len() - 1) / 2]
            }
        }
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// True when the learner fell back to the constant-zero predictor for
    /// lack of declared training data.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// `(n_x, n_z)` of the fitting schema, when known.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.dims
    }

    /// Constant-zero predictor (used as the degenerate fallback).
    pub fn zero(bound: f64) -> Predictor {
        Predictor {
            bound,
            degenerate: true,
            kind: PredictorKind::Zero,
            dims: None,
        }
    }
}

/// Pointwise mean of the members' (masked, clamped) predictions.
pub fn combine_average(members: Vec<Predictor>) -> Result<Predictor, LearnerError> {
    if members.is_empty() {
        return Err(LearnerError::EmptyCombiner);
    }
    Ok(Predictor {
        bound: members.iter().map(|m| m.bound).fold(0.0, f64::max),
        degenerate: members.iter().all(|m| m.degenerate),
        dims: members[0].dims,
        kind: PredictorKind::Average(members),
    })
}

/// Pointwise median of the members' predictions (lower median for even
/// member counts).
pub fn combine_median(members: Vec<Predictor>) -> Result<Predictor, LearnerError> {
    if members.is_empty() {
        return Err(LearnerError::EmptyCombiner);
    }
    Ok(Predictor {
        bound: members.iter().map(|m| m.bound).fold(0.0, f64::max),
        degenerate: members.iter().all(|m| m.degenerate),
        dims: members[0].dims,
        kind: PredictorKind::Median(members),
    })
}
