//! Variable-importance measures on meta-learner predictions: absolute
//! Spearman rank correlation for continuous covariates, the correlation
//! ratio for categorical ones, and seeded permutation significance tests
//! with group-level reporting.
//!
//! Both measures lie in `[0, 1]`. Degenerate inputs (constant covariate or
//! constant predictions) score 0 with a flag and a permutation p-value
//! of 1. The p-value uses the add-one estimator, one plus the count of
//! permuted statistics at or above the observed value over `n_perm + 1`;
//! the maximum permuted statistic is reported alongside for the direct
//! observed-vs-max comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::stats::mix_seed;

#[derive(Debug, Error)]
pub enum ImportanceError {
    #[error("paired sequences must have equal length >= 3 (got {0} and {1})")]
    BadLength(usize, usize),
    #[error("non-finite value in {0}")]
    NotFinite(&'static str),
    #[error("categorical level count {0} outside 2..=5")]
    BadLevelCount(u8),
    #[error("level code {0} out of range for {1} levels")]
    BadLevelCode(usize, u8),
    #[error("n_perm must be >= 1")]
    BadPermCount,
    #[error("covariate `{0}` has no group assignment")]
    UnassignedCovariate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Spearman,
    CorrelationRatio,
}

/// Importance of one covariate for the meta-learner's predictions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceScore {
    pub covariate: String,
    pub group: String,
    pub kind: MeasureKind,
    pub rho: f64,
    pub degenerate: bool,
    pub p_value: f64,
    pub perm_max: f64,
}

/// Average ranks (1-based) with mean-rank treatment of ties.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn is_constant(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

/// Absolute Spearman rank correlation with average-rank tie handling.
/// Returns `(rho, degenerate)`; degenerate inputs score 0.
pub fn spearman_abs(
    predictions: &[f64],
    covariate: &[f64],
) -> Result<(f64, bool), ImportanceError> {
    if predictions.len() != covariate.len() || predictions.len() < 3 {
        return Err(ImportanceError::BadLength(
            predictions.len(),
            covariate.len(),
        ));
    }
    if predictions.iter().any(|v| !v.is_finite()) {
        return Err(ImportanceError::NotFinite("predictions"));
    }
    if covariate.iter().any(|v| !v.is_finite()) {
        return Err(ImportanceError::NotFinite("covariate"));
    }
    if is_constant(predictions) || is_constant(covariate) {
        return Ok((0.0, true));
    }
    let ry = average_ranks(predictions);
    let rc = average_ranks(covariate);
    let perm: Vec<usize> = (0..predictions.len()).collect();
    let stat = RankCorrelation::new(&ry, &rc).statistic(&perm);
    Ok((stat, false))
}

/// Correlation ratio `sqrt(between-level SS / total SS)` of predictions
/// grouped by a categorical covariate with `v` levels. Returns
/// `(rho, degenerate)`; zero total variance scores 0 with the flag set.
pub fn correlation_ratio(
    predictions: &[f64],
    levels: &[usize],
    v: u8,
) -> Result<(f64, bool), ImportanceError> {
    if predictions.len() != levels.len() || predictions.len() < 3 {
        return Err(ImportanceError::BadLength(predictions.len(), levels.len()));
    }
    if predictions.iter().any(|v| !v.is_finite()) {
        return Err(ImportanceError::NotFinite("predictions"));
    }
    if !(2..=5).contains(&v) {
        return Err(ImportanceError::BadLevelCount(v));
    }
    for &level in levels {
        if level >= v as usize {
            return Err(ImportanceError::BadLevelCode(level, v));
        }
    }
    if is_constant(predictions) {
        return Ok((0.0, true));
    }
    let grouped = GroupedRatio::new(predictions, v);
    Ok((grouped.statistic_direct(levels), false))
}

/// Outcome of a permutation significance test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationOutcome {
    pub p_value: f64,
    pub max_statistic: f64,
}

/// Runs `n_perm` uniformly drawn pairings through `statistic` and compares
/// with the observed value. Permutations use per-index RNG streams derived
/// from the seed, so results are reproducible and independent of the
/// parallel execution order.
pub fn permutation_test<F>(
    observed: f64,
    n: usize,
    statistic: F,
    n_perm: usize,
    seed: u64,
) -> Result<PermutationOutcome, ImportanceError>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    if n_perm == 0 {
        return Err(ImportanceError::BadPermCount);
    }
    let identity: Vec<usize> = (0..n).collect();
    let results: Vec<(bool, f64)> = (0..n_perm)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(seed, i as u64));
            let mut perm = identity.clone();
            perm.shuffle(&mut rng);
            let stat = statistic(&perm);
            (stat >= observed, stat)
        })
        .collect();
    let exceed = results.iter().filter(|(ge, _)| *ge).count();
    let max_statistic = results.iter().map(|(_, s)| *s).fold(f64::MIN, f64::max);
    Ok(PermutationOutcome {
        p_value: (1 + exceed) as f64 / (n_perm + 1) as f64,
        max_statistic,
    })
}

/// Precomputed rank vectors for fast permuted Spearman statistics.
struct RankCorrelation {
    ry: Vec<f64>,
    rc: Vec<f64>,
    mean: f64,
    denom: f64,
}

impl RankCorrelation {
    fn new(ry: &[f64], rc: &[f64]) -> Self {
        let n = ry.len() as f64;
        // both rank vectors share the mean (n+1)/2
        let mean = (n + 1.0) / 2.0;
        let sy: f64 = ry.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>();
        let sc: f64 = rc.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>();
        RankCorrelation {
            ry: ry.to_vec(),
            rc: rc.to_vec(),
            mean,
            denom: (sy * sc).sqrt(),
        }
    }

    /// |corr(ry, rc[perm])|.
    fn statistic(&self, perm: &[usize]) -> f64 {
        let cross: f64 = self
            .ry
            .iter()
            .zip(perm)
            .map(|(y, &p)| (y - self.mean) * (self.rc[p] - self.mean))
            .sum();
        (cross / self.denom).abs().min(1.0)
    }
}

/// Precomputed sums for fast permuted correlation-ratio statistics.
struct GroupedRatio {
    y: Vec<f64>,
    y_mean: f64,
    total_ss: f64,
    v: usize,
}

impl GroupedRatio {
    fn new(y: &[f64], v: u8) -> Self {
        let n = y.len() as f64;
        let y_mean = y.iter().sum::<f64>() / n;
        let total_ss = y.iter().map(|p| (p - y_mean) * (p - y_mean)).sum();
        GroupedRatio {
            y: y.to_vec(),
            y_mean,
            total_ss,
            v: v as usize,
        }
    }

    fn ratio_from_groups(&self, sums: &[f64], counts: &[usize]) -> f64 {
        let mut between = 0.0;
        for (sum, &count) in sums.iter().zip(counts) {
            if count > 0 {
                let mean = sum / count as f64;
                between += count as f64 * (mean - self.y_mean) * (mean - self.y_mean);
            }
        }
        (between / self.total_ss).clamp(0.0, 1.0).sqrt()
    }

    fn statistic_direct(&self, levels: &[usize]) -> f64 {
        let mut sums = vec![0.0; self.v];
        let mut counts = vec![0usize; self.v];
        for (p, &level) in self.y.iter().zip(levels) {
            sums[level] += p;
            counts[level] += 1;
        }
        self.ratio_from_groups(&sums, &counts)
    }

    fn statistic_permuted(&self, levels: &[usize], perm: &[usize]) -> f64 {
        let mut sums = vec![0.0; self.v];
        let mut counts = vec![0usize; self.v];
        for (p, &idx) in self.y.iter().zip(perm) {
            let level = levels[idx];
            sums[level] += p;
            counts[level] += 1;
        }
        self.ratio_from_groups(&sums, &counts)
    }
}

/// Scores one continuous covariate: measure plus permutation test.
pub fn score_continuous(
    covariate_name: &str,
    group: &str,
    predictions: &[f64],
    covariate: &[f64],
    n_perm: usize,
    seed: u64,
) -> Result<ImportanceScore, ImportanceError> {
    let (rho, degenerate) = spearman_abs(predictions, covariate)?;
    let (p_value, perm_max) = if degenerate {
        (1.0, 0.0)
    } else {
        let ry = average_ranks(predictions);
        let rc = average_ranks(covariate);
        let corr = RankCorrelation::new(&ry, &rc);
        let outcome = permutation_test(
            rho,
            predictions.len(),
            |perm| corr.statistic(perm),
            n_perm,
            seed,
        )?;
        (outcome.p_value, outcome.max_statistic)
    };
    Ok(ImportanceScore {
        covariate: covariate_name.to_owned(),
        group: group.to_owned(),
        kind: MeasureKind::Spearman,
        rho,
        degenerate,
        p_value,
        perm_max,
    })
}

/// Scores one categorical covariate: measure plus permutation test.
pub fn score_categorical(
    covariate_name: &str,
    group: &str,
    predictions: &[f64],
    levels: &[usize],
    v: u8,
    n_perm: usize,
    seed: u64,
) -> Result<ImportanceScore, ImportanceError> {
    let (rho, degenerate) = correlation_ratio(predictions, levels, v)?;
    let (p_value, perm_max) = if degenerate {
        (1.0, 0.0)
    } else {
        let grouped = GroupedRatio::new(predictions, v);
        let outcome = permutation_test(
            rho,
            predictions.len(),
            |perm| grouped.statistic_permuted(levels, perm),
            n_perm,
            seed,
        )?;
        (outcome.p_value, outcome.max_statistic)
    };
    Ok(ImportanceScore {
        covariate: covariate_name.to_owned(),
        group: group.to_owned(),
        kind: MeasureKind::CorrelationRatio,
        rho,
        degenerate,
        p_value,
        perm_max,
    })
}

/// Per-group roll-up of covariate scores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub members: usize,
    pub rho_max: f64,
    pub rho_mean: f64,
    /// True when every member's p-value is at or below `alpha`.
    pub significant: bool,
}

/// Groups scores by their group label (sorted by name). Every covariate
/// must carry a nonempty group.
pub fn group_report(
    scores: &[ImportanceScore],
    alpha: f64,
) -> Result<Vec<GroupSummary>, ImportanceError> {
    let mut by_group: std::collections::BTreeMap<&str, Vec<&ImportanceScore>> =
        std::collections::BTreeMap::new();
    for score in scores {
        if score.group.is_empty() {
            return Err(ImportanceError::UnassignedCovariate(
                score.covariate.clone(),
            ));
        }
        by_group.entry(&score.group).or_default().push(score);
    }
    Ok(by_group
        .into_iter()
        .map(|(group, members)| GroupSummary {
            group: group.to_owned(),
            members: members.len(),
            rho_max: members.iter().map(|s| s.rho).fold(f64::MIN, f64::max),
            rho_mean: members.iter().map(|s| s.rho).sum::<f64>() / members.len() as f64,
            significant: members.iter().all(|s| s.p_value <= alpha),
        })
        .collect())
}
