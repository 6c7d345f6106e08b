//! k-nearest-neighbor regression under a convex combination of
//! Kolmogorov-Smirnov distances between per-observation feature CDFs.
//!
//! Each channel names a group of continuous covariates; an observation's
//! channel sample is the vector of those values, and the dissimilarity
//! between two observations is `sum_c w_c * KS(ecdf_a_c, ecdf_b_c)`.

use crate::panel::{CovariateKind, CovariateRole, CovariateSchema, Observation};

use super::LearnerError;

/// Resolved reference to one continuous feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum FeatureRef {
    X(usize),
    Z(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct ResolvedChannels {
    pub channels: Vec<Vec<FeatureRef>>,
    pub weights: Vec<f64>,
}

/// Resolves channel member names against the schema, drops members removed
/// by screening, and renormalizes the weights of the surviving channels.
pub(crate) fn resolve_channels(
    schema: &CovariateSchema,
    channels: &[Vec<String>],
    weights: &[f64],
    screen: Option<&[String]>,
) -> Result<ResolvedChannels, LearnerError> {
    if channels.is_empty() || channels.len() != weights.len() {
        return Err(LearnerError::BadHyperparameter(
            "knn_ks: channels and weights must be nonempty and aligned".into(),
        ));
    }
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(LearnerError::BadHyperparameter(
            "knn_ks: weights must be nonnegative with positive sum".into(),
        ));
    }
    let kept = |name: &str| screen.is_none_or(|s| s.iter().any(|n| n == name));
    let mut resolved = Vec::new();
    let mut kept_weights = Vec::new();
    for (members, weight) in channels.iter().zip(weights) {
        if members.is_empty() {
            return Err(LearnerError::BadHyperparameter(
                "knn_ks: empty channel".into(),
            ));
        }
        let mut refs = Vec::new();
        for name in members {
            let entry = schema
                .entries()
                .iter()
                .find(|e| e.name == *name)
                .ok_or_else(|| LearnerError::UnknownCovariate(name.clone()))?;
            if matches!(entry.kind, CovariateKind::Categorical { .. }) {
                return Err(LearnerError::BadHyperparameter(format!(
                    "knn_ks: channel member `{name}` is categorical"
                )));
            }
            if !kept(name) {
                continue;
            }
            refs.push(match entry.role {
                CovariateRole::X => FeatureRef::X(schema.x_position(name).unwrap()),
                CovariateRole::Z => FeatureRef::Z(schema.z_position(name).unwrap()),
            });
        }
        if !refs.is_empty() {
            resolved.push(refs);
            kept_weights.push(*weight);
        }
    }
    if resolved.is_empty() {
        return Err(LearnerError::BadHyperparameter(
            "knn_ks: screening removed every channel member".into(),
        ));
    }
    let total: f64 = kept_weights.iter().sum();
    for w in &mut kept_weights {
        *w /= total;
    }
    Ok(ResolvedChannels {
        channels: resolved,
        weights: kept_weights,
    })
}

/// Sorted channel samples of one observation.
pub(crate) fn channel_samples(channels: &[Vec<FeatureRef>], obs: &Observation) -> Vec<Vec<f64>> {
    channels
        .iter()
        .map(|members| {
            let mut values: Vec<f64> = members
                .iter()
                .map(|m| match *m {
                    FeatureRef::X(i) => obs.x[i],
                    FeatureRef::Z(i) => obs.z[i],
                })
                .collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            values
        })
        .collect()
}

/// Two-sample Kolmogorov-Smirnov statistic between sorted samples.
pub(crate) fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert!(!a.is_empty() && !b.is_empty());
    let (m, n) = (a.len() as f64, b.len() as f64);
    let mut i = 0;
    let mut j = 0;
    let mut sup = 0.0_f64;
    while i < a.len() || j < b.len() {
        let value = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.min(*y),
            (Some(x), None) => *x,
            (None, Some(y)) => *y,
            (None, None) => break,
        };
        while i < a.len() && a[i] <= value {
            i += 1;
        }
        while j < b.len() && b[j] <= value {
            j += 1;
        }
        sup = sup.max((i as f64 / m - j as f64 / n).abs());
    }
    sup
}

#[derive(Debug, Clone)]
pub(crate) struct KnnModel {
    pub k: usize,
    pub channels: ResolvedChannels,
    /// Per training point: sorted channel samples and the observed cost.
    pub points: Vec<(Vec<Vec<f64>>, f64)>,
}

impl KnnModel {
    pub fn predict(&self, obs: &Observation) -> f64 {
        let query = channel_samples(&self.channels.channels, obs);
        let mut scored: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(idx, (samples, _))| {
                let dist: f64 = self
                    .channels
                    .weights
                    .iter()
                    .zip(&query)
                    .zip(samples)
                    .map(|((w, q), s)| w * ks_distance(q, s))
                    .sum();
                (dist, idx)
            })
            .collect();
        scored.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let take = self.k.min(scored.len());
        scored[..take]
            .iter()
            .map(|(_, idx)| self.points[*idx].1)
            .sum::<f64>()
            / take as f64
    }
}
