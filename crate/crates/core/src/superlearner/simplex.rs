//! Convex-combination weights and the epsilon-net over the simplex.

use serde::{Deserialize, Serialize};

use super::SuperLearnerError;

/// Tolerance on the weight sum.
pub const SIMPLEX_SUM_TOLERANCE: f64 = 1e-12;

/// Nonnegative weights over `J` algorithms summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self, SuperLearnerError> {
        if weights.is_empty() {
            return Err(SuperLearnerError::BadWeights("empty weight vector".into()));
        }
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(SuperLearnerError::BadWeights(
                "weights must be nonnegative and finite".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOLERANCE {
            return Err(SuperLearnerError::BadWeights(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(SimplexWeights(weights))
    }

    /// The `j`-th vertex of the `J`-simplex.
    pub fn vertex(j: usize, len: usize) -> Self {
        let mut weights = vec![0.0; len];
        weights[j] = 1.0;
        SimplexWeights(weights)
    }

    pub fn uniform(len: usize) -> Self {
        SimplexWeights(vec![1.0 / len as f64; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the vertex this point coincides with, if any.
    pub fn vertex_index(&self) -> Option<usize> {
        self.0.iter().position(|w| *w == 1.0)
    }
}

/// All weight vectors whose entries are integer multiples of
/// `1 / ceil(1/eps)` and sum to one: the compositions of `ceil(1/eps)`
/// into `j_count` parts, in lexicographic order. The net always contains
/// the simplex vertices and has cardinality
/// `C(ceil(1/eps) + j_count - 1, j_count - 1)`.
pub fn epsilon_net(j_count: usize, eps: f64) -> Result<Vec<SimplexWeights>, SuperLearnerError> {
    if j_count == 0 {
        return Err(SuperLearnerError::BadWeights(
            "epsilon_net needs at least one algorithm".into(),
        ));
    }
    if eps.is_nan() || eps <= 0.0 || eps > 1.0 {
        return Err(SuperLearnerError::BadEpsilon(eps));
    }
    // Tolerate roundoff so that eps = 1/m yields exactly m steps.
    let steps = (1.0 / eps - 1e-9).ceil().max(1.0) as usize;
    let cardinality = binomial(steps + j_count - 1, j_count - 1);
    if cardinality > MAX_NET_POINTS {
        return Err(SuperLearnerError::BadConfig(format!(
            "epsilon-net over {j_count} algorithms at resolution {eps} has {cardinality} \
             points (limit {MAX_NET_POINTS}); coarsen eps or shrink the algorithm list"
        )));
    }
    let mut out = Vec::with_capacity(cardinality as usize);
    let mut counts = vec![0usize; j_count];
    compose(steps, 0, &mut counts, &mut out);
    Ok(out)
}

/// Refuse to materialize nets past this size; the net is scored once per
/// time step and city, so anything near this is already impractical.
pub const MAX_NET_POINTS: u128 = 2_000_000;

fn compose(remaining: usize, slot: usize, counts: &mut Vec<usize>, out: &mut Vec<SimplexWeights>) {
    if slot + 1 == counts.len() {
        counts[slot] = remaining;
        let steps: usize = counts.iter().sum();
        let weights: Vec<f64> = counts.iter().map(|c| *c as f64 / steps as f64).collect();
        out.push(SimplexWeights(weights));
        return;
    }
    for take in (0..=remaining).rev() {
        counts[slot] = take;
        compose(remaining - take, slot + 1, counts, out);
    }
    counts[slot] = 0;
}

/// Binomial coefficient, exact for the small arguments used here.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 0..k {
        result = result * (n - i) as u128 / (i + 1) as u128;
    }
    result
}
