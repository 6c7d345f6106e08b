//! Small shared numeric helpers.

/// Left-continuous (type-1) empirical quantile of a sorted slice.
///
/// `Q(p)` is the smallest sample value `x` with `F(x) >= p`; for `p <= 0`
/// this is the first element.
pub(crate) fn quantile_type1(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if p <= 0.0 {
        return sorted[0];
    }
    let idx = (n as f64 * p).ceil() as usize;
    sorted[idx.clamp(1, n) - 1]
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation (divide by n).
pub(crate) fn population_sd(values: &[f64]) -> f64 {
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}

/// Deterministic 64-bit mix used to derive per-slice and per-permutation
/// RNG seeds from a master seed (splitmix64 finalizer).
pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
