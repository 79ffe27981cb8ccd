//! Small shared numeric helpers.

/// Unweighted sample quantile with linear interpolation between order
/// statistics (the h = (n-1)p convention). `values` need not be sorted.
pub(crate) fn sample_quantile(values: &[f64], p: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in quantile input"));
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        v[lo]
    } else {
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    }
}

/// Minimum, lower quartile, median, upper quartile, maximum.
pub(crate) fn five_number_summary(values: &[f64]) -> [f64; 5] {
    [
        sample_quantile(values, 0.0),
        sample_quantile(values, 0.25),
        sample_quantile(values, 0.5),
        sample_quantile(values, 0.75),
        sample_quantile(values, 1.0),
    ]
}
