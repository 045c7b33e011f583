//! Landscapes by brute force: k-th largest tent value at each grid point.

pub fn kth_largest_tent(pairs: &[(f64, f64)], k: usize, t: f64) -> f64 {
    let mut values: Vec<f64> = pairs
        .iter()
        .map(|&(b, d)| (t - b).min(d - t).max(0.0))
        .collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values.get(k - 1).copied().unwrap_or(0.0)
}

pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}
