//! Fitting growth exponents to pulse counts.

use rand::Rng;

/// Least-squares slope of `ln y` against `ln x`. `None` for fewer than two
/// distinct `x` or a non-positive coordinate.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 1e-12).then(|| sxy / sxx)
}

/// Percentile bootstrap interval of the slope, resampling points with
/// replacement.
pub fn bootstrap_slope_ci<R: Rng>(points: &[(f64, f64)], resamples: usize, level: f64, rng: &mut R) -> Option<(f64, f64)> {
    let mut slopes: Vec<f64> = (0..resamples)
        .filter_map(|_| {
            let sample: Vec<_> = (0..points.len()).map(|_| points[rng.gen_range(0..points.len())]).collect();
            loglog_slope(&sample)
        })
        .collect();
    if slopes.is_empty() {
        return None;
    }
    slopes.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let at = |q: f64| slopes[((slopes.len() - 1) as f64 * q).round() as usize];
    Some((at(tail), at(1.0 - tail)))
}

pub fn median(xs: &mut [u64]) -> Option<u64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_unstable();
    Some(xs[xs.len() / 2])
}
