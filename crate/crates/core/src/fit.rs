//! Small regression helpers used by the experiments.

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    linear_fit(&lx, &ly).0
}

/// Smallest constant `C` with `y ≤ C·x` on all pairs.
pub fn fit_constant(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| b.abs() / a)
        .fold(0.0, f64::max)
}

/// Error-bar decrease test: step `k → k+1` counts as a decrease when the
/// later upper bar lies below the earlier lower bar. Returns the number of
/// such steps.
pub fn decreasing_steps(values: &[f64], errors: &[f64]) -> usize {
    values
        .windows(2)
        .zip(errors.windows(2))
        .filter(|(v, e)| v[1] + e[1] < v[0] - e[0])
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power_law() {
        let x = [0.1, 0.2, 0.4, 0.8];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(2.5)).collect();
        assert!((loglog_slope(&x, &y) - 2.5).abs() < 1e-12);
        assert!((fit_constant(&x, &[0.1, 0.1, 0.1, 0.1]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn counts_separated_decreases() {
        assert_eq!(decreasing_steps(&[1.0, 0.5, 0.45], &[0.1, 0.1, 0.1]), 1);
        assert_eq!(decreasing_steps(&[1.0, 0.5, 0.1], &[0.01, 0.01, 0.01]), 2);
    }
}
