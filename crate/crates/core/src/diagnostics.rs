//! MCMC output diagnostics.

/// Effective sample size by Geyer's initial monotone sequence estimator.
///
/// Sums of adjacent autocovariance pairs `Γ_m = γ_{2m} + γ_{2m+1}` are
/// accumulated while positive and forced to be non-increasing. A constant
/// series returns its length.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return n as f64;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let g0 = autocov(0);
    if g0 <= 0.0 || !g0.is_finite() {
        return n as f64;
    }
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = autocov(2 * m) + autocov(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        m += 1;
    }
    let asym_var = -g0 + 2.0 * sum;
    if asym_var <= 0.0 {
        return n as f64;
    }
    n as f64 * g0 / asym_var
}

/// Sample mean and standard deviation.
pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}
