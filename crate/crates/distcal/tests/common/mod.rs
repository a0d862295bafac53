//! Test-side oracles, independent of the library's implementation paths:
//! a naive two-pass mean/covariance, the normal CDF via an erf
//! approximation, and the Kolmogorov–Smirnov statistic.

#![allow(dead_code)]

/// Naive two-pass mean and unbiased covariance over plain nested loops.
pub fn naive_mean_cov(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = samples.len();
    let d = samples[0].len();
    let mut mean = vec![0.0; d];
    for sample in samples {
        for j in 0..d {
            mean[j] += sample[j];
        }
    }
    for value in &mut mean {
        *value /= n as f64;
    }
    let mut cov = vec![vec![0.0; d]; d];
    if n > 1 {
        for sample in samples {
            for i in 0..d {
                for j in 0..d {
                    cov[i][j] += (sample[i] - mean[i]) * (sample[j] - mean[j]);
                }
            }
        }
        for row in &mut cov {
            for value in row {
                *value /= (n - 1) as f64;
            }
        }
    }
    (mean, cov)
}

/// |a − b| within `rel` of max(1, |b|): relative with an absolute floor for
/// near-zero references.
pub fn close_rel(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1.0)
}

/// Abramowitz–Stegun 7.1.26 rational approximation, |error| < 1.5e-7.
pub fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

pub fn normal_cdf(x: f64, mean: f64, std_dev: f64) -> f64 {
    0.5 * (1.0 + erf((x - mean) / (std_dev * std::f64::consts::SQRT_2)))
}

/// Two-sided KS statistic of a sample against a continuous CDF.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = samples.len() as f64;
    let mut worst = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let value = cdf(x);
        let above = (i as f64 + 1.0) / n - value;
        let below = value - i as f64 / n;
        worst = worst.max(above).max(below);
    }
    worst
}

/// Critical KS value at significance 0.01: sqrt(ln(2/α) / (2n)).
pub fn ks_critical_001(n: usize) -> f64 {
    ((2.0f64 / 0.01).ln() / (2.0 * n as f64)).sqrt()
}
