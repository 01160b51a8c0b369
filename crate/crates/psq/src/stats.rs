//! One-sample Kolmogorov-Smirnov statistic and bootstrap confidence
//! intervals for replication means.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
}

/// `sup_x |F_N(x) - cdf(x)|` over the sorted sample points, both one-sided
/// gaps included.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64, StatsError> {
    const MIN: usize = 20;
    if samples.len() < MIN {
        return Err(StatsError::TooFewSamples {
            min: MIN,
            got: samples.len(),
        });
    }
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in xs.iter().enumerate() {
        let f = cdf(*x).clamp(0.0, 1.0);
        let hi = (i + 1) as f64 / n - f;
        let lo = f - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    Ok(d)
}

/// Asymptotic critical value of the one-sample KS test at level 0.01.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Percentile bootstrap confidence interval for the mean.
pub fn bootstrap_mean_ci<R: Rng + ?Sized>(
    values: &[f64],
    resamples: usize,
    level: f64,
    rng: &mut R,
) -> (f64, f64) {
    assert!(!values.is_empty() && (0.0..1.0).contains(&(1.0 - level)));
    let n = values.len();
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut acc = 0.0;
        for _ in 0..n {
            acc += values[rng.gen_range(0..n)];
        }
        means.push(acc / n as f64);
    }
    means.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    let lo_idx = ((resamples as f64 * tail) as usize).min(resamples - 1);
    let hi_idx = ((resamples as f64 * (1.0 - tail)) as usize).min(resamples - 1);
    (means[lo_idx], means[hi_idx])
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
