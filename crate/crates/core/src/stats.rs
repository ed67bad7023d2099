//! Summary statistics shared by the noise checks, diagnostics and harness.

use serde::{Deserialize, Serialize};

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Linear-interpolation quantile (the "type 7" rule) of unsorted data.
///
/// NaN values sort last; infinities are kept.
pub fn quantile(xs: &[f64], level: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    quantile_sorted(&v, level)
}

pub fn quantile_sorted(v: &[f64], level: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let level = level.clamp(0.0, 1.0);
    let pos = level * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi || v[lo] == v[hi] {
        v[lo]
    } else {
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    }
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Median-of-means estimate over `blocks` contiguous blocks, together with a
/// robust spread: the median absolute deviation of the block means, scaled by
/// 1.4826 to a standard deviation and by 1.2533/√blocks to the standard error
/// of a median.
pub fn median_of_means(xs: &[f64], blocks: usize) -> (f64, f64) {
    let blocks = blocks.clamp(1, xs.len().max(1));
    let size = xs.len() / blocks;
    let means: Vec<f64> = (0..blocks)
        .map(|b| {
            let chunk = &xs[b * size..(b + 1) * size];
            chunk.iter().sum::<f64>() / size as f64
        })
        .collect();
    let m = median(&means);
    let dev: Vec<f64> = means.iter().map(|x| (x - m).abs()).collect();
    let mad = median(&dev);
    (m, 1.2533 * 1.4826 * mad / (blocks as f64).sqrt())
}

/// Ordinary least squares fit of `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    LinearFit {
        slope,
        intercept,
        r_squared,
    }
}

/// Standard error of a binomial proportion.
pub fn binomial_stderr(rate: f64, n: usize) -> f64 {
    (rate * (1.0 - rate) / n as f64).sqrt()
}
