//! Reconstruction metrics and chain diagnostics.

use crate::error::{Error, Result};
use crate::field::ImageField;

/// `10 log10 ||x||^2 / ||x - est||^2`; +inf when `est` equals `x`.
pub fn snr_db(truth: &ImageField, estimate: &ImageField) -> f64 {
    let err = truth.sub(estimate).norm_sq();
    if err == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (truth.norm_sq() / err).log10()
}

/// `10 log10 255^2 / (N^{-1} ||x - est||^2)` on the fixed [0, 255] pixel range.
pub fn psnr_db(truth: &ImageField, estimate: &ImageField) -> f64 {
    let mse = truth.sub(estimate).norm_sq() / truth.len() as f64;
    if mse == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (255.0 * 255.0 / mse).log10()
}

/// Improvement in SNR over the (filled) observation:
/// `10 log10 ||x - y||^2 / ||x - est||^2`.
pub fn isnr_db(truth: &ImageField, y_filled: &ImageField, estimate: &ImageField) -> f64 {
    let err = truth.sub(estimate).norm_sq();
    if err == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (truth.sub(y_filled).norm_sq() / err).log10()
}

/// Empirical autocorrelation of a scalar trace, normalized so lag 0 is 1.
pub fn acf(trace: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if trace.len() < 2 {
        return Err(Error::Parameter("acf needs at least two samples".into()));
    }
    let n = trace.len();
    let max_lag = max_lag.min(n - 1);
    let mean = trace.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = trace.iter().map(|v| v - mean).collect();
    let var = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if var == 0.0 {
        return Err(Error::Parameter("acf of a constant trace is undefined".into()));
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let cov = centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64;
        out.push(cov / var);
    }
    Ok(out)
}

/// Per-pixel empirical quantiles at `(1 - level)/2` and `1 - (1 - level)/2`
/// over a set of kept samples.
pub fn credibility(samples: &[ImageField], level: f64) -> Result<(ImageField, ImageField)> {
    if samples.is_empty() {
        return Err(Error::Parameter("credibility needs kept samples".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Parameter("credibility level must be in (0, 1)".into()));
    }
    let shape = samples[0].shape();
    let n = samples.len();
    let lo_q = (1.0 - level) / 2.0;
    let hi_q = 1.0 - lo_q;
    let mut low = ImageField::zeros(shape.0, shape.1);
    let mut high = ImageField::zeros(shape.0, shape.1);
    let mut column = vec![0.0; n];
    for idx in 0..samples[0].len() {
        for (slot, s) in samples.iter().enumerate() {
            column[slot] = s.as_slice()[idx];
        }
        column.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
        low.as_mut_slice()[idx] = empirical_quantile(&column, lo_q);
        high.as_mut_slice()[idx] = empirical_quantile(&column, hi_q);
    }
    Ok((low, high))
}

/// Standard error of the mean of a possibly autocorrelated series, by
/// non-overlapping batch means. Falls back to the i.i.d. formula when the
/// series is too short to batch.
pub fn batch_means_se(series: &[f64], batches: usize) -> Result<f64> {
    if series.len() < 4 {
        return Err(Error::Parameter("batch-means SE needs at least 4 samples".into()));
    }
    let b = batches.clamp(2, series.len() / 2);
    let m = series.len() / b;
    let means: Vec<f64> = (0..b)
        .map(|k| series[k * m..(k + 1) * m].iter().sum::<f64>() / m as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|v| (v - grand) * (v - grand)).sum::<f64>() / (b as f64 - 1.0);
    Ok((var / b as f64).sqrt())
}

/// Linear-interpolation quantile of a sorted slice.
fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let idx = pos.floor() as usize;
    let frac = pos - idx as f64;
    if idx + 1 < n {
        sorted[idx] * (1.0 - frac) + sorted[idx + 1] * frac
    } else {
        sorted[n - 1]
    }
}
