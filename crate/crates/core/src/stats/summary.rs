use serde::Serialize;

use crate::error::{Error, Result};

/// Normal-consistency factor for the median absolute deviation.
pub const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats {
    pub mean: f64,
    /// Unbiased (n - 1) standard deviation.
    pub sd: f64,
    pub median: f64,
    /// `1.4826 * median(|x - median(x)|)`.
    pub mad_scaled: f64,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance; NaN for fewer than two values.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn summary_stats(values: &[f64]) -> Result<SummaryStats> {
    if values.len() < 2 {
        return Err(Error::Domain(format!(
            "summary needs at least two values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("summary of non-finite values".into()));
    }
    let med = median(values);
    let abs_dev: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    Ok(SummaryStats {
        mean: mean(values),
        sd: sample_variance(values).sqrt(),
        median: med,
        mad_scaled: MAD_SCALE * median(&abs_dev),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_values() {
        let s = summary_stats(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.sd, s.median, s.mad_scaled), (1.0, 0.0, 1.0, 0.0));
    }

    #[test]
    fn hand_computed() {
        let s = summary_stats(&[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.median, 2.0);
        assert_abs_diff_eq!(s.sd, 2.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.sd, 1.5811, epsilon = 1e-4);
        // |x - 2| = 2,1,0,1,2 -> median 1
        assert_abs_diff_eq!(s.mad_scaled, MAD_SCALE, epsilon = 1e-12);
    }

    #[test]
    fn too_short() {
        assert!(summary_stats(&[1.0]).is_err());
        assert!(summary_stats(&[]).is_err());
    }

    #[test]
    fn even_median() {
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
