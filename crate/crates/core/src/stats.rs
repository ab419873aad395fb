//! Small descriptive-statistics helpers over `f64` samples.

use statrs::statistics::Statistics;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().mean()
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    x.iter().variance()
}

/// Standard error of the mean.
pub fn std_error(x: &[f64]) -> f64 {
    (variance(x) / x.len() as f64).sqrt()
}

/// Pearson correlation coefficient; NaN when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let cov = x.iter().covariance(y.iter());
    cov / (variance(x).sqrt() * variance(y).sqrt())
}

/// Linear-interpolation quantile of an ascending-sorted sample
/// (`h = (n - 1) p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of an empty sample");
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

pub fn median(x: &[f64]) -> f64 {
    quantile_sorted(&sorted(x), 0.5)
}

/// Interquartile range `Q3 - Q1`.
pub fn iqr(x: &[f64]) -> f64 {
    let s = sorted(x);
    quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25)
}

/// Sample skewness `m3 / m2^(3/2)` with population moments.
pub fn skewness(x: &[f64]) -> f64 {
    let (m2, m3, _) = central_moments(x);
    m3 / m2.powf(1.5)
}

/// Excess kurtosis `m4 / m2^2 - 3`.
pub fn excess_kurtosis(x: &[f64]) -> f64 {
    let (m2, _, m4) = central_moments(x);
    m4 / (m2 * m2) - 3.0
}

fn central_moments(x: &[f64]) -> (f64, f64, f64) {
    let mu = mean(x);
    let n = x.len() as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mu;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (m2 / n, m3 / n, m4 / n)
}
