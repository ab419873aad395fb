use super::{MiEstimate, MiMethod, LN2};
use crate::error::{Error, Result};
use crate::stats::{quantile_sorted, sorted};

/// Assigns each value to one of `bins` equal-frequency bins. Edges are
/// sample quantiles, and equal values always share a bin.
pub fn equal_frequency_bins(x: &[f64], bins: usize) -> Vec<usize> {
    let s = sorted(x);
    let edges: Vec<f64> = (1..bins).map(|j| quantile_sorted(&s, j as f64 / bins as f64)).collect();
    x.iter().map(|&v| edges.partition_point(|&e| e < v)).collect()
}

/// Plug-in MI of the equal-frequency 2-D histogram.
///
/// Diagnostics: `bias_bits` is the first-order plug-in bias
/// `(bins - 1)^2 / (2 N ln 2)`; `occupied_x` / `occupied_y` count non-empty
/// marginal bins.
pub fn mi_histogram(x: &[f64], y: &[f64], bins: usize) -> Result<MiEstimate> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("x has {} samples, y has {}", x.len(), y.len())));
    }
    if bins < 2 {
        return Err(Error::param("bins", "need at least 2"));
    }
    let n = x.len();
    if n < 10 * bins {
        return Err(Error::param("sample count", format!("{n} samples is fewer than 10 per bin for {bins} bins")));
    }
    for (name, v) in [("x", x), ("y", y)] {
        if v.iter().any(|t| !t.is_finite()) {
            return Err(Error::param("samples", format!("{name} contains non-finite values")));
        }
        let first = v[0];
        if v.iter().all(|&t| t == first) {
            return Err(Error::Degenerate(format!("{name} is constant")));
        }
    }
    let bx = equal_frequency_bins(x, bins);
    let by = equal_frequency_bins(y, bins);
    let mut joint = vec![0usize; bins * bins];
    let (mut mx, mut my) = (vec![0usize; bins], vec![0usize; bins]);
    for (&i, &j) in bx.iter().zip(&by) {
        joint[i * bins + j] += 1;
        mx[i] += 1;
        my[j] += 1;
    }
    let nf = n as f64;
    let mut nats = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let c = joint[i * bins + j];
            if c > 0 {
                let c = c as f64;
                nats += c / nf * (c * nf / (mx[i] as f64 * my[j] as f64)).ln();
            }
        }
    }
    let b = bins as f64;
    Ok(MiEstimate::new(nats / LN2, MiMethod::Histogram, n)
        .with_diagnostic("bins", b)
        .with_diagnostic("bias_bits", (b - 1.0).powi(2) / (2.0 * nf * LN2))
        .with_diagnostic("occupied_x", mx.iter().filter(|&&c| c > 0).count() as f64)
        .with_diagnostic("occupied_y", my.iter().filter(|&&c| c > 0).count() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{standard_normal, RngStream};
    use rand::Rng;

    #[test]
    fn identity_of_distinct_samples_gives_log_bins() {
        let mut rng = RngStream::new(1).rng();
        let x: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let est = mi_histogram(&x, &x, 8).unwrap();
        assert!((est.bits - 3.0).abs() < 1e-12, "{}", est.bits);
    }

    #[test]
    fn balanced_symbols() {
        let x: Vec<f64> = (0..1600).map(|i| (i % 8) as f64).collect();
        let est = mi_histogram(&x, &x, 8).unwrap();
        assert!((est.bits - 3.0).abs() < 1e-12);
        assert_eq!(est.diagnostic("occupied_x"), Some(8.0));
    }

    #[test]
    fn independent_inputs_stay_near_bias() {
        let mut rng = RngStream::new(2).rng();
        let x: Vec<f64> = (0..5000).map(|_| standard_normal(&mut rng)).collect();
        let y: Vec<f64> = (0..5000).map(|_| standard_normal(&mut rng)).collect();
        let est = mi_histogram(&x, &y, 8).unwrap();
        let bias = est.diagnostic("bias_bits").unwrap();
        assert!(est.bits < 3.0 * bias, "{} vs bias {bias}", est.bits);
    }

    #[test]
    fn input_validation() {
        let x = vec![1.0; 100];
        let y: Vec<f64> = (0..100).map(f64::from).collect();
        assert!(matches!(mi_histogram(&x, &y, 4), Err(Error::Degenerate(_))));
        assert!(mi_histogram(&y, &y[..99], 4).is_err());
        assert!(mi_histogram(&y, &y, 11).is_err());
        assert!(mi_histogram(&y, &y, 1).is_err());
    }

    #[test]
    fn ties_share_a_bin() {
        let x = [0.0, 0.0, 0.0, 1.0, 2.0, 3.0];
        let b = equal_frequency_bins(&x, 2);
        assert_eq!(b[0], b[1]);
        assert_eq!(b[1], b[2]);
        assert_eq!(b[5], 1);
    }
}
