//! Kraskov-Stögbauer-Grassberger estimator (algorithm 1, max-norm).
//!
//! Exact ties break the strict-inequality neighbor counts, so every
//! coordinate gets independent uniform jitter of amplitude `1e-12 * range`
//! from a deterministic stream before the search.
//!
//! The reported standard error is the spread of the per-point terms over
//! `sqrt(N)`. It ignores the dependence between neighboring terms and is
//! only a rough scale for comparisons.

use rand::Rng;
use rayon::prelude::*;
use statrs::function::gamma::digamma;

use super::{MiEstimate, MiMethod, LN2};
use crate::error::{Error, Result};
use crate::sampling::{role, RngStream};
use crate::stats;

/// Seed of the jitter stream used by [`mi_knn`] and [`mi_knn_multi`].
pub const DEFAULT_JITTER_SEED: u64 = 0x6b6e_6e5f_6a69_7474;

const JITTER_SCALE: f64 = 1e-12;

/// Samples stored point-major: point `i` occupies `data[i*dim..(i+1)*dim]`.
struct Points {
    data: Vec<f64>,
    dim: usize,
}

impl Points {
    fn from_rows(rows: &[Vec<f64>], name: &str) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::param("samples", format!("{name} has zero dimension")));
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch(format!("{name} rows have differing dimensions")));
        }
        Ok(Self {
            data: rows.concat(),
            dim,
        })
    }

    fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn jitter(&mut self, stream: RngStream, name: &str) -> Result<f64> {
        let n = self.len();
        let mut rng = stream.rng();
        let mut amplitude = 0.0;
        for d in 0..self.dim {
            let (lo, hi) = (0..n)
                .map(|i| self.data[i * self.dim + d])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::param("samples", format!("{name} contains non-finite values")));
            }
            let range = hi - lo;
            if range == 0.0 {
                return Err(Error::Degenerate(format!("{name} coordinate {d} is constant")));
            }
            let a = JITTER_SCALE * range;
            amplitude = f64::max(amplitude, a);
            for i in 0..n {
                self.data[i * self.dim + d] += a * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
        Ok(amplitude)
    }
}

/// KSG estimate for scalar samples with `k` neighbors.
pub fn mi_knn(x: &[f64], y: &[f64], k: usize) -> Result<MiEstimate> {
    mi_knn_with_jitter(x, y, k, RngStream::new(DEFAULT_JITTER_SEED))
}

/// As [`mi_knn`] with a caller-chosen jitter stream.
pub fn mi_knn_with_jitter(x: &[f64], y: &[f64], k: usize, jitter: RngStream) -> Result<MiEstimate> {
    let to_rows = |v: &[f64]| v.iter().map(|&t| vec![t]).collect::<Vec<_>>();
    estimate(Points::from_rows(&to_rows(x), "x")?, Points::from_rows(&to_rows(y), "y")?, k, jitter)
}

/// KSG estimate for vector samples (one `Vec` per sample).
pub fn mi_knn_multi(x: &[Vec<f64>], y: &[Vec<f64>], k: usize) -> Result<MiEstimate> {
    estimate(Points::from_rows(x, "x")?, Points::from_rows(y, "y")?, k, RngStream::new(DEFAULT_JITTER_SEED))
}

fn estimate(mut x: Points, mut y: Points, k: usize, jitter: RngStream) -> Result<MiEstimate> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("x has {n} samples, y has {}", y.len())));
    }
    if k == 0 {
        return Err(Error::param("k", "must be >= 1"));
    }
    if n <= 10 * k {
        return Err(Error::param("sample count", format!("need more than {} samples for k = {k}, got {n}", 10 * k)));
    }
    let ax = x.jitter(jitter.derive(role::JITTER).derive(0), "x")?;
    let ay = y.jitter(jitter.derive(role::JITTER).derive(1), "y")?;

    let terms: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            // k smallest joint distances, ascending
            let mut nearest: Vec<f64> = Vec::with_capacity(k + 1);
            for j in (0..n).filter(|&j| j != i) {
                let d = x.dist(i, j).max(y.dist(i, j));
                if nearest.len() < k || d < nearest[k - 1] {
                    let pos = nearest.partition_point(|&t| t <= d);
                    nearest.insert(pos, d);
                    nearest.truncate(k);
                }
            }
            let eps = nearest[k - 1];
            let nx = (0..n).filter(|&j| j != i && x.dist(i, j) < eps).count();
            let ny = (0..n).filter(|&j| j != i && y.dist(i, j) < eps).count();
            digamma((nx + 1) as f64) + digamma((ny + 1) as f64)
        })
        .collect();
    let mean_term = terms.iter().sum::<f64>() / n as f64;
    let nats = digamma(k as f64) + digamma(n as f64) - mean_term;
    let mut est = MiEstimate::new(nats / LN2, MiMethod::Knn, n);
    est.std_error = Some(stats::std_error(&terms) / LN2);
    Ok(est
        .with_diagnostic("k", k as f64)
        .with_diagnostic("jitter_x", ax)
        .with_diagnostic("jitter_y", ay))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::standard_normal;

    fn gaussian_pair(n: usize, rho: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = RngStream::new(seed).rng();
        (0..n)
            .map(|_| {
                let a: f64 = standard_normal(&mut rng);
                let b: f64 = standard_normal(&mut rng);
                (a, rho * a + (1.0 - rho * rho).sqrt() * b)
            })
            .unzip()
    }

    #[test]
    fn correlated_gaussian() {
        let (x, y) = gaussian_pair(2000, 0.9, 3);
        let exact = -0.5 * (1.0f64 - 0.81).log2();
        let est = mi_knn(&x, &y, 3).unwrap();
        assert!((est.bits - exact).abs() < 0.1 * exact, "{} vs {exact}", est.bits);
    }

    #[test]
    fn identical_symbols_give_entropy() {
        let x: Vec<f64> = (0..1000).map(|i| (i % 8) as f64).collect();
        let est = mi_knn(&x, &x, 3).unwrap();
        assert!((est.bits - 3.0).abs() < 0.3, "{}", est.bits);
    }

    #[test]
    fn vector_variant_matches_scalar() {
        let (x, y) = gaussian_pair(500, 0.6, 4);
        let a = mi_knn(&x, &y, 4).unwrap();
        let xr: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
        let yr: Vec<Vec<f64>> = y.iter().map(|&v| vec![v]).collect();
        let b = mi_knn_multi(&xr, &yr, 4).unwrap();
        assert_eq!(a.bits, b.bits);
    }

    #[test]
    fn rejects_bad_input() {
        let x: Vec<f64> = (0..50).map(f64::from).collect();
        assert!(mi_knn(&x, &x, 5).is_err());
        assert!(mi_knn(&x, &x, 0).is_err());
        assert!(mi_knn(&x, &x[..40], 1).is_err());
        assert!(matches!(mi_knn(&x, &[2.0; 50], 1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn deterministic() {
        let (x, y) = gaussian_pair(300, 0.5, 5);
        assert_eq!(mi_knn(&x, &y, 3).unwrap(), mi_knn(&x, &y, 3).unwrap());
    }
}
