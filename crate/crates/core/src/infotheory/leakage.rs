//! Monte-Carlo estimate of the leakage bound `I(Z_E; w)`.
//!
//! Colluding Eves see `Z_E = H_eve(w) X_A + N_E` while Alice probes. Each
//! sample draws `w` uniformly from a discrete alphabet, a probe and noise,
//! then evaluates `log p(Z_E | w') ` for every candidate `w'`:
//!
//! * `Analytic`: `X_A` is Gaussian, so given `w'` column `d` of `Z_E` is
//!   `CN(0, R_d)` with `R_d = H diag(2 delta^2_{:,d}) H^H + 2 eps^2 I`.
//! * `Nested`: averages the conditional density over fresh probe draws.
//! * `KnownProbe`: `X_A` is a fixed public matrix and `Z_E | w'` is
//!   `CN(H X_0, 2 eps^2 I)`.
//!
//! The per-sample term is `log p(Z_E | w) - log p(Z_E)` with `p(Z_E)` the
//! uniform average over candidates. All densities stay in the log domain.
//! When the alphabet is too large to enumerate, a fixed random candidate set
//! stands in for the sum; that estimate is biased upward and flagged.

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;

use super::{MiEstimate, MiMethod, LN2};
use crate::channel::DirectChannels;
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::sampling::{complex_gaussian_matrix, discrete_phase, noise_matrix, role, standard_normal, IrsPhaseVector, RngStream, VarianceProfile};
use crate::scalar::Real;
use crate::channel::ChannelSet;
use crate::theory::{legitimate_moments, GaussianApprox};

const LN_PI: f64 = 1.144_729_885_849_400_2;

#[derive(Debug, Clone, PartialEq)]
pub enum InnerExpectation<T: Real> {
    Analytic,
    Nested { samples: usize },
    /// Test mode: Alice's probe is this known `N_A x D` matrix.
    KnownProbe(Matrix<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeakageConfig<T: Real> {
    /// Phase alphabet size `K`.
    pub alphabet_size: u32,
    pub mc_samples: usize,
    /// Number of colluding Eves (the first `eves` of the scenario).
    pub eves: usize,
    /// Restrict Eve to the first `columns` probe columns.
    pub columns: Option<usize>,
    pub inner: InnerExpectation<T>,
    /// Largest `K^N_R` that is enumerated exactly.
    pub max_enumeration: usize,
    /// Candidate count used when `K^N_R` exceeds `max_enumeration`.
    pub marginal_samples: usize,
    pub target_std_error: Option<f64>,
}

impl<T: Real> LeakageConfig<T> {
    pub fn new(alphabet_size: u32, mc_samples: usize, eves: usize) -> Self {
        Self {
            alphabet_size,
            mc_samples,
            eves,
            columns: None,
            inner: InnerExpectation::Analytic,
            max_enumeration: 1024,
            marginal_samples: 1024,
            target_std_error: None,
        }
    }
}

/// Leakage of the phase and, optionally, of Alice's key feature, both
/// estimated from the same draws.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakageReport {
    pub phase: MiEstimate,
    pub feature: Option<MiEstimate>,
}

/// Candidate phase vector with everything the likelihood needs.
struct Candidate<T: Real> {
    h_eve: Matrix<T>,
    /// `(log det R, R^-1)` per column group; analytic mode only.
    covariances: Vec<(f64, Matrix<T>)>,
    /// Alice's feature law; feature mode only.
    feature: Option<GaussianApprox<f64>>,
}

struct Setup<'a, T: Real> {
    base: ChannelSet<T>,
    profile_a: &'a VarianceProfile<T>,
    profile_b: Option<&'a VarianceProfile<T>>,
    noise_var: T,
    config: &'a LeakageConfig<T>,
    rows: usize,
    cols: usize,
    /// Probe columns sharing one variance column.
    groups: Vec<Vec<usize>>,
}

impl<T: Real> Setup<'_, T> {
    fn weights(&self, symbols: &[u32]) -> Result<Vec<Complex<T>>> {
        let k = self.config.alphabet_size;
        let phases = symbols.iter().map(|&s| discrete_phase(s, k)).collect();
        Ok(IrsPhaseVector::from_phases(phases)?.weights().to_vec())
    }

    fn candidate(&self, symbols: &[u32]) -> Result<Candidate<T>> {
        let w = self.weights(symbols)?;
        let blocks = (0..self.config.eves)
            .map(|m| self.base.eve_channel_with(m, &w))
            .collect::<Result<Vec<_>>>()?;
        let h_eve = Matrix::vstack(&blocks)?;
        let covariances = match self.config.inner {
            InnerExpectation::Analytic => self
                .groups
                .iter()
                .map(|g| {
                    let d = g[0];
                    let two = T::lit(2.0);
                    let var: Vec<Complex<T>> = (0..self.profile_a.rows())
                        .map(|m| Complex::new(two * self.profile_a.delta_sq(m, d), T::zero()))
                        .collect();
                    let mut r = h_eve.scale_columns(&var).try_mul(&h_eve.adjoint())?;
                    for i in 0..self.rows {
                        r[(i, i)] = r[(i, i)] + two * self.noise_var;
                    }
                    let ch = Cholesky::new(&r)?;
                    Ok((ch.log_det().as_f64(), ch.inverse()))
                })
                .collect::<Result<Vec<_>>>()?,
            _ => Vec::new(),
        };
        let feature = match self.profile_b {
            Some(pb) => {
                let h_ab = self.base.legitimate_with(&w)?;
                let m = legitimate_moments(&h_ab, self.profile_a, pb, self.noise_var)?;
                Some(GaussianApprox {
                    mean: m.alice.mean.as_f64(),
                    variance: m.alice.variance.as_f64(),
                })
            }
            None => None,
        };
        Ok(Candidate { h_eve, covariances, feature })
    }

    /// `log p(Z | w')`; `probes` holds the nested-mode probe draws.
    fn log_likelihood(&self, cand: &Candidate<T>, z: &Matrix<T>, scatter: &[Matrix<T>], probes: &[Matrix<T>]) -> Result<f64> {
        let n = self.rows as f64;
        let eps2 = self.noise_var.as_f64();
        let gaussian_const = -n * self.cols as f64 * (LN_PI + (2.0 * eps2).ln());
        match &self.config.inner {
            InnerExpectation::Analytic => Ok(self
                .groups
                .iter()
                .zip(&cand.covariances)
                .zip(scatter)
                .map(|((g, (log_det, inv)), s)| -(g.len() as f64) * (n * LN_PI + log_det) - trace_product(inv, s))
                .sum()),
            InnerExpectation::KnownProbe(x0) => {
                let mean = cand.h_eve.try_mul(&x0.leading(x0.rows(), self.cols)?)?;
                Ok(gaussian_const - z.try_sub(&mean)?.frobenius_norm_sq().as_f64() / (2.0 * eps2))
            }
            InnerExpectation::Nested { .. } => {
                let terms = probes
                    .iter()
                    .map(|x| {
                        let mean = cand.h_eve.try_mul(x)?;
                        Ok(gaussian_const - z.try_sub(&mean)?.frobenius_norm_sq().as_f64() / (2.0 * eps2))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok(log_sum_exp(&terms) - (terms.len() as f64).ln())
            }
        }
    }
}

/// `Re tr(A B)` for square matrices of equal size.
fn trace_product<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> f64 {
    let n = a.rows();
    let mut acc = T::zero();
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc.as_f64()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn normal_log_pdf(x: f64, g: &GaussianApprox<f64>) -> f64 {
    let d = x - g.mean;
    -0.5 * ((std::f64::consts::TAU * g.variance).ln() + d * d / g.variance)
}

/// Groups probe columns `0..cols` with identical variance columns.
fn column_groups<T: Real>(profile: &VarianceProfile<T>, cols: usize) -> Vec<Vec<usize>> {
    let column = |d: usize| (0..profile.rows()).map(|m| profile.delta_sq(m, d)).collect::<Vec<T>>();
    let mut groups: Vec<(Vec<T>, Vec<usize>)> = Vec::new();
    for d in 0..cols {
        let c = column(d);
        match groups.iter_mut().find(|(v, _)| *v == c) {
            Some((_, members)) => members.push(d),
            None => groups.push((c, vec![d])),
        }
    }
    groups.into_iter().map(|(_, m)| m).collect()
}

fn symbols_of(index: usize, k: u32, n_r: usize) -> Vec<u32> {
    let k = k as usize;
    let mut rest = index;
    (0..n_r)
        .map(|_| {
            let s = rest % k;
            rest /= k;
            s as u32
        })
        .collect()
}

fn index_of(symbols: &[u32], k: u32) -> usize {
    symbols.iter().rev().fold(0, |acc, &s| acc * k as usize + s as usize)
}

fn validate<T: Real>(direct: &DirectChannels<T>, profile_a: &VarianceProfile<T>, noise_var: T, config: &LeakageConfig<T>) -> Result<usize> {
    if !(noise_var > T::zero() && noise_var.is_finite()) {
        return Err(Error::param("noise variance", "leakage needs a finite positive noise variance"));
    }
    if config.alphabet_size == 0 {
        return Err(Error::param("alphabet size", "must be >= 1"));
    }
    if config.mc_samples < 2 {
        return Err(Error::param("Monte-Carlo samples", "need at least 2"));
    }
    if config.eves == 0 || config.eves > direct.eve_count() {
        return Err(Error::IndexOutOfRange {
            index: config.eves,
            valid: format!("1..={}", direct.eve_count()),
        });
    }
    if profile_a.rows() != direct.n_a() {
        return Err(Error::DimensionMismatch(format!("probe profile has {} rows, N_A = {}", profile_a.rows(), direct.n_a())));
    }
    let full_cols = match &config.inner {
        InnerExpectation::KnownProbe(x0) => {
            if x0.rows() != direct.n_a() {
                return Err(Error::DimensionMismatch(format!("known probe has {} rows, N_A = {}", x0.rows(), direct.n_a())));
            }
            x0.cols()
        }
        InnerExpectation::Nested { samples } => {
            if *samples == 0 {
                return Err(Error::param("nested samples", "must be >= 1"));
            }
            profile_a.cols()
        }
        InnerExpectation::Analytic => profile_a.cols(),
    };
    let cols = config.columns.unwrap_or(full_cols);
    if cols == 0 || cols > full_cols {
        return Err(Error::param("columns", format!("must be in 1..={full_cols}, got {cols}")));
    }
    if config.marginal_samples == 0 {
        return Err(Error::param("marginal samples", "must be >= 1"));
    }
    Ok(cols)
}

/// Estimates the leakage upper bound `I(Z_E; w)` in bits.
pub fn leakage_upper_bound<T: Real>(
    direct: &DirectChannels<T>,
    profile_a: &VarianceProfile<T>,
    noise_var: T,
    config: &LeakageConfig<T>,
    stream: RngStream,
) -> Result<MiEstimate> {
    Ok(estimate(direct, profile_a, None, noise_var, config, stream)?.phase)
}

/// Estimates `I(Z_E; w)` and `I(Z_E; sigma_A)` on shared draws. Alice's
/// feature is drawn from its per-phase Gaussian law, so it depends on `Z_E`
/// only through `w`. Requires an enumerable alphabet.
pub fn feature_leakage<T: Real>(
    direct: &DirectChannels<T>,
    profile_a: &VarianceProfile<T>,
    profile_b: &VarianceProfile<T>,
    noise_var: T,
    config: &LeakageConfig<T>,
    stream: RngStream,
) -> Result<LeakageReport> {
    estimate(direct, profile_a, Some(profile_b), noise_var, config, stream)
}

fn estimate<T: Real>(
    direct: &DirectChannels<T>,
    profile_a: &VarianceProfile<T>,
    profile_b: Option<&VarianceProfile<T>>,
    noise_var: T,
    config: &LeakageConfig<T>,
    stream: RngStream,
) -> Result<LeakageReport> {
    let cols = validate(direct, profile_a, noise_var, config)?;
    let n_r = direct.n_r();
    let k = config.alphabet_size;
    let entropy_bits = n_r as f64 * f64::from(k).log2();
    let eves = config.eves;
    let rows = eves * direct.eves[0].g_re.matrix.rows();
    let finish = |est: MiEstimate| {
        est.with_diagnostic("alphabet_size", f64::from(k))
            .with_diagnostic("eves", eves as f64)
            .with_diagnostic("columns", cols as f64)
            .with_diagnostic("entropy_bits", entropy_bits)
    };

    if k == 1 {
        // a single-symbol source carries no information
        let zero = || {
            let mut e = finish(MiEstimate::new(0.0, MiMethod::McLeakage, config.mc_samples));
            e.std_error = Some(0.0);
            e
        };
        return Ok(LeakageReport {
            phase: zero(),
            feature: profile_b.map(|_| zero()),
        });
    }

    let base_irs = IrsPhaseVector::from_phases(vec![T::zero(); n_r])?;
    let setup = Setup {
        base: ChannelSet::new(direct.clone(), base_irs)?,
        profile_a,
        profile_b,
        noise_var,
        config,
        rows,
        cols,
        groups: column_groups(profile_a, cols),
    };

    let total = (k as usize).checked_pow(n_r as u32).filter(|&t| t <= config.max_enumeration);
    let enumerated = total.is_some();
    if profile_b.is_some() && !enumerated {
        return Err(Error::param("alphabet", "feature leakage needs an enumerable phase alphabet"));
    }
    let candidate_symbols: Vec<Vec<u32>> = match total {
        Some(t) => (0..t).map(|i| symbols_of(i, k, n_r)).collect(),
        None => {
            let mut rng = stream.derive(role::LEAKAGE).derive(role::IRS_PHASE).rng();
            (0..config.marginal_samples)
                .map(|_| (0..n_r).map(|_| rng.random_range(0..k)).collect())
                .collect()
        }
    };
    let candidates = candidate_symbols
        .par_iter()
        .map(|s| setup.candidate(s))
        .collect::<Result<Vec<_>>>()?;
    let log_candidates = (candidates.len() as f64).ln();
    let all_rows = direct.eve_count() * direct.eves[0].g_re.matrix.rows();

    let terms = (0..config.mc_samples)
        .into_par_iter()
        .map(|i| -> Result<(f64, Option<f64>)> {
            let sample = stream.child(role::TRIAL, i as u64);
            let mut rng = sample.derive(role::IRS_PHASE).rng();
            let symbols: Vec<u32> = (0..n_r).map(|_| rng.random_range(0..k)).collect();
            let w = setup.weights(&symbols)?;
            let x = match &config.inner {
                InnerExpectation::KnownProbe(x0) => x0.clone(),
                _ => complex_gaussian_matrix(profile_a, &mut sample.derive(role::PROBE_A).rng()),
            };
            let h_all = setup.base.stacked_eve_channel_with(&w)?;
            let clean = h_all.try_mul(&x)?;
            let noise = noise_matrix(all_rows, x.cols(), noise_var, &mut sample.derive(role::NOISE_EVE).rng())?;
            let z = clean.try_add(&noise)?.leading(rows, cols)?;

            let scatter: Vec<Matrix<T>> = match config.inner {
                InnerExpectation::Analytic => setup
                    .groups
                    .iter()
                    .map(|g| {
                        let zg = Matrix::from_columns(rows, &g.iter().map(|&d| z.column(d)).collect::<Vec<_>>());
                        zg.try_mul(&zg.adjoint())
                    })
                    .collect::<std::result::Result<_, _>>()?,
                _ => Vec::new(),
            };
            let probes: Vec<Matrix<T>> = match config.inner {
                InnerExpectation::Nested { samples } => (0..samples)
                    .map(|s| {
                        let x = complex_gaussian_matrix(profile_a, &mut sample.child(role::PROBE_A, s as u64 + 1).rng());
                        x.leading(x.rows(), cols)
                    })
                    .collect::<std::result::Result<_, _>>()?,
                _ => Vec::new(),
            };

            let ll = candidates
                .iter()
                .map(|c| setup.log_likelihood(c, &z, &scatter, &probes))
                .collect::<Result<Vec<f64>>>()?;
            let log_marginal = log_sum_exp(&ll) - log_candidates;
            let own = if enumerated {
                None
            } else {
                Some(setup.candidate(&symbols)?)
            };
            let ll_true = match &own {
                Some(c) => setup.log_likelihood(c, &z, &scatter, &probes)?,
                None => ll[index_of(&symbols, k)],
            };
            let phase_term = ll_true - log_marginal;

            let feature_term = match profile_b {
                Some(_) => {
                    let law = candidates[index_of(&symbols, k)].feature.expect("feature law");
                    let sigma = law.mean + law.variance.sqrt() * standard_normal::<f64, _>(&mut sample.derive(role::NOISE_A).rng());
                    let lse_ll = log_sum_exp(&ll);
                    let log_pdf: Vec<f64> = candidates
                        .iter()
                        .map(|c| normal_log_pdf(sigma, c.feature.as_ref().expect("feature law")))
                        .collect();
                    let posterior: Vec<f64> = ll.iter().zip(&log_pdf).map(|(l, p)| l - lse_ll + p).collect();
                    Some(log_sum_exp(&posterior) - (log_sum_exp(&log_pdf) - log_candidates))
                }
                None => None,
            };
            Ok((phase_term, feature_term))
        })
        .collect::<Result<Vec<_>>>()?;

    let summarize = |v: Vec<f64>| {
        let bits: Vec<f64> = v.iter().map(|t| t / LN2).collect();
        let mean = crate::stats::mean(&bits);
        let se = crate::stats::std_error(&bits);
        let mut est = finish(MiEstimate::new(mean, MiMethod::McLeakage, bits.len()))
            .with_diagnostic("candidates", candidates.len() as f64)
            .with_diagnostic("enumerated", if enumerated { 1.0 } else { 0.0 });
        est.std_error = Some(se);
        if !enumerated {
            est.flags.push("sampled_marginal_biased_upward".into());
        }
        if let Some(target) = config.target_std_error {
            if se > target {
                est.flags.push("std_error_above_target".into());
            }
        }
        est
    };
    let phase = summarize(terms.iter().map(|t| t.0).collect());
    let feature = profile_b.map(|_| summarize(terms.iter().map(|t| t.1.unwrap_or(0.0)).collect()));
    Ok(LeakageReport { phase, feature })
}
