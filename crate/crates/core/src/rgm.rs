//! Random-Gaussian-matrix key generation.
//!
//! Per coherence round the IRS holds one phase vector `w`. Alice and Bob each
//! transmit a secret Gaussian probe, and each keeps the largest singular
//! value of what it receives:
//!
//! ```text
//! sigma_A = sigma_max(H_BA X_B + N_A)    sigma_B = sigma_max(H_AB X_A + N_B)
//! ```
//!
//! Both directions share the same `w`, so the two values are close. The
//! pooled values are quantized into key bits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSet, DirectChannels};
use crate::error::{Error, Result};
use crate::linalg::{singular_values, Matrix};
use crate::sampling::{complex_gaussian_matrix, noise_matrix, role, sample_irs_phase, IrsPhaseVector, PhaseAlphabet, RngStream, VarianceProfile};
use crate::scalar::Real;
use crate::stats;

/// Secret transmit matrix `X` (`N x D`) drawn from a variance profile.
///
/// Probes stay with their transmitter. Nothing in this crate serializes
/// them, and Eve-facing APIs only return `H_eve X + N`.
#[derive(Debug, Clone)]
pub struct ProbeMatrix<T: Real> {
    matrix: Matrix<T>,
}

impl<T: Real> ProbeMatrix<T> {
    pub fn generate(profile: &VarianceProfile<T>, stream: RngStream) -> Self {
        Self {
            matrix: complex_gaussian_matrix(profile, &mut stream.rng()),
        }
    }

    pub fn from_matrix(matrix: Matrix<T>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn length(&self) -> usize {
        self.matrix.cols()
    }
}

/// Per-round key features.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularObservation<T: Real> {
    /// Alice's top singular values, descending.
    pub sigmas_a: Vec<T>,
    /// Bob's top singular values, descending.
    pub sigmas_b: Vec<T>,
    pub round_index: usize,
    pub irs: IrsPhaseVector<T>,
}

impl<T: Real> SingularObservation<T> {
    pub fn sigma_a(&self) -> T {
        self.sigmas_a[0]
    }

    pub fn sigma_b(&self) -> T {
        self.sigmas_b[0]
    }
}

/// Probe profiles, noise level and feature count for a protocol run.
#[derive(Debug, Clone)]
pub struct RoundParams<T: Real> {
    /// Alice's probe profile, `N_A x D`.
    pub profile_a: VarianceProfile<T>,
    /// Bob's probe profile, `N_B x D`.
    pub profile_b: VarianceProfile<T>,
    /// Per-part noise variance at the legitimate receivers.
    pub noise_var: T,
    /// Number of leading singular values kept (key material uses the first).
    pub top_k: usize,
}

impl<T: Real> RoundParams<T> {
    pub fn new(profile_a: VarianceProfile<T>, profile_b: VarianceProfile<T>, noise_var: T) -> Result<Self> {
        if profile_a.cols() != profile_b.cols() {
            return Err(Error::DimensionMismatch(format!(
                "probe lengths differ: {} vs {}",
                profile_a.cols(),
                profile_b.cols()
            )));
        }
        if !(noise_var >= T::zero() && noise_var.is_finite()) {
            return Err(Error::param("noise variance", format!("must be finite and >= 0, got {noise_var}")));
        }
        Ok(Self {
            profile_a,
            profile_b,
            noise_var,
            top_k: 1,
        })
    }

    pub fn with_top_k(mut self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("top_k", "must be >= 1"));
        }
        self.top_k = k;
        Ok(self)
    }

    pub fn probe_length(&self) -> usize {
        self.profile_a.cols()
    }
}

fn top_singular<T: Real>(y: &Matrix<T>, k: usize) -> Result<Vec<T>> {
    let mut s = singular_values(y)?;
    s.resize(k.max(1), T::zero());
    s.truncate(k.max(1));
    Ok(s)
}

fn check_profiles<T: Real>(set: &ChannelSet<T>, params: &RoundParams<T>) -> Result<()> {
    let (n_a, n_b) = (set.direct.n_a(), set.direct.n_b());
    if params.profile_a.rows() != n_a || params.profile_b.rows() != n_b {
        return Err(Error::DimensionMismatch(format!(
            "probe profiles are {}x{} and {}x{}, antennas are N_A={n_a}, N_B={n_b}",
            params.profile_a.rows(),
            params.profile_a.cols(),
            params.profile_b.rows(),
            params.profile_b.cols()
        )));
    }
    Ok(())
}

/// One round with caller-supplied probes. Noise comes from `stream`.
pub fn round_with_probes<T: Real>(
    set: &ChannelSet<T>,
    x_a: &ProbeMatrix<T>,
    x_b: &ProbeMatrix<T>,
    noise_var: T,
    top_k: usize,
    round_index: usize,
    stream: RngStream,
) -> Result<SingularObservation<T>> {
    let (h_ab, h_ba) = set.cascaded()?;
    let d = x_a.length();
    let n_a = noise_matrix(h_ba.rows(), x_b.length(), noise_var, &mut stream.derive(role::NOISE_A).rng())?;
    let n_b = noise_matrix(h_ab.rows(), d, noise_var, &mut stream.derive(role::NOISE_B).rng())?;
    let y_a = h_ba.try_mul(x_b.matrix())?.try_add(&n_a)?;
    let y_b = h_ab.try_mul(x_a.matrix())?.try_add(&n_b)?;
    Ok(SingularObservation {
        sigmas_a: top_singular(&y_a, top_k)?,
        sigmas_b: top_singular(&y_b, top_k)?,
        round_index,
        irs: set.irs.clone(),
    })
}

/// Steps 2 and 3 under the IRS phase already held in `set`: fresh probes
/// and noise from `stream`.
pub fn rgm_round<T: Real>(set: &ChannelSet<T>, params: &RoundParams<T>, round_index: usize, stream: RngStream) -> Result<SingularObservation<T>> {
    check_profiles(set, params)?;
    let x_a = ProbeMatrix::generate(&params.profile_a, stream.derive(role::PROBE_A));
    let x_b = ProbeMatrix::generate(&params.profile_b, stream.derive(role::PROBE_B));
    round_with_probes(set, &x_a, &x_b, params.noise_var, params.top_k, round_index, stream)
}

/// What the colluding Eves receive while Alice probes:
/// `Z_E = H_eve X_A + N_E` with `H_eve` the stacked channel of the first
/// `eves` eavesdroppers.
pub fn eve_received<T: Real>(set: &ChannelSet<T>, x_a: &ProbeMatrix<T>, eves: usize, noise_var: T, stream: RngStream) -> Result<Matrix<T>> {
    if eves == 0 || eves > set.direct.eve_count() {
        return Err(Error::IndexOutOfRange {
            index: eves,
            valid: format!("1..={}", set.direct.eve_count()),
        });
    }
    let blocks = (0..eves).map(|m| set.eve_channel(m)).collect::<Result<Vec<_>>>()?;
    let h_eve = Matrix::vstack(&blocks)?;
    let clean = h_eve.try_mul(x_a.matrix())?;
    let noise = noise_matrix(clean.rows(), clean.cols(), noise_var, &mut stream.derive(role::NOISE_EVE).rng())?;
    Ok(clean.try_add(&noise)?)
}

/// A legitimate round together with the colluding Eves' view of it.
#[derive(Debug, Clone)]
pub struct RoundTranscript<T: Real> {
    pub observation: SingularObservation<T>,
    pub z_eve: Matrix<T>,
}

pub fn rgm_round_observed<T: Real>(
    set: &ChannelSet<T>,
    params: &RoundParams<T>,
    eves: usize,
    eve_noise_var: T,
    round_index: usize,
    stream: RngStream,
) -> Result<RoundTranscript<T>> {
    check_profiles(set, params)?;
    let x_a = ProbeMatrix::generate(&params.profile_a, stream.derive(role::PROBE_A));
    let x_b = ProbeMatrix::generate(&params.profile_b, stream.derive(role::PROBE_B));
    let observation = round_with_probes(set, &x_a, &x_b, params.noise_var, params.top_k, round_index, stream)?;
    let z_eve = eve_received(set, &x_a, eves, eve_noise_var, stream)?;
    Ok(RoundTranscript { observation, z_eve })
}

/// Runs `rounds` iterations of the protocol over static direct channels.
/// Round `r` uses stream `stream.child(ROUND, r)` for its IRS phase, probes
/// and noise, so results do not depend on the thread schedule.
pub fn run_protocol<T: Real>(
    direct: &DirectChannels<T>,
    alphabet: PhaseAlphabet,
    params: &RoundParams<T>,
    rounds: usize,
    stream: RngStream,
) -> Result<Vec<SingularObservation<T>>> {
    if rounds == 0 {
        return Err(Error::param("rounds", "must be >= 1"));
    }
    (0..rounds)
        .into_par_iter()
        .map(|r| {
            let round = stream.child(role::ROUND, r as u64);
            let irs = sample_irs_phase(direct.n_r(), alphabet, &mut round.derive(role::IRS_PHASE).rng())?;
            let set = ChannelSet::new(direct.clone(), irs)?;
            rgm_round(&set, params, r, round)
        })
        .collect()
}

/// Equal-probability quantizer with Gray-coded labels and guard bands.
///
/// The `2^b` bins are delimited by empirical quantiles of the fitting
/// sample. The outer bins are closed by the sample minimum and maximum,
/// which only serve to give them a width. A value in bin `j` is censored
/// when it lies within `g * width_j` of an interior edge of that bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    /// `2^b + 1` ascending edges; the first and last are the sample range.
    pub edges: Vec<f64>,
    pub bits_per_sample: usize,
    pub guard_ratio: f64,
}

impl Quantizer {
    pub fn fit(values: &[f64], bits_per_sample: usize, guard_ratio: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("quantizer input", "need at least one value"));
        }
        if !(1..=16).contains(&bits_per_sample) {
            return Err(Error::param("bits per sample", format!("must be in 1..=16, got {bits_per_sample}")));
        }
        if !(0.0..0.5).contains(&guard_ratio) {
            return Err(Error::param("guard ratio", format!("must be in [0, 0.5), got {guard_ratio}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("quantizer input", "values must be finite"));
        }
        let sorted = stats::sorted(values);
        if sorted[0] == sorted[sorted.len() - 1] {
            return Err(Error::Degenerate("constant quantizer input".into()));
        }
        let bins = 1usize << bits_per_sample;
        let edges = (0..=bins)
            .map(|i| stats::quantile_sorted(&sorted, i as f64 / bins as f64))
            .collect();
        Ok(Self {
            edges,
            bits_per_sample,
            guard_ratio,
        })
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    /// Bin index in `0..2^b`; values at an edge go to the upper bin.
    pub fn bin(&self, v: f64) -> usize {
        let interior = &self.edges[1..self.edges.len() - 1];
        interior.partition_point(|&e| e <= v)
    }

    /// Whether `v` falls inside a guard band.
    pub fn censored(&self, v: f64) -> bool {
        if self.guard_ratio == 0.0 {
            return false;
        }
        let j = self.bin(v);
        let width = self.edges[j + 1] - self.edges[j];
        let guard = self.guard_ratio * width;
        let lower_interior = j > 0;
        let upper_interior = j + 1 < self.bins();
        (lower_interior && v - self.edges[j] < guard) || (upper_interior && self.edges[j + 1] - v < guard)
    }

    /// Quantizes `values`; element `i` of the input is round `i`.
    pub fn quantize(&self, values: &[f64]) -> Result<KeyBitstream> {
        let mut bits = Vec::new();
        let mut rounds = Vec::new();
        let mut censored = Vec::new();
        let mut seen_bins = Vec::new();
        for (i, &v) in values.iter().enumerate() {
            if self.censored(v) {
                censored.push(i);
                continue;
            }
            let j = self.bin(v);
            seen_bins.push(j);
            rounds.push(i);
            bits.extend(gray_bits(j, self.bits_per_sample));
        }
        seen_bins.sort_unstable();
        seen_bins.dedup();
        if seen_bins.len() < 2 {
            return Err(Error::Degenerate(format!(
                "{} uncensored values all fall in one bin",
                rounds.len()
            )));
        }
        KeyBitstream::new(bits, rounds, censored, self.bits_per_sample)
    }
}

/// Gray code of `index`, most significant bit first.
pub fn gray_bits(index: usize, width: usize) -> Vec<u8> {
    let g = index ^ (index >> 1);
    (0..width).rev().map(|b| ((g >> b) & 1) as u8).collect()
}

/// Fits a quantizer on `values` and applies it.
pub fn quantize(values: &[f64], bits_per_sample: usize, guard_ratio: f64) -> Result<KeyBitstream> {
    Quantizer::fit(values, bits_per_sample, guard_ratio)?.quantize(values)
}

/// Key bits with the rounds they came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyBitstream {
    bits: Vec<u8>,
    rounds: Vec<usize>,
    censored: Vec<usize>,
    bits_per_sample: usize,
}

impl KeyBitstream {
    /// `rounds` lists the kept round indices in ascending order; `bits`
    /// holds `bits_per_sample` bits per kept round.
    pub fn new(bits: Vec<u8>, rounds: Vec<usize>, censored: Vec<usize>, bits_per_sample: usize) -> Result<Self> {
        if bits_per_sample == 0 {
            return Err(Error::param("bits per sample", "must be >= 1"));
        }
        if bits.len() != rounds.len() * bits_per_sample {
            return Err(Error::DimensionMismatch(format!(
                "{} bits for {} rounds at {bits_per_sample} bits each",
                bits.len(),
                rounds.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::param("bits", "entries must be 0 or 1"));
        }
        if rounds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("rounds", "must be strictly ascending"));
        }
        Ok(Self {
            bits,
            rounds,
            censored,
            bits_per_sample,
        })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn rounds(&self) -> &[usize] {
        &self.rounds
    }

    pub fn censored_rounds(&self) -> &[usize] {
        &self.censored
    }

    pub fn bits_per_sample(&self) -> usize {
        self.bits_per_sample
    }

    fn symbol(&self, pos: usize) -> &[u8] {
        &self.bits[pos * self.bits_per_sample..(pos + 1) * self.bits_per_sample]
    }
}

/// Bit disagreement over the rounds kept by both parties. Censored-index
/// sets are assumed to be exchanged publicly at no cost.
pub fn key_disagreement_rate(a: &KeyBitstream, b: &KeyBitstream) -> Result<f64> {
    if a.bits_per_sample != b.bits_per_sample {
        return Err(Error::DimensionMismatch(format!(
            "bits per sample differ: {} vs {}",
            a.bits_per_sample, b.bits_per_sample
        )));
    }
    let (mut i, mut j) = (0, 0);
    let (mut diff, mut total) = (0usize, 0usize);
    while i < a.rounds.len() && j < b.rounds.len() {
        match a.rounds[i].cmp(&b.rounds[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                diff += a.symbol(i).iter().zip(b.symbol(j)).filter(|(x, y)| x != y).count();
                total += a.bits_per_sample;
                i += 1;
                j += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::Degenerate("no round is kept by both parties".into()));
    }
    Ok(diff as f64 / total as f64)
}

/// Result of quantizing both parties' features.
#[derive(Debug, Clone)]
pub struct KeyAgreement {
    pub alice: KeyBitstream,
    pub bob: KeyBitstream,
    pub kdr: f64,
    pub common_rounds: usize,
}

/// Each party fits its own quantizer on its own values, then KDR is taken
/// over the rounds neither party censored.
pub fn agree_keys<T: Real>(obs: &[SingularObservation<T>], bits_per_sample: usize, guard_ratio: f64) -> Result<KeyAgreement> {
    let a: Vec<f64> = obs.iter().map(|o| o.sigma_a().as_f64()).collect();
    let b: Vec<f64> = obs.iter().map(|o| o.sigma_b().as_f64()).collect();
    let alice = quantize(&a, bits_per_sample, guard_ratio)?;
    let bob = quantize(&b, bits_per_sample, guard_ratio)?;
    let kdr = key_disagreement_rate(&alice, &bob)?;
    let common_rounds = alice.rounds.iter().filter(|r| bob.rounds.binary_search(r).is_ok()).count();
    Ok(KeyAgreement {
        alice,
        bob,
        kdr,
        common_rounds,
    })
}
