//! All randomness: seeded counter-based streams, complex Gaussian matrices
//! with per-entry variance profiles, IRS phase vectors and noise.
//!
//! Complex Gaussian convention: real and imaginary parts are independent,
//! each with the stated variance, so `E|x|^2` is twice that variance.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{thin_qr, Matrix};
use crate::scalar::Real;

/// Stream labels used when deriving per-role substreams.
pub mod role {
    pub const CALIBRATION: u64 = 0x10;
    pub const CHANNELS: u64 = 0x11;
    pub const IRS_PHASE: u64 = 0x12;
    pub const PROBE_A: u64 = 0x13;
    pub const PROBE_B: u64 = 0x14;
    pub const NOISE_A: u64 = 0x15;
    pub const NOISE_B: u64 = 0x16;
    pub const NOISE_EVE: u64 = 0x17;
    pub const TRIAL: u64 = 0x18;
    pub const ROUND: u64 = 0x19;
    pub const PILOT: u64 = 0x1a;
    pub const LEAKAGE: u64 = 0x1b;
    pub const JITTER: u64 = 0x1c;
    pub const SWEEP: u64 = 0x1d;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Streams are never shared between workers: each trial or role derives its
/// own child stream, so draws do not depend on the parallel schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream_id: 0 }
    }

    /// Child stream for `label`; the mapping is a fixed hash of the parent id.
    pub fn derive(&self, label: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(label.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }

    /// Shorthand for `derive(role).derive(index)`.
    pub fn child(&self, role: u64, index: u64) -> Self {
        self.derive(role).derive(index)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Draws a real standard normal converted to `T`.
#[inline]
pub fn standard_normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    let x: f64 = rng.sample(StandardNormal);
    T::lit(x)
}

/// Complex Gaussian with per-part standard deviation `std`.
#[inline]
pub fn complex_normal<T: Real, R: Rng + ?Sized>(rng: &mut R, std: T) -> Complex<T> {
    let re: T = standard_normal(rng);
    let im: T = standard_normal(rng);
    Complex::new(re * std, im * std)
}

/// Per-entry variances `delta^2[m][n]` of a probe matrix, with every row
/// summing to the same constant `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceProfile<T: Real> {
    rows: usize,
    cols: usize,
    deltas: Vec<T>,
    row_sum: T,
}

/// Neumaier-compensated sum, so long rows are checked at full precision.
fn compensated_sum<T: Real>(xs: &[T]) -> T {
    let (mut sum, mut comp) = (T::zero(), T::zero());
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

impl<T: Real> VarianceProfile<T> {
    /// Profile from row-major variances; every row must sum to `row_sum`.
    pub fn new(rows: usize, cols: usize, deltas: Vec<T>, row_sum: T) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::param("variance profile", "shape must be at least 1x1"));
        }
        if deltas.len() != rows * cols {
            return Err(Error::param(
                "variance profile",
                format!("expected {} entries, got {}", rows * cols, deltas.len()),
            ));
        }
        if !(row_sum > T::zero() && row_sum.is_finite()) {
            return Err(Error::param("row sum C", format!("must be positive, got {row_sum}")));
        }
        if let Some(bad) = deltas.iter().find(|d| !(d.is_finite() && **d >= T::zero())) {
            return Err(Error::param("variance profile", format!("entry {bad} is not a nonnegative variance")));
        }
        let tol = T::rel_tol(1e-12) * row_sum;
        for (m, row) in deltas.chunks(cols).enumerate() {
            let s = compensated_sum(row);
            if (s - row_sum).abs() > tol {
                return Err(Error::param(
                    "variance profile",
                    format!("row {m} sums to {s}, expected {row_sum}"),
                ));
            }
        }
        Ok(Self {
            rows,
            cols,
            deltas,
            row_sum,
        })
    }

    /// Every entry equal to `row_sum / cols`.
    pub fn uniform(rows: usize, cols: usize, row_sum: T) -> Result<Self> {
        if cols == 0 {
            return Err(Error::param("variance profile", "shape must be at least 1x1"));
        }
        let d = row_sum / T::from_count(cols);
        Self::new(rows, cols, vec![d; rows * cols], row_sum)
    }

    /// Random non-uniform profile: each row is a normalized vector of
    /// independent `U(0.05, 1)` weights scaled to `row_sum`.
    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, row_sum: T, rng: &mut R) -> Result<Self> {
        let mut deltas = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let w: Vec<f64> = (0..cols).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = w.iter().sum();
            let mut row: Vec<T> = w.iter().map(|x| T::lit(x / total) * row_sum).collect();
            // Fold the rounding residue into the last entry so the row sum is exact.
            let s: T = row[..cols - 1].iter().copied().sum();
            row[cols - 1] = row_sum - s;
            deltas.extend(row);
        }
        Self::new(rows, cols, deltas, row_sum)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Probe length `D`.
    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row_sum(&self) -> T {
        self.row_sum
    }

    #[inline]
    pub fn delta_sq(&self, m: usize, n: usize) -> T {
        self.deltas[m * self.cols + n]
    }

    pub fn deltas(&self) -> &[T] {
        &self.deltas
    }
}

/// Matrix with independent entries whose real and imaginary parts each have
/// variance `delta^2[m][n]`.
pub fn complex_gaussian_matrix<T: Real, R: Rng + ?Sized>(profile: &VarianceProfile<T>, rng: &mut R) -> Matrix<T> {
    let data = profile
        .deltas
        .iter()
        .map(|&d| complex_normal(rng, d.sqrt()))
        .collect();
    Matrix::from_vec(profile.rows, profile.cols, data).expect("profile shape is valid")
}

/// Noise matrix with i.i.d. entries, per-part variance `noise_var`.
pub fn noise_matrix<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, noise_var: T, rng: &mut R) -> Result<Matrix<T>> {
    if !(noise_var >= T::zero() && noise_var.is_finite()) {
        return Err(Error::param("noise variance", format!("must be finite and >= 0, got {noise_var}")));
    }
    if noise_var == T::zero() {
        return Ok(Matrix::zeros(rows, cols));
    }
    let std = noise_var.sqrt();
    let data = (0..rows * cols).map(|_| complex_normal(rng, std)).collect();
    Ok(Matrix::from_vec(rows, cols, data)?)
}

/// Haar-distributed unitary matrix (QR of a Ginibre matrix with the
/// diagonal phases of `R` divided out).
pub fn random_unitary<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Matrix<T> {
    let data = (0..n * n).map(|_| complex_normal(rng, T::one())).collect();
    let g = Matrix::from_vec(n, n, data).expect("n >= 1");
    let (q, r) = thin_qr(&g).expect("square input");
    let phases: Vec<Complex<T>> = (0..n)
        .map(|i| {
            let d = r[(i, i)];
            if d.norm() == T::zero() {
                Complex::new(T::one(), T::zero())
            } else {
                d / d.norm()
            }
        })
        .collect();
    q.scale_columns(&phases)
}

/// Phase alphabet for IRS elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PhaseAlphabet {
    /// `theta` uniform on `[0, 2*pi)`.
    Continuous,
    /// `theta` uniform over `{2*pi*k/K : k = 0..K-1}`.
    Discrete(u32),
}

impl Default for PhaseAlphabet {
    fn default() -> Self {
        PhaseAlphabet::Continuous
    }
}

impl fmt::Display for PhaseAlphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseAlphabet::Continuous => write!(f, "continuous"),
            PhaseAlphabet::Discrete(k) => write!(f, "discrete:{k}"),
        }
    }
}

impl FromStr for PhaseAlphabet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "continuous" {
            return Ok(PhaseAlphabet::Continuous);
        }
        let k = s
            .strip_prefix("discrete:")
            .or_else(|| s.strip_prefix("discrete"))
            .map(|k| k.trim_start_matches(['(', ':']).trim_end_matches(')'))
            .ok_or_else(|| Error::param("phase alphabet", format!("expected 'continuous' or 'discrete:K', got '{s}'")))?;
        let k: u32 = k
            .parse()
            .map_err(|_| Error::param("phase alphabet", format!("bad alphabet size in '{s}'")))?;
        Ok(PhaseAlphabet::Discrete(k))
    }
}

impl TryFrom<String> for PhaseAlphabet {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PhaseAlphabet> for String {
    fn from(a: PhaseAlphabet) -> String {
        a.to_string()
    }
}

/// IRS phase controller vector with unit-modulus entries `exp(j*theta_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IrsPhaseVector<T: Real> {
    phases: Vec<T>,
    weights: Vec<Complex<T>>,
}

impl<T: Real> IrsPhaseVector<T> {
    /// Phases are wrapped into `[0, 2*pi)`.
    pub fn from_phases(phases: Vec<T>) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::param("IRS size", "need at least one element"));
        }
        let two_pi = T::TAU();
        let mut wrapped = Vec::with_capacity(phases.len());
        for p in phases {
            if !p.is_finite() {
                return Err(Error::param("IRS phase", format!("{p} is not finite")));
            }
            let mut q = p % two_pi;
            if q < T::zero() {
                q += two_pi;
            }
            if q >= two_pi {
                q = T::zero();
            }
            wrapped.push(q);
        }
        let weights = wrapped.iter().map(|&t| Complex::from_polar(T::one(), t)).collect();
        Ok(Self {
            phases: wrapped,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn phases(&self) -> &[T] {
        &self.phases
    }

    /// The entries `w_i = exp(j*theta_i)`.
    pub fn weights(&self) -> &[Complex<T>] {
        &self.weights
    }
}

/// Draws `n_r` i.i.d. phases from `alphabet`.
pub fn sample_irs_phase<T: Real, R: Rng + ?Sized>(n_r: usize, alphabet: PhaseAlphabet, rng: &mut R) -> Result<IrsPhaseVector<T>> {
    if n_r == 0 {
        return Err(Error::param("IRS size", "need at least one element"));
    }
    let phases = match alphabet {
        PhaseAlphabet::Continuous => (0..n_r)
            .map(|_| T::lit(rng.random::<f64>() * std::f64::consts::TAU))
            .collect(),
        PhaseAlphabet::Discrete(k) => {
            if k < 2 {
                return Err(Error::param("phase alphabet", format!("discrete alphabet needs K >= 2, got {k}")));
            }
            (0..n_r)
                .map(|_| discrete_phase(rng.random_range(0..k), k))
                .collect()
        }
    };
    IrsPhaseVector::from_phases(phases)
}

/// Phase `2*pi*index/k` of a discrete alphabet symbol.
pub fn discrete_phase<T: Real>(index: u32, k: u32) -> T {
    T::lit(std::f64::consts::TAU * f64::from(index) / f64::from(k))
}
