//! Pilot-based baseline: public pilot transmission, least-squares channel
//! estimation and a scalar key feature per round.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron, largest_singular, pinv, rank, unvec, vec, Matrix};
use crate::sampling::{noise_matrix, random_unitary};
use crate::scalar::Real;

/// Rank tolerance used when validating pilots.
pub const PILOT_RANK_TOL: f64 = 1e-10;

/// Maximum relative disagreement allowed between the two LS routes.
pub const ROUTE_TOL: f64 = 1e-9;

/// Full-row-rank `N x L` pilot matrix (`L >= N`).
#[derive(Debug, Clone, PartialEq)]
pub struct PilotMatrix<T: Real> {
    matrix: Matrix<T>,
}

impl<T: Real> PilotMatrix<T> {
    pub fn new(matrix: Matrix<T>) -> Result<Self> {
        let (n, l) = matrix.shape();
        if l < n {
            return Err(Error::param("pilot", format!("length {l} is shorter than antenna count {n}")));
        }
        let r = rank(&matrix, PILOT_RANK_TOL)?;
        if r < n {
            return Err(Error::RankDeficient { rank: r, required: n });
        }
        Ok(Self { matrix })
    }

    /// `sqrt(2C) * I_n`: each antenna row carries energy `2C`, the same as a
    /// probe row with row sum `C`.
    pub fn scaled_identity(n: usize, row_power: T) -> Result<Self> {
        if !(row_power > T::zero()) {
            return Err(Error::param("row power", "must be positive"));
        }
        Self::new(Matrix::identity(n).scale_real((T::lit(2.0) * row_power).sqrt()))
    }

    /// Haar unitary scaled to the same per-row energy as [`Self::scaled_identity`].
    pub fn random_unitary<R: Rng + ?Sized>(n: usize, row_power: T, rng: &mut R) -> Result<Self> {
        if !(row_power > T::zero()) {
            return Err(Error::param("row power", "must be positive"));
        }
        Self::new(random_unitary(n, rng).scale_real((T::lit(2.0) * row_power).sqrt()))
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn antennas(&self) -> usize {
        self.matrix.rows()
    }

    pub fn length(&self) -> usize {
        self.matrix.cols()
    }

    /// Column `l` of the pilot.
    pub fn column(&self, l: usize) -> Vec<num_complex::Complex<T>> {
        self.matrix.column(l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PilotKind {
    #[default]
    ScaledIdentity,
    RandomUnitary,
}

/// `Y = H · P + N`.
pub fn received_pilot_signal<T: Real, R: Rng + ?Sized>(
    h: &Matrix<T>,
    pilot: &PilotMatrix<T>,
    noise_var: T,
    rng: &mut R,
) -> Result<Matrix<T>> {
    let clean = h.try_mul(pilot.matrix())?;
    let noise = noise_matrix(clean.rows(), clean.cols(), noise_var, rng)?;
    Ok(&clean + &noise)
}

/// Least-squares estimator for a fixed pilot, evaluated both as `Y · P^+`
/// and through the vectorized system `vec(Y) = (P^T ⊗ I) vec(H)`.
#[derive(Debug, Clone)]
pub struct LsEstimator<T: Real> {
    n_rx: usize,
    n_tx: usize,
    p_pinv: Matrix<T>,
    vec_pinv: Matrix<T>,
}

impl<T: Real> LsEstimator<T> {
    pub fn new(pilot: &PilotMatrix<T>, n_rx: usize) -> Result<Self> {
        if n_rx == 0 {
            return Err(Error::param("receive antennas", "must be >= 1"));
        }
        let p = pilot.matrix();
        let p_pinv = pinv(p, PILOT_RANK_TOL)?;
        let system = kron(&p.transpose(), &Matrix::identity(n_rx));
        let vec_pinv = pinv(&system, PILOT_RANK_TOL)?;
        Ok(Self {
            n_rx,
            n_tx: pilot.antennas(),
            p_pinv,
            vec_pinv,
        })
    }

    /// Returns `H_hat`; fails if the two routes disagree beyond [`ROUTE_TOL`].
    pub fn estimate(&self, y: &Matrix<T>) -> Result<Matrix<T>> {
        if y.rows() != self.n_rx || y.cols() != self.p_pinv.rows() {
            return Err(Error::DimensionMismatch(format!(
                "received block is {}x{}, estimator expects {}x{}",
                y.rows(),
                y.cols(),
                self.n_rx,
                self.p_pinv.rows()
            )));
        }
        let direct = y.try_mul(&self.p_pinv)?;
        let stacked = self.vec_pinv.try_mul(&vec(y))?;
        let via_vec = unvec(&stacked, self.n_rx, self.n_tx)?;
        let scale = direct.frobenius_norm();
        if scale > T::zero() {
            let rel = (&direct - &via_vec).frobenius_norm() / scale;
            if rel > T::rel_tol(ROUTE_TOL) {
                return Err(Error::RouteMismatch { rel_diff: rel.as_f64() });
            }
        }
        Ok(direct)
    }
}

/// One-shot LS estimate `H_hat` from `Y` and `P`.
pub fn ls_estimate<T: Real>(y: &Matrix<T>, pilot: &PilotMatrix<T>) -> Result<Matrix<T>> {
    LsEstimator::new(pilot, y.rows())?.estimate(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// Received signal strength `||H||_F^2`.
    #[default]
    Rss,
    MaxSingular,
}

pub fn pilot_feature<T: Real>(h: &Matrix<T>, mode: FeatureMode) -> Result<T> {
    match mode {
        FeatureMode::Rss => Ok(h.frobenius_norm_sq()),
        FeatureMode::MaxSingular => Ok(largest_singular(h)?),
    }
}
