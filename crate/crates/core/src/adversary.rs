//! Colluded-eavesdropper attack on the pilot baseline.
//!
//! Each Eve subtracts the known direct-path contribution from her pilot
//! observation, leaving `Z_m = G_RE_m · diag(w) · G_AR · P_A + N_m`, which is
//! linear in `w`: `vec(Z_m) = Psi_m · w + vec(N_m)`. Stacking all Eves and
//! solving by least squares recovers `w` once the stacked system has full
//! column rank.

use num_complex::Complex;
use rand::Rng;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{pinv, rank, vec, Matrix};
use crate::pilot::{received_pilot_signal, PilotMatrix};
use crate::scalar::Real;

/// Relative rank tolerance for the stacked attack system.
pub const ATTACK_RANK_TOL: f64 = 1e-10;

/// `Psi` with block `l` equal to `G_RE · diag(G_AR · p_l)`, shaped
/// `(L_A * N_E) x N_R`.
pub fn build_psi<T: Real>(g_re: &Matrix<T>, g_ar: &Matrix<T>, pilot: &PilotMatrix<T>) -> Result<Matrix<T>> {
    if g_re.cols() != g_ar.rows() || g_ar.cols() != pilot.antennas() {
        return Err(Error::DimensionMismatch(format!(
            "Psi: G_RE {}x{}, G_AR {}x{}, pilot {}x{}",
            g_re.rows(),
            g_re.cols(),
            g_ar.rows(),
            g_ar.cols(),
            pilot.antennas(),
            pilot.length()
        )));
    }
    let illuminated = g_ar.try_mul(pilot.matrix())?;
    let blocks: Vec<Matrix<T>> = (0..pilot.length())
        .map(|l| g_re.scale_columns(&illuminated.column(l)))
        .collect();
    Ok(Matrix::vstack(&blocks)?)
}

/// What one Eve contributes to the collusion: her direct-path-free
/// observation `Z_m` and the matching system matrix `Psi_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct EveObservation<T: Real> {
    z: Matrix<T>,
    psi: Matrix<T>,
}

impl<T: Real> EveObservation<T> {
    pub fn new(z: Matrix<T>, psi: Matrix<T>) -> Result<Self> {
        if z.rows() * z.cols() != psi.rows() {
            return Err(Error::DimensionMismatch(format!(
                "Z is {}x{} but Psi has {} rows",
                z.rows(),
                z.cols(),
                psi.rows()
            )));
        }
        Ok(Self { z, psi })
    }

    /// Eve `m` overhears Alice's pilot and removes `G_AE_m · P_A`.
    pub fn observe<R: Rng + ?Sized>(
        set: &ChannelSet<T>,
        m: usize,
        pilot: &PilotMatrix<T>,
        noise_var: T,
        rng: &mut R,
    ) -> Result<Self> {
        let h = set.eve_channel(m)?;
        let y = received_pilot_signal(&h, pilot, noise_var, rng)?;
        let link = &set.direct.eves[m];
        let z = y.try_sub(&link.g_ae.matrix.try_mul(pilot.matrix())?)?;
        let psi = build_psi(&link.g_re.matrix, &set.direct.g_ar.matrix, pilot)?;
        Self::new(z, psi)
    }

    pub fn z(&self) -> &Matrix<T> {
        &self.z
    }

    pub fn psi(&self) -> &Matrix<T> {
        &self.psi
    }
}

fn stack<T: Real>(obs: &[EveObservation<T>]) -> Result<(Matrix<T>, Matrix<T>)> {
    if obs.is_empty() {
        return Err(Error::param("observations", "need at least one Eve"));
    }
    let n_r = obs[0].psi.cols();
    if obs.iter().any(|o| o.psi.cols() != n_r) {
        return Err(Error::DimensionMismatch("Psi blocks disagree on N_R".into()));
    }
    let psis: Vec<Matrix<T>> = obs.iter().map(|o| o.psi.clone()).collect();
    let zs: Vec<Matrix<T>> = obs.iter().map(|o| vec(&o.z)).collect();
    Ok((Matrix::vstack(&psis)?, Matrix::vstack(&zs)?))
}

/// Numerical rank of the stacked `[Psi_1; ...; Psi_M]`.
pub fn stacked_rank<T: Real>(obs: &[EveObservation<T>]) -> Result<usize> {
    let (psi, _) = stack(obs)?;
    Ok(rank(&psi, ATTACK_RANK_TOL)?)
}

/// Least-squares `w_hat = [Psi_1; ...; Psi_M]^+ · [vec(Z_1); ...; vec(Z_M)]`.
/// No unit-modulus constraint is imposed.
pub fn estimate_w<T: Real>(obs: &[EveObservation<T>]) -> Result<Vec<Complex<T>>> {
    let (psi, z) = stack(obs)?;
    let w = pinv(&psi, ATTACK_RANK_TOL)?.try_mul(&z)?;
    Ok(w.as_slice().to_vec())
}

/// Optional post-step: rescale every nonzero entry to unit modulus.
pub fn project_unit_modulus<T: Real>(w: &[Complex<T>]) -> Vec<Complex<T>> {
    w.iter()
        .map(|z| {
            let r = z.norm();
            if r > T::zero() {
                z / r
            } else {
                Complex::new(T::one(), T::zero())
            }
        })
        .collect()
}

/// `H_hat_AB = G_RB · diag(w_hat) · G_AR + G_AB`.
pub fn reconstruct_legitimate<T: Real>(w_hat: &[Complex<T>], set: &ChannelSet<T>) -> Result<Matrix<T>> {
    set.legitimate_with(w_hat)
}

/// `||H_hat - H||_F / ||H||_F`.
pub fn nrmse<T: Real>(h_hat: &Matrix<T>, h: &Matrix<T>) -> Result<T> {
    let denom = h.frobenius_norm();
    if denom == T::zero() {
        return Err(Error::Degenerate("NRMSE reference channel is zero".into()));
    }
    Ok(h_hat.try_sub(h)?.frobenius_norm() / denom)
}

#[derive(Debug, Clone)]
pub struct AttackOutcome<T: Real> {
    pub w_hat: Vec<Complex<T>>,
    pub h_hat: Matrix<T>,
    pub nrmse: T,
    pub stacked_rank: usize,
}

/// Full colluded attack with the first `eves` eavesdroppers of `set`.
pub fn colluded_attack<T: Real, R: Rng + ?Sized>(
    set: &ChannelSet<T>,
    pilot: &PilotMatrix<T>,
    eves: usize,
    noise_var: T,
    project: bool,
    rng: &mut R,
) -> Result<AttackOutcome<T>> {
    if eves == 0 || eves > set.direct.eve_count() {
        return Err(Error::IndexOutOfRange {
            index: eves,
            valid: format!("1..={}", set.direct.eve_count()),
        });
    }
    let obs = (0..eves)
        .map(|m| EveObservation::observe(set, m, pilot, noise_var, rng))
        .collect::<Result<Vec<_>>>()?;
    let (psi, z) = stack(&obs)?;
    let stacked_rank = rank(&psi, ATTACK_RANK_TOL)?;
    let mut w_hat = pinv(&psi, ATTACK_RANK_TOL)?.try_mul(&z)?.as_slice().to_vec();
    if project {
        w_hat = project_unit_modulus(&w_hat);
    }
    let h_hat = reconstruct_legitimate(&w_hat, set)?;
    let (h, _) = set.cascaded()?;
    let nrmse = nrmse(&h_hat, &h)?;
    Ok(AttackOutcome {
        w_hat,
        h_hat,
        nrmse,
        stacked_rank,
    })
}
