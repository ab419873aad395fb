//! Narrow-band geometric channels and IRS-cascaded legitimate and wiretap
//! channels.
//!
//! A direct channel from node `a` to node `b` is an `N_b x N_a` matrix. The
//! legitimate channel is `H_AB = G_RB · diag(w) · G_AR + G_AB` and Bob's
//! reverse channel is its conjugate transpose.

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::sampling::{complex_normal, IrsPhaseVector};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArrayKind {
    /// Uniform linear array (`x = 1`); responses use elevation `pi/2`.
    Ula,
    /// Uniform planar array.
    Upa,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry<T: Real> {
    pub kind: ArrayKind,
    pub x: usize,
    pub y: usize,
    pub spacing: T,
    pub wavelength: T,
}

impl<T: Real> ArrayGeometry<T> {
    /// `n`-element ULA with half-wavelength spacing.
    pub fn ula(n: usize) -> Result<Self> {
        Self::new(ArrayKind::Ula, 1, n, T::lit(0.5), T::one())
    }

    /// `nx x ny` UPA with half-wavelength spacing.
    pub fn upa(nx: usize, ny: usize) -> Result<Self> {
        Self::new(ArrayKind::Upa, nx, ny, T::lit(0.5), T::one())
    }

    pub fn new(kind: ArrayKind, x: usize, y: usize, spacing: T, wavelength: T) -> Result<Self> {
        if x == 0 || y == 0 {
            return Err(Error::param("array geometry", format!("dims {x}x{y} must be >= 1")));
        }
        if kind == ArrayKind::Ula && x != 1 {
            return Err(Error::param("array geometry", "a ULA has x = 1"));
        }
        if !(spacing > T::zero() && wavelength > T::zero()) {
            return Err(Error::param("array geometry", "spacing and wavelength must be positive"));
        }
        Ok(Self {
            kind,
            x,
            y,
            spacing,
            wavelength,
        })
    }

    /// Number of elements `x * y`.
    pub fn len(&self) -> usize {
        self.x * self.y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Array response `f(az, el) = a_x(u) ⊗ a_y(v)` with
/// `u = 2*pi*d*cos(el)/lambda` and `v = 2*pi*d*sin(el)*sin(az)/lambda`.
pub fn array_response<T: Real>(geom: &ArrayGeometry<T>, azimuth: T, elevation: T) -> Matrix<T> {
    let k = T::TAU() * geom.spacing / geom.wavelength;
    let u = k * elevation.cos();
    let v = k * elevation.sin() * azimuth.sin();
    let mut data = Vec::with_capacity(geom.len());
    for i in 0..geom.x {
        for j in 0..geom.y {
            let phase = T::from_count(i) * u + T::from_count(j) * v;
            data.push(Complex::from_polar(T::one(), phase));
        }
    }
    Matrix::from_vec(geom.len(), 1, data).expect("geometry has at least one element")
}

fn endpoint_response<T: Real>(geom: &ArrayGeometry<T>, azimuth: T, elevation: T) -> Matrix<T> {
    match geom.kind {
        ArrayKind::Ula => array_response(geom, azimuth, T::FRAC_PI_2()),
        ArrayKind::Upa => array_response(geom, azimuth, elevation),
    }
}

/// One propagation path: complex gain plus arrival and departure angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathParams<T: Real> {
    pub gain: Complex<T>,
    pub aoa_azimuth: T,
    pub aoa_elevation: T,
    pub aod_azimuth: T,
    pub aod_elevation: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectChannel<T: Real> {
    pub matrix: Matrix<T>,
    pub path_loss: T,
    pub paths: Vec<PathParams<T>>,
}

/// Geometric channel `G = sqrt(N_tx*N_rx/rho) * sum_l g_l f_rx(aoa_l) f_tx(aod_l)^H`,
/// shaped `N_rx x N_tx`.
pub fn geometric_channel<T: Real>(
    tx: &ArrayGeometry<T>,
    rx: &ArrayGeometry<T>,
    paths: &[PathParams<T>],
    path_loss: T,
) -> Result<DirectChannel<T>> {
    if !(path_loss > T::zero() && path_loss.is_finite()) {
        return Err(Error::param("path loss", format!("must be positive, got {path_loss}")));
    }
    if paths.is_empty() {
        return Err(Error::param("paths", "need at least one path"));
    }
    let (n_tx, n_rx) = (tx.len(), rx.len());
    let scale = (T::from_count(n_tx * n_rx) / path_loss).sqrt();
    let mut g = Matrix::zeros(n_rx, n_tx);
    for p in paths {
        let f_rx = endpoint_response(rx, p.aoa_azimuth, p.aoa_elevation);
        let f_tx = endpoint_response(tx, p.aod_azimuth, p.aod_elevation);
        let term = (&f_rx * &f_tx.adjoint()).scale(p.gain * scale);
        g = &g + &term;
    }
    Ok(DirectChannel {
        matrix: g,
        path_loss,
        paths: paths.to_vec(),
    })
}

/// Path statistics for randomly drawn direct channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    pub min_paths: usize,
    pub max_paths: usize,
    pub path_loss: f64,
}

impl Default for PathStats {
    fn default() -> Self {
        Self {
            min_paths: 1,
            max_paths: 10,
            path_loss: 1.0,
        }
    }
}

impl PathStats {
    pub fn validate(&self) -> Result<()> {
        if self.min_paths == 0 || self.min_paths > self.max_paths {
            return Err(Error::param(
                "path count range",
                format!("need 1 <= min <= max, got {}..={}", self.min_paths, self.max_paths),
            ));
        }
        if !(self.path_loss > 0.0 && self.path_loss.is_finite()) {
            return Err(Error::param("path loss", format!("must be positive, got {}", self.path_loss)));
        }
        Ok(())
    }
}

/// Draws `L ~ U{min..=max}` paths: a unit line-of-sight gain for the first
/// path, standard complex Gaussian gains (per-part variance 1/2) for the
/// rest, and all angles uniform on `[0, 2*pi)`.
pub fn random_paths<T: Real, R: Rng + ?Sized>(stats: &PathStats, rng: &mut R) -> Vec<PathParams<T>> {
    let count = rng.random_range(stats.min_paths..=stats.max_paths);
    random_paths_exact(count, rng)
}

/// Like [`random_paths`] with a fixed path count.
pub fn random_paths_exact<T: Real, R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<PathParams<T>> {
    let angle = |rng: &mut R| T::lit(rng.random::<f64>() * std::f64::consts::TAU);
    (0..count)
        .map(|l| {
            let gain = if l == 0 {
                Complex::new(T::one(), T::zero())
            } else {
                complex_normal(rng, T::lit(std::f64::consts::FRAC_1_SQRT_2))
            };
            PathParams {
                gain,
                aoa_azimuth: angle(rng),
                aoa_elevation: angle(rng),
                aod_azimuth: angle(rng),
                aod_elevation: angle(rng),
            }
        })
        .collect()
}

/// Node counts and geometry for a synthesized scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Topology<T: Real> {
    pub alice: ArrayGeometry<T>,
    pub bob: ArrayGeometry<T>,
    pub eve: ArrayGeometry<T>,
    pub irs: ArrayGeometry<T>,
    pub eve_count: usize,
    pub paths: PathStats,
}

impl<T: Real> Topology<T> {
    /// ULA endpoints and a UPA surface.
    pub fn new(n_a: usize, n_b: usize, n_e: usize, irs_x: usize, irs_y: usize, eve_count: usize, paths: PathStats) -> Result<Self> {
        paths.validate()?;
        Ok(Self {
            alice: ArrayGeometry::ula(n_a)?,
            bob: ArrayGeometry::ula(n_b)?,
            eve: ArrayGeometry::ula(n_e)?,
            irs: ArrayGeometry::upa(irs_x, irs_y)?,
            eve_count,
            paths,
        })
    }

    pub fn irs_len(&self) -> usize {
        self.irs.len()
    }
}

/// Wiretap links of one eavesdropper.
#[derive(Debug, Clone, PartialEq)]
pub struct EveLink<T: Real> {
    /// IRS to Eve, `N_E x N_R`.
    pub g_re: DirectChannel<T>,
    /// Alice to Eve, `N_E x N_A`.
    pub g_ae: DirectChannel<T>,
}

/// The static direct channels of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectChannels<T: Real> {
    /// Alice to IRS, `N_R x N_A`.
    pub g_ar: DirectChannel<T>,
    /// IRS to Bob, `N_B x N_R`.
    pub g_rb: DirectChannel<T>,
    /// Alice to Bob, `N_B x N_A`.
    pub g_ab: DirectChannel<T>,
    pub eves: Vec<EveLink<T>>,
}

impl<T: Real> DirectChannels<T> {
    pub fn random<R: Rng + ?Sized>(topo: &Topology<T>, rng: &mut R) -> Result<Self> {
        let rho = T::lit(topo.paths.path_loss);
        let draw = |tx: &ArrayGeometry<T>, rx: &ArrayGeometry<T>, rng: &mut R| {
            let paths = random_paths(&topo.paths, rng);
            geometric_channel(tx, rx, &paths, rho)
        };
        let g_ar = draw(&topo.alice, &topo.irs, rng)?;
        let g_rb = draw(&topo.irs, &topo.bob, rng)?;
        let g_ab = draw(&topo.alice, &topo.bob, rng)?;
        let mut eves = Vec::with_capacity(topo.eve_count);
        for _ in 0..topo.eve_count {
            let g_re = draw(&topo.irs, &topo.eve, rng)?;
            let g_ae = draw(&topo.alice, &topo.eve, rng)?;
            eves.push(EveLink { g_re, g_ae });
        }
        Ok(Self { g_ar, g_rb, g_ab, eves })
    }

    pub fn n_a(&self) -> usize {
        self.g_ar.matrix.cols()
    }

    pub fn n_b(&self) -> usize {
        self.g_rb.matrix.rows()
    }

    pub fn n_r(&self) -> usize {
        self.g_ar.matrix.rows()
    }

    pub fn eve_count(&self) -> usize {
        self.eves.len()
    }

    fn validate(&self) -> Result<()> {
        let (n_a, n_b, n_r) = (self.n_a(), self.n_b(), self.n_r());
        let check = |name: &str, m: &Matrix<T>, shape: (usize, usize)| {
            if m.shape() == shape {
                Ok(())
            } else {
                Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {}x{}",
                    m.rows(),
                    m.cols(),
                    shape.0,
                    shape.1
                )))
            }
        };
        check("G_RB", &self.g_rb.matrix, (n_b, n_r))?;
        check("G_AB", &self.g_ab.matrix, (n_b, n_a))?;
        for (m, e) in self.eves.iter().enumerate() {
            let n_e = e.g_re.matrix.rows();
            check(if m == 0 { "G_RE" } else { "G_RE_m" }, &e.g_re.matrix, (n_e, n_r))?;
            check("G_AE_m", &e.g_ae.matrix, (n_e, n_a))?;
        }
        Ok(())
    }
}

/// `G_out · diag(w) · G_in + G_direct`, the generic IRS-cascaded channel.
/// `w` is taken as free complex values, so estimates need not be unit-modulus.
pub fn cascade<T: Real>(g_out: &Matrix<T>, w: &[Complex<T>], g_in: &Matrix<T>, direct: &Matrix<T>) -> Result<Matrix<T>> {
    if g_out.cols() != w.len() || g_in.rows() != w.len() {
        return Err(Error::DimensionMismatch(format!(
            "cascade: G_out {}x{}, w {}, G_in {}x{}",
            g_out.rows(),
            g_out.cols(),
            w.len(),
            g_in.rows(),
            g_in.cols()
        )));
    }
    let reflected = g_out.scale_columns(w).try_mul(g_in)?;
    Ok(reflected.try_add(direct)?)
}

/// Direct channels together with the IRS phase held during one coherence round.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet<T: Real> {
    pub direct: DirectChannels<T>,
    pub irs: IrsPhaseVector<T>,
}

impl<T: Real> ChannelSet<T> {
    pub fn new(direct: DirectChannels<T>, irs: IrsPhaseVector<T>) -> Result<Self> {
        direct.validate()?;
        if irs.len() != direct.n_r() {
            return Err(Error::DimensionMismatch(format!(
                "IRS vector has {} elements, channels expect {}",
                irs.len(),
                direct.n_r()
            )));
        }
        Ok(Self { direct, irs })
    }

    /// Same direct channels under a different IRS phase.
    pub fn with_irs(&self, irs: IrsPhaseVector<T>) -> Result<Self> {
        Self::new(self.direct.clone(), irs)
    }

    /// `(H_AB, H_BA)` with `H_BA = H_AB^H`.
    pub fn cascaded(&self) -> Result<(Matrix<T>, Matrix<T>)> {
        let h_ab = self.legitimate_with(self.irs.weights())?;
        let h_ba = h_ab.adjoint();
        Ok((h_ab, h_ba))
    }

    /// `H_AB` evaluated at an arbitrary phase vector.
    pub fn legitimate_with(&self, w: &[Complex<T>]) -> Result<Matrix<T>> {
        let d = &self.direct;
        cascade(&d.g_rb.matrix, w, &d.g_ar.matrix, &d.g_ab.matrix)
    }

    /// `H_AE_m = G_RE_m · diag(w) · G_AR + G_AE_m` for the 0-based Eve index `m`.
    pub fn eve_channel(&self, m: usize) -> Result<Matrix<T>> {
        self.eve_channel_with(m, self.irs.weights())
    }

    pub fn eve_channel_with(&self, m: usize, w: &[Complex<T>]) -> Result<Matrix<T>> {
        let e = self.direct.eves.get(m).ok_or_else(|| Error::IndexOutOfRange {
            index: m,
            valid: format!("0..{}", self.direct.eves.len()),
        })?;
        cascade(&e.g_re.matrix, w, &self.direct.g_ar.matrix, &e.g_ae.matrix)
    }

    /// Row-stacked channel of all colluding Eves (`M*N_E x N_A`).
    pub fn stacked_eve_channel(&self) -> Result<Matrix<T>> {
        self.stacked_eve_channel_with(self.irs.weights())
    }

    pub fn stacked_eve_channel_with(&self, w: &[Complex<T>]) -> Result<Matrix<T>> {
        if self.direct.eves.is_empty() {
            return Err(Error::param("eve count", "no eavesdroppers in the channel set"));
        }
        let blocks = (0..self.direct.eves.len())
            .map(|m| self.eve_channel_with(m, w))
            .collect::<Result<Vec<_>>>()?;
        Ok(Matrix::vstack(&blocks)?)
    }
}
