//! Key MI under the Gaussian-mixture model of the largest singular values.
//!
//! Given `w`, `sigma_A` and `sigma_B` are independent Gaussians. Over a set
//! of phase vectors with weights `pi_c` the joint law is
//! `sum_c pi_c N_A,c(a) N_B,c(b)`, and the MI integral is evaluated on a
//! rectangular midpoint grid. With `Phi_A`, `Phi_B` the cell-by-component
//! probability tables, the joint cell masses are `Phi_A diag(pi) Phi_B^T`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, Normal};

use super::{MiEstimate, MiMethod, LN2};
use crate::channel::{ChannelSet, DirectChannels};
use crate::error::{Error, Result};
use crate::sampling::{IrsPhaseVector, VarianceProfile};
use crate::scalar::Real;
use crate::theory::{legitimate_moments, GaussianApprox};

/// Allowed deviation of each marginal's total grid mass from 1.
const MASS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub a: GaussianApprox<f64>,
    pub b: GaussianApprox<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Grid points per axis on the first pass; doubled until converged.
    /// `max_points` must allow at least one doubling.
    pub initial_points: usize,
    pub max_points: usize,
    /// Convergence target for successive estimates, in bits.
    pub tolerance: f64,
    /// Half-width of the grid around each component, in standard deviations.
    pub sigmas: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            initial_points: 64,
            max_points: 1024,
            tolerance: 1e-5,
            sigmas: 6.0,
        }
    }
}

/// Midpoint grid covering `mean +- sigmas * std` for every component, with
/// per-cell probabilities `h * pdf(midpoint)` (`points` rows, one column per
/// component, row-major). The integrand is smooth and decays fast, so the
/// midpoint rule converges quickly once the cells resolve the narrowest
/// component.
struct AxisTable {
    masses: Vec<f64>,
}

impl AxisTable {
    fn new(laws: &[GaussianApprox<f64>], points: usize, sigmas: f64) -> Result<Self> {
        let lo = laws.iter().map(|g| g.mean - sigmas * g.std_dev()).fold(f64::INFINITY, f64::min);
        let hi = laws.iter().map(|g| g.mean + sigmas * g.std_dev()).fold(f64::NEG_INFINITY, f64::max);
        let h = (hi - lo) / points as f64;
        let c = laws.len();
        let mut masses = vec![0.0; points * c];
        for (j, g) in laws.iter().enumerate() {
            let dist = Normal::new(g.mean, g.std_dev()).map_err(|e| Error::param("mixture component", e.to_string()))?;
            for i in 0..points {
                masses[i * c + j] = h * dist.pdf(lo + (i as f64 + 0.5) * h);
            }
        }
        Ok(Self { masses })
    }
}

fn grid_mi(components: &[MixtureComponent], points: usize, sigmas: f64) -> Result<(f64, f64, f64)> {
    let a: Vec<_> = components.iter().map(|m| m.a).collect();
    let b: Vec<_> = components.iter().map(|m| m.b).collect();
    let ta = AxisTable::new(&a, points, sigmas)?;
    let tb = AxisTable::new(&b, points, sigmas)?;
    let c = components.len();
    let pi: Vec<f64> = components.iter().map(|m| m.weight).collect();
    let marginal = |t: &AxisTable| -> Vec<f64> {
        (0..points)
            .map(|i| (0..c).map(|j| pi[j] * t.masses[i * c + j]).sum())
            .collect()
    };
    let pa = marginal(&ta);
    let pb = marginal(&tb);
    let ln_pb: Vec<f64> = pb.iter().map(|p| p.ln()).collect();
    let mut nats = 0.0;
    let mut weighted_a = vec![0.0; c];
    for i in 0..points {
        if pa[i] <= 0.0 {
            continue;
        }
        let ln_pa = pa[i].ln();
        for j in 0..c {
            weighted_a[j] = pi[j] * ta.masses[i * c + j];
        }
        for k in 0..points {
            let p: f64 = weighted_a.iter().zip(&tb.masses[k * c..(k + 1) * c]).map(|(x, y)| x * y).sum();
            if p > 0.0 {
                nats += p * (p.ln() - ln_pa - ln_pb[k]);
            }
        }
    }
    Ok((nats / LN2, pa.iter().sum(), pb.iter().sum()))
}

/// MI in bits of the mixture `sum_c w_c N(a_c) N(b_c)`. Weights are
/// normalized internally.
///
/// Diagnostics: `grid_points`, `mass_a`, `mass_b` (total marginal mass on
/// the grid) and `convergence` (change over the last refinement).
pub fn mixture_mi(components: &[MixtureComponent], config: &QuadratureConfig) -> Result<MiEstimate> {
    if components.is_empty() {
        return Err(Error::param("mixture", "needs at least one component"));
    }
    if config.initial_points < 2 || config.max_points < 2 * config.initial_points || !(config.sigmas > 0.0) {
        return Err(Error::param("quadrature config", format!("{config:?}")));
    }
    for m in components {
        if !(m.weight >= 0.0 && m.weight.is_finite()) {
            return Err(Error::param("mixture weight", format!("{} is not a finite nonnegative value", m.weight)));
        }
        for g in [m.a, m.b] {
            if !(g.variance > 0.0 && g.variance.is_finite() && g.mean.is_finite()) {
                return Err(Error::param("mixture component", format!("mean {} variance {}", g.mean, g.variance)));
            }
        }
    }
    let total: f64 = components.iter().map(|m| m.weight).sum();
    if !(total > 0.0) {
        return Err(Error::param("mixture weights", "sum to zero"));
    }
    let comps: Vec<MixtureComponent> = components
        .iter()
        .map(|m| MixtureComponent {
            weight: m.weight / total,
            ..*m
        })
        .collect();

    let mut points = config.initial_points;
    let (mut prev, ..) = grid_mi(&comps, points, config.sigmas)?;
    loop {
        let next_points = points * 2;
        let (bits, mass_a, mass_b) = grid_mi(&comps, next_points, config.sigmas)?;
        let change = (bits - prev).abs();
        points = next_points;
        if change <= config.tolerance {
            for mass in [mass_a, mass_b] {
                if (mass - 1.0).abs() > MASS_TOL {
                    return Err(Error::Quadrature {
                        achieved: (mass - 1.0).abs(),
                        target: MASS_TOL,
                    });
                }
            }
            return Ok(MiEstimate::new(bits, MiMethod::MixtureNumeric, comps.len())
                .with_diagnostic("grid_points", points as f64)
                .with_diagnostic("mass_a", mass_a)
                .with_diagnostic("mass_b", mass_b)
                .with_diagnostic("convergence", change));
        }
        if points * 2 > config.max_points {
            return Err(Error::Quadrature {
                achieved: change,
                target: config.tolerance,
            });
        }
        prev = bits;
    }
}

/// Key MI predicted by the per-phase Gaussian approximations, with equal
/// weight on every supplied phase vector.
pub fn mi_mixture_numeric<T: Real>(
    w_samples: &[IrsPhaseVector<T>],
    direct: &DirectChannels<T>,
    profile_a: &VarianceProfile<T>,
    profile_b: &VarianceProfile<T>,
    noise_var: T,
    config: &QuadratureConfig,
) -> Result<MiEstimate> {
    if w_samples.is_empty() {
        return Err(Error::param("phase samples", "need at least one"));
    }
    let to_f64 = |g: GaussianApprox<T>| GaussianApprox {
        mean: g.mean.as_f64(),
        variance: g.variance.as_f64(),
    };
    let components = w_samples
        .iter()
        .map(|w| {
            let set = ChannelSet::new(direct.clone(), w.clone())?;
            let (h_ab, _) = set.cascaded()?;
            let m = legitimate_moments(&h_ab, profile_a, profile_b, noise_var)?;
            Ok(MixtureComponent {
                weight: 1.0,
                a: to_f64(m.alice),
                b: to_f64(m.bob),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    mixture_mi(&components, config)
}
