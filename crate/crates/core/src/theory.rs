//! Closed-form Gaussian approximations for the largest singular value of a
//! channel times a random Gaussian probe.
//!
//! Everything reduces to matching two moments of `sigma^2` against a
//! Gaussian `N(a, b)`: `a^2 + b = S1` and `2b^2 + 4a^2 b = S2`, solved by
//! `a^2 = sqrt(S1^2 - S2/2)`, `b = S1 - a^2`.
//!
//! With `s = sum_n (sum_m delta^2[m][n] |v_m|^2)^2`:
//!
//! * noiseless: `S1 = 2 C xi^2`, `S2 = 4 xi^4 s`
//! * with noise of per-part variance `eps^2`:
//!   `S1 = 2 C xi^2 + 2 D eps^2`, `S2 = 4 xi^4 s + 8 C xi^2 eps^2 + 4 D eps^4`

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{compact_svd, Matrix, DEFAULT_RANK_TOL};
use crate::sampling::VarianceProfile;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianApprox<T: Real> {
    pub mean: T,
    pub variance: T,
}

impl<T: Real> GaussianApprox<T> {
    pub fn std_dev(&self) -> T {
        self.variance.sqrt()
    }

    /// `mean^2 + variance`, the second moment of the approximated value.
    pub fn second_moment(&self) -> T {
        self.mean * self.mean + self.variance
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentBounds<T: Real> {
    pub eta_min: T,
    pub eta_max: T,
    pub iota_sq_min: T,
    pub iota_sq_max: T,
}

impl<T: Real> MomentBounds<T> {
    pub fn contains(&self, g: &GaussianApprox<T>, rel_tol: T) -> bool {
        let slack = |x: T| x.abs() * rel_tol;
        g.mean >= self.eta_min - slack(self.eta_min)
            && g.mean <= self.eta_max + slack(self.eta_max)
            && g.variance >= self.iota_sq_min - slack(self.iota_sq_max)
            && g.variance <= self.iota_sq_max + slack(self.iota_sq_max)
    }
}

/// Solves `a^2 + b = s1`, `2b^2 + 4a^2 b = s2` for `a >= 0`, `b >= 0`.
pub fn solve_moment_pair<T: Real>(s1: T, s2: T) -> Result<GaussianApprox<T>> {
    if !(s1.is_finite() && s2.is_finite()) {
        return Err(Error::param("moments", "must be finite"));
    }
    let radicand = s1 * s1 - s2 / T::lit(2.0);
    if radicand < T::zero() {
        return Err(Error::NegativeRadicand {
            context: "moment pair",
            value: radicand.as_f64(),
        });
    }
    let a_sq = radicand.sqrt();
    let mut b = s1 - a_sq;
    if b < T::zero() {
        // only rounding can push b below zero, since s2 >= 0 gives a^2 <= s1
        if -b > s1.abs() * T::rel_tol(1e-12) {
            return Err(Error::NegativeRadicand {
                context: "moment pair variance",
                value: b.as_f64(),
            });
        }
        b = T::zero();
    }
    Ok(GaussianApprox {
        mean: a_sq.sqrt(),
        variance: b,
    })
}

/// `s = sum_n (sum_m delta^2[m][n] |v_m|^2)^2` for a unit vector `v`.
pub fn weighted_profile_energy<T: Real>(v: &[Complex<T>], profile: &VarianceProfile<T>) -> Result<T> {
    if v.len() != profile.rows() {
        return Err(Error::DimensionMismatch(format!(
            "singular vector has {} entries, profile has {} rows",
            v.len(),
            profile.rows()
        )));
    }
    let norm_sq: T = v.iter().map(|z| z.norm_sqr()).sum();
    if (norm_sq - T::one()).abs() > T::rel_tol(1e-9) {
        return Err(Error::param("singular vector", format!("must have unit norm, got norm^2 = {norm_sq}")));
    }
    let weights: Vec<T> = v.iter().map(|z| z.norm_sqr()).collect();
    Ok((0..profile.cols())
        .map(|n| {
            let t: T = weights.iter().enumerate().map(|(m, &w)| profile.delta_sq(m, n) * w).sum();
            t * t
        })
        .sum())
}

/// Noiseless mean `eta` and variance `iota^2` of `sigma_max(H X)`.
pub fn theorem2_moments<T: Real>(xi1: T, v: &[Complex<T>], profile: &VarianceProfile<T>) -> Result<GaussianApprox<T>> {
    prop2_moments(xi1, v, profile, T::zero())
}

/// Mean and variance of the noisy largest singular value at a fixed IRS
/// phase. Bob passes `V_{:,1}` of `H_AB` with Alice's profile; Alice passes
/// `U_{:,1}` with Bob's profile.
pub fn prop2_moments<T: Real>(xi1: T, weight: &[Complex<T>], profile: &VarianceProfile<T>, noise_var: T) -> Result<GaussianApprox<T>> {
    if !(xi1 >= T::zero() && xi1.is_finite()) {
        return Err(Error::param("xi1", format!("must be finite and >= 0, got {xi1}")));
    }
    if !(noise_var >= T::zero() && noise_var.is_finite()) {
        return Err(Error::param("noise variance", format!("must be finite and >= 0, got {noise_var}")));
    }
    let s = weighted_profile_energy(weight, profile)?;
    let c = profile.row_sum();
    let d = T::from_count(profile.cols());
    let (two, four, eight) = (T::lit(2.0), T::lit(4.0), T::lit(8.0));
    let xi2 = xi1 * xi1;
    let e2 = noise_var;
    let s1 = two * c * xi2 + two * d * e2;
    let s2 = four * xi2 * xi2 * s + eight * c * xi2 * e2 + four * d * e2 * e2;
    solve_moment_pair(s1, s2)
}

/// Bounds on `eta` and `iota^2` that hold for every unit weight vector.
///
/// The weighted column energy lies between `sum_n min_m delta^4` and
/// `sum_n max_m delta^4`; it also never exceeds `C^2`, which caps the upper
/// value for very uneven profiles.
pub fn prop1_bounds<T: Real>(xi1: T, profile: &VarianceProfile<T>) -> Result<MomentBounds<T>> {
    let c = profile.row_sum();
    let (mut s_lo, mut s_hi) = (T::zero(), T::zero());
    for n in 0..profile.cols() {
        let col = (0..profile.rows()).map(|m| profile.delta_sq(m, n));
        let (lo, hi) = col.fold((T::infinity(), T::zero()), |(lo, hi), x| (lo.min(x), hi.max(x)));
        s_lo += lo * lo;
        s_hi += hi * hi;
    }
    let s_hi = s_hi.min(c * c);
    let at = |s: T| -> Result<GaussianApprox<T>> {
        let xi2 = xi1 * xi1;
        solve_moment_pair(T::lit(2.0) * c * xi2, T::lit(4.0) * xi2 * xi2 * s)
    };
    let lo = at(s_lo)?;
    let hi = at(s_hi)?;
    Ok(MomentBounds {
        eta_min: hi.mean,
        eta_max: lo.mean,
        iota_sq_min: lo.variance,
        iota_sq_max: hi.variance,
    })
}

/// Approximations for both legitimate ends of one coherence round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegitimateMoments<T: Real> {
    pub xi1: T,
    pub alice: GaussianApprox<T>,
    pub bob: GaussianApprox<T>,
}

/// Evaluates the approximations for `sigma_A` and `sigma_B` given `H_AB`.
pub fn legitimate_moments<T: Real>(
    h_ab: &Matrix<T>,
    profile_a: &VarianceProfile<T>,
    profile_b: &VarianceProfile<T>,
    noise_var: T,
) -> Result<LegitimateMoments<T>> {
    let svd = compact_svd(h_ab, DEFAULT_RANK_TOL)?;
    if svd.rank == 0 {
        return Err(Error::Degenerate("legitimate channel is zero".into()));
    }
    let xi1 = svd.largest();
    let bob = prop2_moments(xi1, &svd.v.column(0), profile_a, noise_var)?;
    let alice = prop2_moments(xi1, &svd.u.column(0), profile_b, noise_var)?;
    Ok(LegitimateMoments { xi1, alice, bob })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{complex_normal, RngStream};

    type C = Complex<f64>;

    fn unit_vector(n: usize, seed: u64) -> Vec<C> {
        let mut rng = RngStream::new(seed).rng();
        let v: Vec<C> = (0..n).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.into_iter().map(|z| z / norm).collect()
    }

    #[test]
    fn uniform_profile_closed_form() {
        let (c, d, xi) = (1.5, 40usize, 2.0);
        let p = VarianceProfile::uniform(4, d, c).unwrap();
        let v = unit_vector(4, 1);
        let g = theorem2_moments(xi, &v, &p).unwrap();
        let dd = d as f64;
        let eta = xi * (2.0 * c * c * (2.0 - 1.0 / dd)).powf(0.25);
        let iota = xi * xi * c * (2.0 - (4.0 - 2.0 / dd).sqrt());
        assert!((g.mean - eta).abs() < 1e-12 * eta);
        assert!((g.variance - iota).abs() < 1e-12 * iota);
        assert!((g.second_moment() - 2.0 * c * xi * xi).abs() < 1e-12 * 2.0 * c * xi * xi);
    }

    #[test]
    fn large_probe_limit() {
        let p = VarianceProfile::uniform(2, 1_000_000, 1.0).unwrap();
        let v = vec![C::new(1.0, 0.0), C::new(0.0, 0.0)];
        let g = theorem2_moments(3.0, &v, &p).unwrap();
        assert!((g.mean - 3.0 * 2f64.sqrt()).abs() < 1e-4 * 3.0 * 2f64.sqrt());
        assert!(g.variance < 1e-4 * 9.0);
    }

    #[test]
    fn noiseless_prop2_equals_theorem2() {
        let mut rng = RngStream::new(2).rng();
        let p = VarianceProfile::random(4, 30, 2.0, &mut rng).unwrap();
        let v = unit_vector(4, 3);
        assert_eq!(prop2_moments(1.7, &v, &p, 0.0).unwrap(), theorem2_moments(1.7, &v, &p).unwrap());
    }

    #[test]
    fn noisy_second_moment_identity() {
        let mut rng = RngStream::new(4).rng();
        for seed in 0..50 {
            let d = 10 + seed as usize;
            let p = VarianceProfile::random(3, d, 0.7, &mut rng).unwrap();
            let v = unit_vector(3, 100 + seed);
            let (xi, e2) = (0.5 + seed as f64 * 0.1, 0.01 * seed as f64);
            let g = prop2_moments(xi, &v, &p, e2).unwrap();
            let target = 2.0 * 0.7 * xi * xi + 2.0 * d as f64 * e2;
            assert!((g.second_moment() - target).abs() <= 1e-10 * target);
        }
    }

    #[test]
    fn bounds_collapse_for_uniform_profile() {
        let p = VarianceProfile::uniform(4, 25, 1.0).unwrap();
        let b = prop1_bounds(2.0, &p).unwrap();
        let g = theorem2_moments(2.0, &unit_vector(4, 5), &p).unwrap();
        assert!((b.eta_min - b.eta_max).abs() < 1e-14);
        assert!((b.eta_min - g.mean).abs() < 1e-12 * g.mean);
        assert!((b.iota_sq_min - b.iota_sq_max).abs() < 1e-14);
    }

    #[test]
    fn bounds_bracket_random_profiles() {
        let mut rng = RngStream::new(6).rng();
        for seed in 0..100 {
            let p = VarianceProfile::random(4, 20, 1.0, &mut rng).unwrap();
            let b = prop1_bounds(1.3, &p).unwrap();
            assert!(b.eta_min <= b.eta_max && b.iota_sq_min <= b.iota_sq_max);
            let g = theorem2_moments(1.3, &unit_vector(4, seed), &p).unwrap();
            assert!(b.contains(&g, 1e-12), "{b:?} {g:?}");
        }
    }

    #[test]
    fn uneven_profile_keeps_bounds_finite() {
        // each row puts all power on its own column
        let mut deltas = vec![0.0f64; 16];
        for m in 0..4 {
            deltas[m * 4 + m] = 1.0;
        }
        let p = VarianceProfile::new(4, 4, deltas, 1.0).unwrap();
        let b = prop1_bounds(1.0, &p).unwrap();
        assert!(b.eta_min.is_finite() && b.iota_sq_max.is_finite());
        let e1 = vec![C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0)];
        assert!(b.contains(&theorem2_moments(1.0, &e1, &p).unwrap(), 1e-12));
    }

    #[test]
    fn solver_rejects_impossible_moments() {
        assert!(matches!(solve_moment_pair(1.0, 3.0), Err(Error::NegativeRadicand { .. })));
        let g = solve_moment_pair(2.0, 0.0).unwrap();
        assert_eq!(g.variance, 0.0);
        assert!((g.mean - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn input_validation() {
        let p = VarianceProfile::uniform(2, 5, 1.0).unwrap();
        let not_unit = vec![C::new(1.0, 0.0), C::new(1.0, 0.0)];
        assert!(theorem2_moments(1.0, &not_unit, &p).is_err());
        assert!(theorem2_moments(1.0, &[C::new(1.0, 0.0)], &p).is_err());
        assert!(prop2_moments(1.0, &unit_vector(2, 1), &p, -1.0).is_err());
    }

    #[test]
    fn both_directions_share_xi() {
        let mut rng = RngStream::new(7).rng();
        let data = (0..12).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let h = Matrix::from_vec(3, 4, data).unwrap();
        let pa = VarianceProfile::random(4, 30, 1.0, &mut rng).unwrap();
        let pb = VarianceProfile::random(3, 30, 1.0, &mut rng).unwrap();
        let m = legitimate_moments(&h, &pa, &pb, 0.0).unwrap();
        let ba = prop1_bounds(m.xi1, &pa).unwrap();
        let bb = prop1_bounds(m.xi1, &pb).unwrap();
        assert!(ba.contains(&m.bob, 1e-12));
        assert!(bb.contains(&m.alice, 1e-12));
    }
}
