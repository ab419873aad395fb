use num_complex::Complex;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use irskg::channel::{ChannelSet, DirectChannels, PathStats, Topology};
use irskg::linalg::{kron, pinv, singular_values, vec, Matrix, DEFAULT_RANK_TOL};
use irskg::rgm::{gray_bits, quantize};
use irskg::sampling::{complex_gaussian_matrix, complex_normal, random_unitary, sample_irs_phase, PhaseAlphabet, RngStream, VarianceProfile};
use irskg::stats;
use irskg::theory::{prop1_bounds, prop2_moments, theorem2_moments};

fn matrix<T: irskg::Real>(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<T> {
    let data = (0..rows * cols).map(|_| complex_normal(rng, T::lit(std::f64::consts::FRAC_1_SQRT_2))).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn unit_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex<f64>> {
    let v: Vec<Complex<f64>> = (0..n).map(|_| complex_normal(rng, 1.0)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

fn close(a: &Matrix<f64>, b: &Matrix<f64>, tol: f64) -> bool {
    a.shape() == b.shape() && a.try_sub(b).unwrap().max_abs() <= tol * (1.0 + a.max_abs().max(b.max_abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vec_of_product_is_kron_times_vec(m in 1usize..5, n in 1usize..5, p in 1usize..5, q in 1usize..5, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = matrix::<f64>(m, n, &mut rng);
        let x = matrix::<f64>(n, p, &mut rng);
        let b = matrix::<f64>(p, q, &mut rng);
        let lhs = vec(&a.try_mul(&x).unwrap().try_mul(&b).unwrap());
        let rhs = kron(&b.transpose(), &a).try_mul(&vec(&x)).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn pseudoinverse_satisfies_penrose_conditions(m in 1usize..7, n in 1usize..7, r in 1usize..7, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = r.min(m).min(n);
        let a = matrix::<f64>(m, r, &mut rng).try_mul(&matrix(r, n, &mut rng)).unwrap();
        let p = pinv(&a, DEFAULT_RANK_TOL).unwrap();
        let ap = a.try_mul(&p).unwrap();
        let pa = p.try_mul(&a).unwrap();
        prop_assert!(close(&ap.try_mul(&a).unwrap(), &a, 1e-9));
        prop_assert!(close(&pa.try_mul(&p).unwrap(), &p, 1e-9));
        prop_assert!(close(&ap.adjoint(), &ap, 1e-9));
        prop_assert!(close(&pa.adjoint(), &pa, 1e-9));
    }

    #[test]
    fn unitary_left_factor_keeps_singular_values(n in 1usize..9, m in 1usize..9, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_unitary::<f64, _>(n, &mut rng);
        let q = matrix::<f64>(n, m, &mut rng);
        let a = singular_values(&g.try_mul(&q).unwrap()).unwrap();
        let b = singular_values(&q).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-10 * b[0]);
        }
    }

    #[test]
    fn single_precision_tracks_double(n in 1usize..6, m in 1usize..6, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a64 = matrix::<f64>(n, m, &mut rng);
        let data: Vec<Complex<f32>> = a64.as_slice().iter().map(|z| Complex::new(z.re as f32, z.im as f32)).collect();
        let a32 = Matrix::from_vec(n, m, data).unwrap();
        let s64 = singular_values(&a64).unwrap();
        let s32 = singular_values(&a32).unwrap();
        for (x, y) in s64.iter().zip(&s32) {
            prop_assert!((x - *y as f64).abs() <= 1e-4 * (1.0 + s64[0]));
        }
    }

    #[test]
    fn moment_identities_hold(n in 1usize..9, d in 1usize..80, c in 0.05f64..20.0, xi in 0.01f64..50.0, e2 in 0.0f64..20.0, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let profile = VarianceProfile::random(n, d, c, &mut rng).unwrap();
        let v = unit_vector(n, &mut rng);
        let t2 = theorem2_moments(xi, &v, &profile).unwrap();
        let target = 2.0 * c * xi * xi;
        prop_assert!((t2.second_moment() - target).abs() <= 1e-10 * target);
        let p2 = prop2_moments(xi, &v, &profile, e2).unwrap();
        let target = target + 2.0 * d as f64 * e2;
        prop_assert!((p2.second_moment() - target).abs() <= 1e-10 * target);
        prop_assert_eq!(prop2_moments(xi, &v, &profile, 0.0).unwrap(), t2);
        prop_assert!(prop1_bounds(xi, &profile).unwrap().contains(&t2, 1e-12));
    }

    #[test]
    fn irs_phases_have_unit_modulus(n in 1usize..40, k in 2u32..9, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for alphabet in [PhaseAlphabet::Continuous, PhaseAlphabet::Discrete(k)] {
            let w = sample_irs_phase::<f64, _>(n, alphabet, &mut rng).unwrap();
            prop_assert!(w.weights().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn reciprocity_holds(seed: u64) {
        let topo = Topology::<f64>::new(4, 3, 2, 2, 3, 1, PathStats::default()).unwrap();
        let mut rng = RngStream::new(seed).rng();
        let direct = DirectChannels::random(&topo, &mut rng).unwrap();
        let irs = sample_irs_phase(6, PhaseAlphabet::Continuous, &mut rng).unwrap();
        let (ab, ba) = ChannelSet::new(direct, irs).unwrap().cascaded().unwrap();
        prop_assert_eq!(ab.adjoint(), ba);
    }

    #[test]
    fn gray_neighbors_differ_in_one_bit(width in 1usize..10, index in 0usize..511) {
        let index = index % ((1 << width) - 1).max(1);
        let a = gray_bits(index, width);
        let b = gray_bits(index + 1, width);
        prop_assert_eq!(a.iter().zip(&b).filter(|(x, y)| x != y).count(), 1);
    }

    #[test]
    fn quantizer_accounts_for_every_round(values in prop::collection::vec(-1e3f64..1e3, 8..200), bits in 1usize..4, guard in 0.0f64..0.45) {
        if let Ok(key) = quantize(&values, bits, guard) {
            prop_assert_eq!(key.bits().len(), key.rounds().len() * bits);
            prop_assert_eq!(key.rounds().len() + key.censored_rounds().len(), values.len());
        }
    }
}

#[test]
fn sigma_max_is_close_to_gaussian_at_desk_scale() {
    let topo = Topology::<f64>::new(4, 4, 4, 2, 4, 1, PathStats::default()).unwrap();
    let mut rng = RngStream::new(42).rng();
    let direct = DirectChannels::random(&topo, &mut rng).unwrap();
    let irs = sample_irs_phase(8, PhaseAlphabet::Continuous, &mut rng).unwrap();
    let (h, _) = ChannelSet::new(direct, irs).unwrap().cascaded().unwrap();
    let profile = VarianceProfile::uniform(4, 100, 1.0).unwrap();
    let samples: Vec<f64> = (0..10_000)
        .map(|_| irskg::linalg::largest_singular(&h.try_mul(&complex_gaussian_matrix(&profile, &mut rng)).unwrap()).unwrap())
        .collect();
    let skew = stats::skewness(&samples);
    let kurt = stats::excess_kurtosis(&samples);
    assert!(skew.abs() <= 0.15, "skewness {skew}");
    assert!(kurt.abs() <= 0.3, "excess kurtosis {kurt}");
}
