//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL`
//! line with the measured values, then asserts.

use std::process::Command;
use std::time::Instant;

use num_complex::Complex;
use rand::Rng;

use irskg::adversary::{build_psi, colluded_attack, stacked_rank, EveObservation, ATTACK_RANK_TOL};
use irskg::channel::{ChannelSet, DirectChannels, PathStats, Topology};
use irskg::harness::{self, check_sigma_b_moments, desk_channel_set, ExperimentConfig, ExperimentReport, Scheme};
use irskg::infotheory::{mi_histogram, mi_knn};
use irskg::linalg::{compact_svd, largest_singular, rank, singular_values, Matrix, DEFAULT_RANK_TOL};
use irskg::pilot::PilotMatrix;
use irskg::sampling::{complex_gaussian_matrix, complex_normal, random_unitary, role, sample_irs_phase, PhaseAlphabet, RngStream, VarianceProfile};
use irskg::theory::{prop1_bounds, prop2_moments, theorem2_moments};

type C = Complex<f64>;

fn verdict(n: u32, pass: bool, started: Instant, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n}: {tag} ({:.1}s) {detail}", started.elapsed().as_secs_f64());
}

fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix<f64> {
    let data = (0..rows * cols).map(|_| complex_normal(rng, std::f64::consts::FRAC_1_SQRT_2)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn unit_vector(n: usize, rng: &mut impl Rng) -> Vec<C> {
    let v: Vec<C> = (0..n).map(|_| complex_normal(rng, 1.0)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / scale).fold(0.0, f64::max)
}

fn desk(seed: u64) -> ExperimentConfig {
    ExperimentConfig { seed, ..ExperimentConfig::desk() }
}

#[test]
fn criterion_01_unitary_invariance() {
    let t = Instant::now();
    let mut rng = RngStream::new(1).rng();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=8);
        let m = rng.random_range(1..=8);
        let gamma = random_unitary::<f64, _>(n, &mut rng);
        let q = random_matrix(n, m, &mut rng);
        worst = worst.max(max_rel_diff(&singular_values(&gamma.try_mul(&q).unwrap()).unwrap(), &singular_values(&q).unwrap()));

        let d = rng.random_range(1..=8);
        let h = random_matrix(n, m, &mut rng);
        let x = random_matrix(m, d, &mut rng);
        let svd = compact_svd(&h, DEFAULT_RANK_TOL).unwrap();
        let hx = singular_values(&h.try_mul(&x).unwrap()).unwrap();
        let reduced = singular_values(&svd.xi_vh().try_mul(&x).unwrap()).unwrap();
        let len = hx.len().min(reduced.len());
        worst = worst.max(max_rel_diff(&hx[..len], &reduced[..len]));
        let tail = hx[len..].iter().chain(&reduced[len..]).fold(0.0f64, |a, v| a.max(v.abs()));
        worst = worst.max(tail / hx[0].max(f64::MIN_POSITIVE));
    }
    let pass = worst <= 1e-9;
    verdict(1, pass, t, format!("max relative singular-value gap {worst:.2e} (limit 1e-9)"));
    assert!(pass);
}

#[test]
fn criterion_02_theorem2_identity() {
    let t = Instant::now();
    let mut rng = RngStream::new(2).rng();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=8);
        let d = rng.random_range(1..=64);
        let c = rng.random_range(0.1..10.0);
        let xi1 = rng.random_range(0.01..100.0);
        let profile = VarianceProfile::random(n, d, c, &mut rng).unwrap();
        let g = theorem2_moments(xi1, &unit_vector(n, &mut rng), &profile).unwrap();
        let target = 2.0 * c * xi1 * xi1;
        worst = worst.max((g.second_moment() - target).abs() / target);
    }
    let pass = worst <= 1e-10;
    verdict(2, pass, t, format!("max relative error of eta^2 + iota^2 vs 2 C xi^2: {worst:.2e}"));
    assert!(pass);
}

#[test]
fn criterion_03_theorem2_monte_carlo() {
    let t = Instant::now();
    let cfg = desk(42);
    let set = desk_channel_set(&cfg).unwrap();
    let profile = VarianceProfile::uniform(cfg.n_a, 100, cfg.row_power).unwrap();
    let c = check_sigma_b_moments(&set, &profile, 0.0, 10_000, RngStream::new(42).derive(role::TRIAL)).unwrap();
    let pass = c.z_score().abs() <= 3.0 && c.variance_rel_error() <= 0.15;
    verdict(
        3,
        pass,
        t,
        format!(
            "mean {:.4} vs eta {:.4} (z = {:.2}); variance {:.3} vs iota^2 {:.3} ({:.1}% off)",
            c.sample_mean,
            c.predicted_mean,
            c.z_score(),
            c.sample_variance,
            c.predicted_variance,
            100.0 * c.variance_rel_error()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_prop2_identity_and_match() {
    let t = Instant::now();
    let mut rng = RngStream::new(4).rng();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=8);
        let d = rng.random_range(1..=64);
        let c = rng.random_range(0.1..10.0);
        let xi1 = rng.random_range(0.01..100.0);
        let e2 = rng.random_range(0.0..50.0);
        let profile = VarianceProfile::random(n, d, c, &mut rng).unwrap();
        let g = prop2_moments(xi1, &unit_vector(n, &mut rng), &profile, e2).unwrap();
        let target = 2.0 * c * xi1 * xi1 + 2.0 * d as f64 * e2;
        worst = worst.max((g.second_moment() - target).abs() / target);
    }

    // Noise energy 2 D eps^2 at a tenth of the signal energy 2 C xi_1^2.
    let cfg = desk(42);
    let set = desk_channel_set(&cfg).unwrap();
    let d = 100;
    let xi1 = largest_singular(&set.cascaded().unwrap().0).unwrap();
    let noise_var = 0.1 * cfg.row_power * xi1 * xi1 / d as f64;
    let profile = VarianceProfile::uniform(cfg.n_a, d, cfg.row_power).unwrap();
    let c = check_sigma_b_moments(&set, &profile, noise_var, 10_000, RngStream::new(42).derive(role::TRIAL)).unwrap();

    // Same check with the noise the report SNR convention assigns to 20 dB.
    let xi_bar_sq = harness::calibrate_xi_bar_sq(&cfg, &set.direct, RngStream::new(42).derive(role::CALIBRATION)).unwrap();
    let snr_noise = harness::snr_to_noise_var(20.0, cfg.row_power, xi_bar_sq);
    let c20 = check_sigma_b_moments(&set, &profile, snr_noise, 10_000, RngStream::new(42).derive(role::TRIAL)).unwrap();

    let pass = worst <= 1e-10 && c.z_score().abs() <= 3.0;
    verdict(
        4,
        pass,
        t,
        format!(
            "identity error {worst:.2e}; noisy mean {:.4} vs mu_B {:.4} (z = {:.2}); at the 20 dB report convention (2D eps^2 / 2C xi^2 = {:.2}) z = {:.2}",
            c.sample_mean,
            c.predicted_mean,
            c.z_score(),
            d as f64 * snr_noise / (cfg.row_power * xi1 * xi1),
            c20.z_score()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_prop1_bracketing() {
    let t = Instant::now();
    let mut rng = RngStream::new(5).rng();
    let mut violations = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=8);
        let d = rng.random_range(2..=64);
        let c = rng.random_range(0.1..10.0);
        let profile = VarianceProfile::random(n, d, c, &mut rng).unwrap();
        let h = random_matrix(n, n, &mut rng);
        let svd = compact_svd(&h, DEFAULT_RANK_TOL).unwrap();
        let bounds = prop1_bounds(svd.largest(), &profile).unwrap();
        for weight in [svd.v.column(0), svd.u.column(0)] {
            let g = theorem2_moments(svd.largest(), &weight, &profile).unwrap();
            if !bounds.contains(&g, 1e-12) {
                violations += 1;
            }
        }
    }
    let pass = violations == 0;
    verdict(5, pass, t, format!("{violations} violations over 100 profiles, both directions"));
    assert!(pass);
}

#[test]
fn criterion_06_colluded_attack() {
    let t = Instant::now();
    let cfg = desk(42);
    let topo = cfg.topology().unwrap();
    let pilot = PilotMatrix::scaled_identity(cfg.n_a, cfg.row_power).unwrap();
    let mut worst_w: f64 = 0.0;
    let mut worst_nrmse: f64 = 0.0;
    let mut never_full = 0;
    for draw in 0..50u64 {
        let stream = RngStream::new(draw).derive(role::CHANNELS);
        let direct = DirectChannels::random(&topo, &mut stream.rng()).unwrap();
        let irs = sample_irs_phase(direct.n_r(), PhaseAlphabet::Continuous, &mut stream.derive(role::IRS_PHASE).rng()).unwrap();
        let set = ChannelSet::new(direct, irs).unwrap();
        let mut rng = stream.derive(role::NOISE_EVE).rng();
        let m = (1..=set.direct.eve_count()).find(|&m| {
            let obs: Vec<_> = (0..m).map(|e| EveObservation::observe(&set, e, &pilot, 0.0, &mut rng).unwrap()).collect();
            stacked_rank(&obs).unwrap() == cfg.n_r()
        });
        let Some(m) = m else {
            never_full += 1;
            continue;
        };
        let out = colluded_attack(&set, &pilot, m, 0.0, false, &mut rng).unwrap();
        let w = set.irs.weights();
        worst_w = worst_w.max(out.w_hat.iter().zip(w).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max));
        worst_nrmse = worst_nrmse.max(out.nrmse);
    }

    let noisy = ExperimentConfig {
        snr_db: vec![10.0, 20.0, 30.0],
        eve_counts: vec![1, 4, 16],
        mc_trials: 200,
        ..cfg
    };
    let report = harness::run_nrmse_sweep(&noisy).unwrap();
    let median = |s: f64, m: usize| report.value(&format!("snr_db={s};m={m}"), "nrmse_median").unwrap();
    let mut grid = String::new();
    let mut monotone = true;
    for &s in &noisy.snr_db {
        for (i, &m) in noisy.eve_counts.iter().enumerate() {
            grid.push_str(&format!(" {s}dB/M{m}={:.3e}", median(s, m)));
            if i > 0 && median(s, m) > median(s, noisy.eve_counts[i - 1]) {
                monotone = false;
            }
        }
    }
    for &m in &noisy.eve_counts {
        for pair in noisy.snr_db.windows(2) {
            if median(pair[1], m) > median(pair[0], m) {
                monotone = false;
            }
        }
    }
    let pass = never_full == 0 && worst_w <= 1e-8 && worst_nrmse <= 1e-8 && monotone;
    verdict(
        6,
        pass,
        t,
        format!("noiseless: max |w_hat - w| {worst_w:.2e}, max NRMSE {worst_nrmse:.2e}, {never_full} draws never full rank; noisy medians:{grid}"),
    );
    assert!(pass);
}

#[test]
fn criterion_07_single_eve_rank_deficiency() {
    let t = Instant::now();
    // N_R = 12 elements against L_A * N_E = 4 * 2 observations per Eve.
    let topo = Topology::<f64>::new(4, 4, 2, 3, 4, 1, PathStats::default()).unwrap();
    let pilot = PilotMatrix::scaled_identity(4, 1.0).unwrap();
    let mut deficient = 0;
    for draw in 0..100u64 {
        let direct = DirectChannels::random(&topo, &mut RngStream::new(draw).derive(role::CHANNELS).rng()).unwrap();
        let psi = build_psi(&direct.eves[0].g_re.matrix, &direct.g_ar.matrix, &pilot).unwrap();
        if rank(&psi, ATTACK_RANK_TOL).unwrap() < direct.n_r() {
            deficient += 1;
        }
    }
    let pass = deficient == 100;
    verdict(7, pass, t, format!("rank(Psi) < N_R in {deficient}/100 draws"));
    assert!(pass);
}

#[test]
fn criterion_08_key_agreement() {
    let t = Instant::now();
    let cfg = ExperimentConfig {
        probe_length: 100,
        rounds: 500,
        quantizer_bits: 2,
        guard_ratio: 0.1,
        validation_snr_db: 20.0,
        ..desk(42)
    };
    let report = harness::run_simulation(&cfg).unwrap();
    let pearson = report.value("snr_db=20", "pearson").unwrap();
    let kdr = report.value("snr_db=20", "kdr").unwrap();
    let pass = pearson > 0.9 && kdr < 0.05;
    verdict(8, pass, t, format!("Pearson {pearson:.4} (> 0.9), KDR {kdr:.4} (< 0.05)"));
    assert!(pass);
}

fn raw_with_se(report: &ExperimentReport, key: &str) -> (f64, f64) {
    let row = report.get(key, "skr_raw").unwrap_or_else(|| panic!("missing skr_raw at {key}"));
    (row.value, row.stderr.unwrap_or(0.0))
}

#[test]
fn criterion_09_skr_trends() {
    let t = Instant::now();
    let cfg = desk(42);
    let validation = harness::run_validation_suite(&cfg).unwrap();
    let rgm = harness::run_skr_sweep(&cfg, Scheme::Rgm).unwrap();
    let pilot = harness::run_skr_sweep(&cfg, Scheme::Pilot).unwrap();
    let m_min = *cfg.eve_counts.iter().min().unwrap();
    let top = cfg.snr_db.iter().copied().fold(f64::MIN, f64::max);

    // (a) SKR against probe length, within two combined standard errors.
    let curve: Vec<(usize, f64, f64)> = cfg
        .probe_lengths
        .iter()
        .map(|&d| {
            let (v, se) = raw_with_se(&validation, &format!("d={d};m={m_min};snr_db={}", cfg.validation_snr_db));
            (d, v, se)
        })
        .collect();
    let a = curve.windows(2).all(|w| w[1].1 >= w[0].1 - 2.0 * w[0].2.hypot(w[1].2));

    // (b) pilot strictly decreasing in M; RGM within two standard errors of M = 1.
    let at = |r: &ExperimentReport, m: usize| raw_with_se(r, &format!("snr_db={top};m={m}"));
    let pilot_m: Vec<f64> = cfg.eve_counts.iter().map(|&m| at(&pilot, m).0).collect();
    let rgm_m: Vec<(f64, f64)> = cfg.eve_counts.iter().map(|&m| at(&rgm, m)).collect();
    let b_pilot = pilot_m.windows(2).all(|w| w[1] < w[0]);
    let b_rgm = rgm_m.iter().all(|&(v, se)| (v - rgm_m[0].0).abs() <= 2.0 * se.hypot(rgm_m[0].1));

    // (c) RGM above pilot at every SNR <= 5 dB and every M.
    let mut c = true;
    let mut low = String::new();
    for &s in cfg.snr_db.iter().filter(|&&s| s <= 5.0) {
        for &m in &cfg.eve_counts {
            let key = format!("snr_db={s};m={m}");
            let (r, _) = raw_with_se(&rgm, &key);
            let (p, _) = raw_with_se(&pilot, &key);
            c &= r > p;
            low.push_str(&format!(" {s}dB/M{m}: rgm {r:.3} pilot {p:.3};"));
        }
    }

    let pass = a && b_pilot && b_rgm && c;
    let fmt = |v: &[(f64, f64)]| v.iter().map(|(x, s)| format!("{x:.3}+-{s:.3}")).collect::<Vec<_>>().join(", ");
    verdict(
        9,
        pass,
        t,
        format!(
            "(a) {} SKR vs D {}; (b) {} pilot over M [{}], {} RGM over M [{}]; (c) {}{}",
            if a { "ok" } else { "fails" },
            curve.iter().map(|(d, v, s)| format!("D{d}={v:.3}+-{s:.3}")).collect::<Vec<_>>().join(" "),
            if b_pilot { "ok" } else { "fails" },
            pilot_m.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(", "),
            if b_rgm { "ok" } else { "fails" },
            fmt(&rgm_m),
            if c { "ok" } else { "fails" },
            low
        ),
    );
    assert!(pass);
}

fn gaussian_pair(n: usize, rho: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = RngStream::new(seed).rng();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
        let b: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
        x.push(a);
        y.push(rho * a + (1.0 - rho * rho).sqrt() * b);
    }
    (x, y)
}

#[test]
fn criterion_10_mi_oracles() {
    let t = Instant::now();
    let exact = -0.5 * (1.0f64 - 0.81).log2();
    let mut fails = Vec::new();
    let mut check = |name: &str, ok: bool, value: f64| {
        if !ok {
            fails.push(format!("{name}={value:.4}"));
        }
    };

    let distinct: Vec<f64> = (0..1000).map(|i| i as f64).collect();
    let h_id = mi_histogram(&distinct, &distinct, 8).unwrap().bits;
    check("hist identity", (h_id - 3.0).abs() <= 0.05 * 3.0, h_id);
    let (a, _) = gaussian_pair(5000, 0.0, 10);
    let (b, _) = gaussian_pair(5000, 0.0, 11);
    let h_ind = mi_histogram(&a, &b, 8).unwrap();
    let bias = h_ind.diagnostic("bias_bits").unwrap();
    check("hist independence", h_ind.bits.abs() <= 2.0 * bias, h_ind.bits);
    let (gx, gy) = gaussian_pair(10_000, 0.9, 12);
    let h_g = mi_histogram(&gx, &gy, 16).unwrap().bits;
    check("hist gaussian", (h_g - exact).abs() <= 0.15 * exact, h_g);

    let symbols: Vec<f64> = (0..2000).map(|i| (i % 8) as f64).collect();
    let k_id = mi_knn(&symbols, &symbols, 3).unwrap().bits;
    check("knn identity", (k_id - 3.0).abs() <= 0.1 * 3.0, k_id);
    let (a, _) = gaussian_pair(2000, 0.0, 13);
    let (b, _) = gaussian_pair(2000, 0.0, 14);
    let k_ind = mi_knn(&a, &b, 3).unwrap().bits;
    check("knn independence", k_ind.abs() <= 0.05, k_ind);
    let (gx, gy) = gaussian_pair(2000, 0.9, 15);
    let k3 = mi_knn(&gx, &gy, 3).unwrap().bits;
    let k10 = mi_knn(&gx, &gy, 10).unwrap().bits;
    check("knn gaussian k3", (k3 - exact).abs() <= 0.1 * exact, k3);
    check("knn k3 vs k10", (k3 - k10).abs() <= 0.1 * k3, k10);
    let noise: Vec<f64> = gaussian_pair(2000, 0.0, 16).0.iter().zip(&gx).map(|(n, x)| x + 20.0 * n).collect();
    let k_noisy = mi_knn(&gx, &noise, 3).unwrap().bits;
    check("knn heavy noise", k_noisy < 0.05, k_noisy);

    let pass = fails.is_empty();
    verdict(
        10,
        pass,
        t,
        format!(
            "hist: identity {h_id:.3}, independence {:.4} (bias {bias:.4}), gaussian {h_g:.3}; knn: identity {k_id:.3}, independence {k_ind:.4}, gaussian {k3:.3}/{k10:.3} (k=3/10), heavy noise {k_noisy:.4}; exact {exact:.3}{}",
            h_ind.bits,
            if pass { String::new() } else { format!("; failing: {}", fails.join(", ")) }
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_11_determinism() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_irskg"))
            .args(["validate", "--preset", "desk", "--seed", "42", "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out.join("validate.csv")).unwrap()
    };
    let first = run("a");
    let second = run("b");
    let pass = !first.is_empty() && first == second;
    verdict(11, pass, t, format!("two validate runs, {} CSV bytes, identical: {}", first.len(), first == second));
    assert!(pass);
}

#[test]
fn leakage_of_column_subset_is_bounded_by_full_observation() {
    use irskg::infotheory::{leakage_upper_bound, InnerExpectation, LeakageConfig};
    let topo = Topology::<f64>::new(2, 2, 2, 1, 2, 1, PathStats::default()).unwrap();
    let direct = DirectChannels::random(&topo, &mut RngStream::new(7).rng()).unwrap();
    let profile = VarianceProfile::uniform(2, 4, 1.0).unwrap();
    let probe = complex_gaussian_matrix(&profile, &mut RngStream::new(8).rng());
    let mut cfg = LeakageConfig::new(2, 400, 1);
    cfg.inner = InnerExpectation::KnownProbe(probe);
    let full = leakage_upper_bound(&direct, &profile, 0.05, &cfg, RngStream::new(9)).unwrap();
    cfg.columns = Some(1);
    let part = leakage_upper_bound(&direct, &profile, 0.05, &cfg, RngStream::new(9)).unwrap();
    let tol = 2.0 * full.std_error.unwrap().hypot(part.std_error.unwrap());
    assert!(part.bits <= full.bits + tol, "subset {} > full {}", part.bits, full.bits);
}

#[test]
fn feature_leakage_is_bounded_by_phase_leakage() {
    use irskg::infotheory::{feature_leakage, InnerExpectation, LeakageConfig};
    let topo = Topology::<f64>::new(2, 2, 2, 1, 2, 1, PathStats::default()).unwrap();
    let direct = DirectChannels::random(&topo, &mut RngStream::new(17).rng()).unwrap();
    let profile = VarianceProfile::uniform(2, 4, 1.0).unwrap();
    let probe = complex_gaussian_matrix(&profile, &mut RngStream::new(18).rng());
    let mut cfg = LeakageConfig::new(2, 400, 1);
    cfg.inner = InnerExpectation::KnownProbe(probe);
    let report = feature_leakage(&direct, &profile, &profile, 0.05, &cfg, RngStream::new(19)).unwrap();
    let feature = report.feature.expect("feature leakage requested");
    let tol = 2.0 * report.phase.std_error.unwrap().hypot(feature.std_error.unwrap_or(0.0)) + 0.05;
    assert!(feature.bits <= report.phase.bits + tol, "feature {} > phase {}", feature.bits, report.phase.bits);
}
