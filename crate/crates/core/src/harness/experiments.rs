use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::report::ExperimentReport;
use crate::adversary::colluded_attack;
use crate::channel::{ChannelSet, DirectChannels};
use crate::error::{Error, Result};
use crate::infotheory::{leakage_upper_bound, mi_knn, skr_lower_bound, LeakageConfig, MiEstimate};
use crate::linalg::largest_singular;
use crate::pilot::{ls_estimate, pilot_feature, received_pilot_signal, FeatureMode, PilotMatrix};
use crate::rgm::{agree_keys, key_disagreement_rate, quantize, run_protocol, RoundParams, SingularObservation};
use crate::sampling::{complex_gaussian_matrix, noise_matrix, role, sample_irs_phase, RngStream, VarianceProfile};
use crate::stats;
use crate::theory::{legitimate_moments, GaussianApprox};

/// Key-generation scheme compared in the SKR sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Rgm,
    Pilot,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgm" => Ok(Scheme::Rgm),
            "pilot" => Ok(Scheme::Pilot),
            other => Err(Error::Config(format!("unknown scheme '{other}' (expected rgm or pilot)"))),
        }
    }
}

impl Scheme {
    fn name(self) -> &'static str {
        match self {
            Scheme::Rgm => "rgm",
            Scheme::Pilot => "pilot",
        }
    }
}

fn root(config: &ExperimentConfig) -> RngStream {
    RngStream::new(config.seed)
}

/// Mean of `sigma_max(H_AB)^2` over `calibration_draws` IRS phases drawn
/// for the fixed direct channels `direct`.
pub fn calibrate_xi_bar_sq(config: &ExperimentConfig, direct: &DirectChannels<f64>, stream: RngStream) -> Result<f64> {
    let values = (0..config.calibration_draws)
        .into_par_iter()
        .map(|i| {
            let irs = sample_irs_phase(direct.n_r(), config.phase_alphabet, &mut stream.child(role::CALIBRATION, i as u64).rng())?;
            let (h, _) = ChannelSet::new(direct.clone(), irs)?.cascaded()?;
            let xi = largest_singular(&h)?;
            Ok(xi * xi)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(stats::mean(&values))
}

pub fn snr_to_noise_var(snr_db: f64, row_power: f64, xi_bar_sq: f64) -> f64 {
    row_power * xi_bar_sq * 10f64.powf(-snr_db / 10.0) / 2.0
}

/// The static direct channels shared by the key-generation experiments.
pub fn scenario_channels(config: &ExperimentConfig) -> Result<DirectChannels<f64>> {
    DirectChannels::random(&config.topology()?, &mut root(config).derive(role::CHANNELS).rng())
}

/// Scenario channels under one IRS phase drawn from the configured alphabet.
pub fn desk_channel_set(config: &ExperimentConfig) -> Result<ChannelSet<f64>> {
    let direct = scenario_channels(config)?;
    let irs = sample_irs_phase(direct.n_r(), config.phase_alphabet, &mut root(config).derive(role::IRS_PHASE).rng())?;
    ChannelSet::new(direct, irs)
}

fn uniform_profiles(config: &ExperimentConfig, d: usize) -> Result<(VarianceProfile<f64>, VarianceProfile<f64>)> {
    Ok((
        VarianceProfile::uniform(config.n_a, d, config.row_power)?,
        VarianceProfile::uniform(config.n_b, d, config.row_power)?,
    ))
}

/// Monte-Carlo moments of Bob's largest singular value at a fixed IRS phase,
/// next to the Gaussian approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub predicted_mean: f64,
    pub predicted_variance: f64,
    pub sample_mean: f64,
    pub sample_variance: f64,
    pub std_error: f64,
    pub draws: usize,
}

impl MomentCheck {
    /// `(sample mean - predicted mean) / standard error`.
    pub fn z_score(&self) -> f64 {
        (self.sample_mean - self.predicted_mean) / self.std_error
    }

    pub fn variance_rel_error(&self) -> f64 {
        (self.sample_variance - self.predicted_variance).abs() / self.predicted_variance
    }
}

/// Draws `sigma_max(H_AB X_A + N_B)` `draws` times; `noise_var = 0` checks
/// the noiseless approximation.
pub fn check_sigma_b_moments(set: &ChannelSet<f64>, profile_a: &VarianceProfile<f64>, noise_var: f64, draws: usize, stream: RngStream) -> Result<MomentCheck> {
    if draws < 2 {
        return Err(Error::param("draws", "need at least 2"));
    }
    let (h, _) = set.cascaded()?;
    let profile_b = VarianceProfile::uniform(h.rows(), profile_a.cols(), profile_a.row_sum())?;
    let predicted: GaussianApprox<f64> = legitimate_moments(&h, profile_a, &profile_b, noise_var)?.bob;
    let samples = (0..draws)
        .into_par_iter()
        .map(|i| {
            let s = stream.child(role::TRIAL, i as u64);
            let x = complex_gaussian_matrix(profile_a, &mut s.derive(role::PROBE_A).rng());
            let mut y = h.try_mul(&x)?;
            if noise_var > 0.0 {
                y = y.try_add(&noise_matrix(y.rows(), y.cols(), noise_var, &mut s.derive(role::NOISE_B).rng())?)?;
            }
            Ok(largest_singular(&y)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MomentCheck {
        predicted_mean: predicted.mean,
        predicted_variance: predicted.variance,
        sample_mean: stats::mean(&samples),
        sample_variance: stats::variance(&samples),
        std_error: stats::std_error(&samples),
        draws,
    })
}

fn snr_key(snr: f64) -> String {
    format!("snr_db={snr}")
}

fn grid_key(snr: f64, m: usize) -> String {
    format!("snr_db={snr};m={m}")
}

/// Report header plus the calibration of the scenario channels.
fn with_calibration(command: &str, config: &ExperimentConfig) -> Result<(ExperimentReport, f64)> {
    config.validate()?;
    let direct = scenario_channels(config)?;
    let xi = calibrate_xi_bar_sq(config, &direct, root(config).derive(role::CALIBRATION))?;
    let mut report = ExperimentReport::new(command, config)?;
    report.metadata.xi_bar_sq = Some(xi);
    Ok((report, xi))
}

/// Adversary NRMSE over `mc_trials` fresh scenarios per `(SNR, M)` pair.
///
/// Trial `t` uses the same channels, phase and noise realizations at every
/// grid point; only the noise scale and the number of colluders change.
/// The SNR of each trial is calibrated against that trial's channels.
pub fn run_nrmse_sweep(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let mut report = ExperimentReport::new("attack", config)?;
    report.note("each trial draws its own channels and calibrates the SNR against them");
    let topo = config.topology()?;
    let pilot = PilotMatrix::scaled_identity(config.n_a, config.row_power)?;
    let base = root(config).derive(role::SWEEP);
    let grid: Vec<(f64, usize)> = config
        .snr_db
        .iter()
        .flat_map(|&s| config.eve_counts.iter().map(move |&m| (s, m)))
        .collect();
    let per_trial = (0..config.mc_trials)
        .into_par_iter()
        .map(|t| {
            let trial = base.child(role::TRIAL, t as u64);
            let mut rng = trial.derive(role::CHANNELS).rng();
            let direct = DirectChannels::random(&topo, &mut rng)?;
            let xi = calibrate_xi_bar_sq(config, &direct, trial.derive(role::CALIBRATION))?;
            let irs = sample_irs_phase(direct.n_r(), config.phase_alphabet, &mut trial.derive(role::IRS_PHASE).rng())?;
            let set = ChannelSet::new(direct, irs)?;
            grid.iter()
                .map(|&(snr, m)| {
                    let noise_var = snr_to_noise_var(snr, config.row_power, xi);
                    let out = colluded_attack(&set, &pilot, m, noise_var, false, &mut trial.derive(role::NOISE_EVE).rng())?;
                    Ok((out.nrmse, out.stacked_rank))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let n_r = config.n_r();
    for (g, &(snr, m)) in grid.iter().enumerate() {
        let key = grid_key(snr, m);
        let nrmse: Vec<f64> = per_trial.iter().map(|t| t[g].0).collect();
        let full = per_trial.iter().filter(|t| t[g].1 == n_r).count() as f64 / per_trial.len() as f64;
        let n = nrmse.len();
        report.push(&key, "nrmse_median", stats::median(&nrmse), None, n);
        report.push(&key, "nrmse_iqr", stats::iqr(&nrmse), None, n);
        report.push(&key, "nrmse_mean", stats::mean(&nrmse), Some(stats::std_error(&nrmse)), n);
        report.push(&key, "full_rank_fraction", full, None, n);
    }
    Ok(report)
}

/// Per-round legitimate and eavesdropper pilot features.
struct PilotRounds {
    alice: Vec<f64>,
    bob: Vec<f64>,
    /// `eve[i]` holds the feature rebuilt by the first `eve_counts[i]` Eves.
    eve: Vec<Vec<f64>>,
}

fn pilot_rounds(config: &ExperimentConfig, direct: &DirectChannels<f64>, noise_var: f64, stream: RngStream) -> Result<PilotRounds> {
    let p_a = PilotMatrix::scaled_identity(config.n_a, config.row_power)?;
    let p_b = PilotMatrix::scaled_identity(config.n_b, config.row_power)?;
    let rounds = (0..config.rounds)
        .into_par_iter()
        .map(|r| {
            let round = stream.child(role::ROUND, r as u64);
            let irs = sample_irs_phase(direct.n_r(), config.phase_alphabet, &mut round.derive(role::IRS_PHASE).rng())?;
            let set = ChannelSet::new(direct.clone(), irs)?;
            let (h_ab, h_ba) = set.cascaded()?;
            let y_b = received_pilot_signal(&h_ab, &p_a, noise_var, &mut round.derive(role::NOISE_B).rng())?;
            let y_a = received_pilot_signal(&h_ba, &p_b, noise_var, &mut round.derive(role::NOISE_A).rng())?;
            let bob = pilot_feature(&ls_estimate(&y_b, &p_a)?, FeatureMode::Rss)?;
            let alice = pilot_feature(&ls_estimate(&y_a, &p_b)?, FeatureMode::Rss)?;
            let eve = config
                .eve_counts
                .iter()
                .map(|&m| {
                    let out = colluded_attack(&set, &p_a, m, noise_var, false, &mut round.derive(role::NOISE_EVE).rng())?;
                    pilot_feature(&out.h_hat, FeatureMode::Rss)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((alice, bob, eve))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = PilotRounds {
        alice: Vec::with_capacity(rounds.len()),
        bob: Vec::with_capacity(rounds.len()),
        eve: vec![Vec::with_capacity(rounds.len()); config.eve_counts.len()],
    };
    for (a, b, e) in rounds {
        out.alice.push(a);
        out.bob.push(b);
        for (slot, v) in out.eve.iter_mut().zip(e) {
            slot.push(v);
        }
    }
    Ok(out)
}

fn push_mi(report: &mut ExperimentReport, key: &str, metric: &str, est: &MiEstimate) {
    report.push(key, metric, est.bits, est.std_error, est.sample_count);
}

fn feature_kdr(a: &[f64], b: &[f64], config: &ExperimentConfig) -> Result<f64> {
    let ka = quantize(a, config.quantizer_bits, config.guard_ratio)?;
    let kb = quantize(b, config.quantizer_bits, config.guard_ratio)?;
    key_disagreement_rate(&ka, &kb)
}

/// Key MI of the RGM scheme at one SNR and probe length, with the protocol
/// rounds it was computed from.
fn rgm_key(config: &ExperimentConfig, direct: &DirectChannels<f64>, d: usize, noise_var: f64, stream: RngStream) -> Result<(MiEstimate, Vec<SingularObservation<f64>>)> {
    let (pa, pb) = uniform_profiles(config, d)?;
    let params = RoundParams::new(pa, pb, noise_var)?;
    let obs = run_protocol(direct, config.phase_alphabet, &params, config.rounds, stream)?;
    let a: Vec<f64> = obs.iter().map(|o| o.sigma_a()).collect();
    let b: Vec<f64> = obs.iter().map(|o| o.sigma_b()).collect();
    Ok((mi_knn(&a, &b, config.knn_k)?, obs))
}

fn rgm_leakage(config: &ExperimentConfig, direct: &DirectChannels<f64>, d: usize, m: usize, noise_var: f64, stream: RngStream) -> Result<MiEstimate> {
    let (pa, _) = uniform_profiles(config, d)?;
    let mut lc = LeakageConfig::new(config.leakage_alphabet, config.leakage_samples, m);
    lc.max_enumeration = config.leakage_max_enumeration;
    leakage_upper_bound(direct, &pa, noise_var, &lc, stream)
}

/// Key MI, leakage, SKR and KDR per `(SNR, M)` for one scheme, on the
/// scenario channels with probe length `probe_length`.
///
/// For the RGM scheme the leakage is the bound `I(Z_E; w)`; for the pilot
/// scheme it is the k-NN MI between the feature rebuilt by the colluding
/// Eves and each legitimate feature.
pub fn run_skr_sweep(config: &ExperimentConfig, scheme: Scheme) -> Result<ExperimentReport> {
    let (mut report, xi) = with_calibration(&format!("skr_{}", scheme.name()), config)?;
    let direct = scenario_channels(config)?;
    let stream = root(config).derive(role::SWEEP);
    for &snr in &config.snr_db {
        let noise_var = snr_to_noise_var(snr, config.row_power, xi);
        match scheme {
            Scheme::Rgm => {
                let (key, obs) = rgm_key(config, &direct, config.probe_length, noise_var, stream)?;
                let sk = snr_key(snr);
                push_mi(&mut report, &sk, "key_mi", &key);
                let a: Vec<f64> = obs.iter().map(|o| o.sigma_a()).collect();
                let b: Vec<f64> = obs.iter().map(|o| o.sigma_b()).collect();
                report.push(&sk, "pearson", stats::pearson(&a, &b), None, obs.len());
                match agree_keys(&obs, config.quantizer_bits, config.guard_ratio) {
                    Ok(k) => report.push(&sk, "kdr", k.kdr, None, k.common_rounds),
                    Err(e) => report.note(format!("{sk}: no KDR ({e})")),
                }
                for &m in &config.eve_counts {
                    let leak = rgm_leakage(config, &direct, config.probe_length, m, noise_var, stream.derive(role::LEAKAGE))?;
                    let key_m = grid_key(snr, m);
                    push_mi(&mut report, &key_m, "leakage", &leak);
                    for f in &leak.flags {
                        report.note(format!("{key_m}: leakage {f}"));
                    }
                    let skr = skr_lower_bound(key.clone(), leak.clone(), leak);
                    report.push(&key_m, "skr_raw", skr.skr_raw, skr.std_error(), key.sample_count);
                    report.push(&key_m, "skr_clamped", skr.skr_clamped, None, key.sample_count);
                }
            }
            Scheme::Pilot => {
                let rounds = pilot_rounds(config, &direct, noise_var, stream)?;
                let key = mi_knn(&rounds.alice, &rounds.bob, config.knn_k)?;
                let sk = snr_key(snr);
                push_mi(&mut report, &sk, "key_mi", &key);
                report.push(&sk, "pearson", stats::pearson(&rounds.alice, &rounds.bob), None, rounds.alice.len());
                match feature_kdr(&rounds.alice, &rounds.bob, config) {
                    Ok(kdr) => report.push(&sk, "kdr", kdr, None, rounds.alice.len()),
                    Err(e) => report.note(format!("{sk}: no KDR ({e})")),
                }
                for (i, &m) in config.eve_counts.iter().enumerate() {
                    let key_m = grid_key(snr, m);
                    let leak_a = mi_knn(&rounds.eve[i], &rounds.alice, config.knn_k)?;
                    let leak_b = mi_knn(&rounds.eve[i], &rounds.bob, config.knn_k)?;
                    let skr = skr_lower_bound(key.clone(), leak_a, leak_b);
                    push_mi(&mut report, &key_m, "leakage", &skr.leakage);
                    report.push(&key_m, "skr_raw", skr.skr_raw, skr.std_error(), key.sample_count);
                    report.push(&key_m, "skr_clamped", skr.skr_clamped, None, key.sample_count);
                }
            }
        }
    }
    Ok(report)
}

/// Per-round singular-value trace of one protocol run at the validation SNR.
pub fn run_simulation(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let (mut report, xi) = with_calibration("simulate", config)?;
    let direct = scenario_channels(config)?;
    let noise_var = snr_to_noise_var(config.validation_snr_db, config.row_power, xi);
    let (key, obs) = rgm_key(config, &direct, config.probe_length, noise_var, root(config).derive(role::SWEEP))?;
    for o in &obs {
        let k = format!("round={}", o.round_index);
        report.push(&k, "sigma_a", o.sigma_a(), None, 1);
        report.push(&k, "sigma_b", o.sigma_b(), None, 1);
    }
    let a: Vec<f64> = obs.iter().map(|o| o.sigma_a()).collect();
    let b: Vec<f64> = obs.iter().map(|o| o.sigma_b()).collect();
    let sk = snr_key(config.validation_snr_db);
    report.push(&sk, "pearson", stats::pearson(&a, &b), None, obs.len());
    push_mi(&mut report, &sk, "key_mi", &key);
    let agreement = agree_keys(&obs, config.quantizer_bits, config.guard_ratio)?;
    report.push(&sk, "kdr", agreement.kdr, None, agreement.common_rounds);
    report.push(&sk, "key_bits", agreement.alice.bits().len() as f64, None, agreement.common_rounds);
    Ok(report)
}

/// Theory-versus-simulation checks, the singular-value trace and the
/// SKR-versus-probe-length curve.
pub fn run_validation_suite(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let (mut report, xi) = with_calibration("validate", config)?;
    let noise_var = snr_to_noise_var(config.validation_snr_db, config.row_power, xi);
    let set = desk_channel_set(config)?;
    let (pa, _) = uniform_profiles(config, config.probe_length)?;
    let stream = root(config).derive(role::SWEEP);

    // Noise energy at a tenth of the signal energy `2 C xi_1^2` of this phase.
    let xi1 = largest_singular(&set.cascaded()?.0)?;
    let light = 0.1 * config.row_power * xi1 * xi1 / config.probe_length as f64;
    for (name, nv) in [("noiseless", 0.0), ("noise_ratio=0.1", light), ("snr", noise_var)] {
        let c = check_sigma_b_moments(&set, &pa, nv, config.moment_draws, stream.derive(role::TRIAL))?;
        let k = format!("moments={name};d={}", config.probe_length);
        report.push(&k, "predicted_mean", c.predicted_mean, None, c.draws);
        report.push(&k, "sample_mean", c.sample_mean, Some(c.std_error), c.draws);
        report.push(&k, "mean_z_score", c.z_score(), None, c.draws);
        report.push(&k, "predicted_variance", c.predicted_variance, None, c.draws);
        report.push(&k, "sample_variance", c.sample_variance, None, c.draws);
        report.push(&k, "variance_rel_error", c.variance_rel_error(), None, c.draws);
    }

    let direct = set.direct.clone();
    let (key, obs) = rgm_key(config, &direct, config.probe_length, noise_var, stream)?;
    let a: Vec<f64> = obs.iter().map(|o| o.sigma_a()).collect();
    let b: Vec<f64> = obs.iter().map(|o| o.sigma_b()).collect();
    let sk = format!("trace;{}", snr_key(config.validation_snr_db));
    report.push(&sk, "pearson", stats::pearson(&a, &b), None, obs.len());
    push_mi(&mut report, &sk, "key_mi", &key);
    match agree_keys(&obs, config.quantizer_bits, config.guard_ratio) {
        Ok(k) => report.push(&sk, "kdr", k.kdr, None, k.common_rounds),
        Err(e) => report.note(format!("{sk}: no KDR ({e})")),
    }

    let m = config.eve_counts.iter().copied().min().unwrap_or(1);
    for &d in &config.probe_lengths {
        let k = format!("d={d};m={m};{}", snr_key(config.validation_snr_db));
        let (key, _) = rgm_key(config, &direct, d, noise_var, stream)?;
        let leak = rgm_leakage(config, &direct, d, m, noise_var, stream.derive(role::LEAKAGE))?;
        let skr = skr_lower_bound(key.clone(), leak.clone(), leak.clone());
        push_mi(&mut report, &k, "key_mi", &key);
        push_mi(&mut report, &k, "leakage", &leak);
        report.push(&k, "skr_raw", skr.skr_raw, skr.std_error(), key.sample_count);
        report.push(&k, "skr_clamped", skr.skr_clamped, None, key.sample_count);
        report.push(&k, "svd_multiplications_alice", (config.n_a * config.n_a * d) as f64, None, 1);
        report.push(&k, "svd_multiplications_bob", (config.n_b * config.n_b * d) as f64, None, 1);
    }
    Ok(report)
}
