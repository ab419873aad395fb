use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{PathStats, Topology};
use crate::error::{Error, Result};
use crate::sampling::PhaseAlphabet;

/// Everything an experiment needs. Serialized as a flat TOML document;
/// fields missing from a file take their desk-preset values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_a: usize,
    pub n_b: usize,
    pub n_e: usize,
    pub irs_x: usize,
    pub irs_y: usize,
    /// Colluding-Eve counts swept over; the scenario draws the largest.
    pub eve_counts: Vec<usize>,
    /// Probe length `D` used by single-length experiments.
    pub probe_length: usize,
    /// Probe lengths of the SKR-versus-`D` curve.
    pub probe_lengths: Vec<usize>,
    /// Probe row sum `C`.
    pub row_power: f64,
    pub snr_db: Vec<f64>,
    /// SNR of the single-SNR validation checks.
    pub validation_snr_db: f64,
    /// Coherence rounds `T` per key-generation run.
    pub rounds: usize,
    pub mc_trials: usize,
    /// Monte-Carlo draws of the moment checks.
    pub moment_draws: usize,
    pub calibration_draws: usize,
    pub quantizer_bits: usize,
    pub guard_ratio: f64,
    pub phase_alphabet: PhaseAlphabet,
    pub knn_k: usize,
    /// Alphabet size `K` of the leakage computation.
    pub leakage_alphabet: u32,
    pub leakage_samples: usize,
    pub leakage_max_enumeration: usize,
    pub seed: u64,
    pub min_paths: usize,
    pub max_paths: usize,
    pub path_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Paper,
    Desk,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            other => Err(Error::Config(format!("unknown preset '{other}' (expected paper or desk)"))),
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    /// Small scenario: 4-antenna nodes, a 2x4 surface, up to 16 Eves.
    pub fn desk() -> Self {
        Self {
            n_a: 4,
            n_b: 4,
            n_e: 4,
            irs_x: 2,
            irs_y: 4,
            eve_counts: vec![1, 4, 16],
            probe_length: 50,
            probe_lengths: vec![25, 50, 100, 200],
            row_power: 1.0,
            snr_db: vec![0.0, 5.0, 10.0, 20.0],
            validation_snr_db: 20.0,
            rounds: 500,
            mc_trials: 200,
            moment_draws: 10_000,
            calibration_draws: 100,
            quantizer_bits: 2,
            guard_ratio: 0.1,
            phase_alphabet: PhaseAlphabet::Discrete(2),
            knn_k: 3,
            leakage_alphabet: 2,
            leakage_samples: 200,
            leakage_max_enumeration: 1024,
            seed: 42,
            min_paths: 1,
            max_paths: 10,
            path_loss: 1.0,
        }
    }

    /// The published scenario: 16-antenna nodes and a 10x10 surface.
    pub fn paper() -> Self {
        Self {
            n_a: 16,
            n_b: 16,
            n_e: 16,
            irs_x: 10,
            irs_y: 10,
            eve_counts: vec![1, 10, 50, 100],
            probe_length: 100,
            probe_lengths: vec![25, 50, 100, 200],
            snr_db: vec![-5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            phase_alphabet: PhaseAlphabet::Discrete(8),
            leakage_alphabet: 8,
            ..Self::desk()
        }
    }

    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Paper => Self::paper(),
            Preset::Desk => Self::desk(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn max_eves(&self) -> usize {
        self.eve_counts.iter().copied().max().unwrap_or(0)
    }

    pub fn n_r(&self) -> usize {
        self.irs_x * self.irs_y
    }

    pub fn path_stats(&self) -> PathStats {
        PathStats {
            min_paths: self.min_paths,
            max_paths: self.max_paths,
            path_loss: self.path_loss,
        }
    }

    /// Same scenario with roughly a tenth of the Monte-Carlo work.
    pub fn quick(mut self) -> Self {
        self.rounds = (self.rounds / 5).max(100);
        self.mc_trials = (self.mc_trials / 10).max(10);
        self.moment_draws = (self.moment_draws / 10).max(500);
        self.calibration_draws = (self.calibration_draws / 5).max(20);
        self.leakage_samples = (self.leakage_samples / 5).max(20);
        self
    }

    pub fn topology(&self) -> Result<Topology<f64>> {
        Topology::new(self.n_a, self.n_b, self.n_e, self.irs_x, self.irs_y, self.max_eves(), self.path_stats())
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_a", self.n_a),
            ("n_b", self.n_b),
            ("n_e", self.n_e),
            ("irs_x", self.irs_x),
            ("irs_y", self.irs_y),
            ("probe_length", self.probe_length),
            ("rounds", self.rounds),
            ("mc_trials", self.mc_trials),
            ("moment_draws", self.moment_draws),
            ("calibration_draws", self.calibration_draws),
            ("quantizer_bits", self.quantizer_bits),
            ("knn_k", self.knn_k),
            ("leakage_alphabet", self.leakage_alphabet as usize),
            ("leakage_samples", self.leakage_samples),
            ("leakage_max_enumeration", self.leakage_max_enumeration),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if self.eve_counts.is_empty() || self.eve_counts.contains(&0) {
            return Err(Error::Config("eve_counts must be nonempty with every entry >= 1".into()));
        }
        if self.probe_lengths.is_empty() || self.probe_lengths.contains(&0) {
            return Err(Error::Config("probe_lengths must be nonempty with every entry >= 1".into()));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) || !self.validation_snr_db.is_finite() {
            return Err(Error::Config("snr_db must be a nonempty list of finite values".into()));
        }
        if !(self.row_power > 0.0 && self.row_power.is_finite()) {
            return Err(Error::Config(format!("row_power must be positive, got {}", self.row_power)));
        }
        if !(0.0..0.5).contains(&self.guard_ratio) {
            return Err(Error::Config(format!("guard_ratio must be in [0, 0.5), got {}", self.guard_ratio)));
        }
        if let PhaseAlphabet::Discrete(k) = self.phase_alphabet {
            if k < 2 {
                return Err(Error::Config("discrete phase alphabet needs K >= 2".into()));
            }
        }
        self.path_stats().validate().map_err(|e| Error::Config(e.to_string()))
    }
}
