//! Mutual-information estimators, the mixture-model key MI, the leakage
//! bound and the secret-key-rate bound.
//!
//! All results are in bits. Raw estimates are never clamped: a negative
//! value is kept and marked with [`MiEstimate::negative`].

mod histogram;
mod knn;
mod leakage;
mod mixture;
mod skr;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use histogram::{equal_frequency_bins, mi_histogram};
pub use knn::{mi_knn, mi_knn_multi, mi_knn_with_jitter, DEFAULT_JITTER_SEED};
pub use leakage::{feature_leakage, leakage_upper_bound, InnerExpectation, LeakageConfig, LeakageReport};
pub use mixture::{mi_mixture_numeric, mixture_mi, MixtureComponent, QuadratureConfig};
pub use skr::{skr_lower_bound, SkrEstimate};

pub(crate) const LN2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiMethod {
    Histogram,
    Knn,
    MixtureNumeric,
    McLeakage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    pub bits: f64,
    pub method: MiMethod,
    pub sample_count: usize,
    /// Standard error of `bits` where the method provides one.
    pub std_error: Option<f64>,
    pub diagnostics: BTreeMap<String, f64>,
    /// Warnings such as an unmet standard-error target.
    pub flags: Vec<String>,
}

impl MiEstimate {
    pub(crate) fn new(bits: f64, method: MiMethod, sample_count: usize) -> Self {
        Self {
            bits,
            method,
            sample_count,
            std_error: None,
            diagnostics: BTreeMap::new(),
            flags: Vec::new(),
        }
    }

    pub(crate) fn with_diagnostic(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    /// The raw estimate fell below zero.
    pub fn negative(&self) -> bool {
        self.bits < 0.0
    }

    pub fn is_flagged(&self) -> bool {
        !self.flags.is_empty()
    }

    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }
}
