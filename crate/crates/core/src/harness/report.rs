use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

/// One metric value. CSV column order follows the field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub sweep_key: String,
    pub metric: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub snr_definition: String,
    pub sample_definition: String,
    /// Mean squared largest singular value from the SNR calibration.
    pub xi_bar_sq: Option<f64>,
    pub notes: Vec<String>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown format '{other}' (expected csv or json)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub metadata: ReportMetadata,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn new(command: &str, config: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            metadata: ReportMetadata {
                tool: env!("CARGO_PKG_NAME").to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                command: command.to_string(),
                config_hash: config.hash()?,
                seed: config.seed,
                snr_definition: super::SNR_DEFINITION.to_string(),
                sample_definition: super::SAMPLE_DEFINITION.to_string(),
                xi_bar_sq: None,
                notes: Vec::new(),
                config: config.clone(),
            },
            rows: Vec::new(),
        })
    }

    pub fn push(&mut self, sweep_key: &str, metric: &str, value: f64, stderr: Option<f64>, n: usize) {
        self.rows.push(ReportRow {
            sweep_key: sweep_key.to_string(),
            metric: metric.to_string(),
            value,
            stderr,
            n,
            seed: self.metadata.seed,
        });
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.metadata.notes.push(text.into());
    }

    /// First row matching `sweep_key` and `metric`.
    pub fn get(&self, sweep_key: &str, metric: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.sweep_key == sweep_key && r.metric == metric)
    }

    pub fn value(&self, sweep_key: &str, metric: &str) -> Option<f64> {
        self.get(sweep_key, metric).map(|r| r.value)
    }

    pub fn csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn metadata_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.metadata).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    /// Aligned plain-text table for the terminal.
    pub fn table(&self) -> String {
        let fmt_se = |s: Option<f64>| s.map_or(String::new(), |v| format!("{v:.4}"));
        let kw = self.rows.iter().map(|r| r.sweep_key.len()).max().unwrap_or(0).max(9);
        let mw = self.rows.iter().map(|r| r.metric.len()).max().unwrap_or(0).max(6);
        let mut out = String::new();
        let _ = writeln!(out, "# {} (seed {}, config {})", self.metadata.command, self.metadata.seed, &self.metadata.config_hash[..12]);
        let _ = writeln!(out, "# SNR: {}", self.metadata.snr_definition);
        if let Some(x) = self.metadata.xi_bar_sq {
            let _ = writeln!(out, "# calibrated mean xi_1^2 = {x:.6e}");
        }
        for n in &self.metadata.notes {
            let _ = writeln!(out, "# {n}");
        }
        let _ = writeln!(out, "{:kw$}  {:mw$}  {:>14}  {:>10}  {:>6}", "sweep_key", "metric", "value", "stderr", "n");
        for r in &self.rows {
            let _ = writeln!(out, "{:kw$}  {:mw$}  {:>14.6}  {:>10}  {:>6}", r.sweep_key, r.metric, r.value, fmt_se(r.stderr), r.n);
        }
        out
    }

    /// Writes `<command>.csv` plus `<command>.meta.json`, or a single
    /// `<command>.json`. Returns the written paths.
    pub fn write(&self, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let stem = &self.metadata.command;
        let files = match format {
            OutputFormat::Csv => vec![
                (dir.join(format!("{stem}.csv")), self.csv()?),
                (dir.join(format!("{stem}.meta.json")), self.metadata_json()?),
            ],
            OutputFormat::Json => vec![(dir.join(format!("{stem}.json")), self.json()?)],
        };
        for (path, body) in &files {
            std::fs::write(path, body)?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentReport {
        let mut r = ExperimentReport::new("attack", &ExperimentConfig::desk()).unwrap();
        r.push("snr_db=20;m=4", "nrmse_median", 0.125, None, 200);
        r.push("snr_db=20;m=4", "nrmse_mean", 0.13, Some(0.01), 200);
        r
    }

    #[test]
    fn csv_layout() {
        let csv = sample().csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("sweep_key,metric,value,stderr,n,seed"));
        assert_eq!(lines.next(), Some("snr_db=20;m=4,nrmse_median,0.125,,200,42"));
        assert_eq!(lines.next(), Some("snr_db=20;m=4,nrmse_mean,0.13,0.01,200,42"));
    }

    #[test]
    fn lookup_and_files() {
        let r = sample();
        assert_eq!(r.value("snr_db=20;m=4", "nrmse_median"), Some(0.125));
        assert!(r.table().contains("nrmse_mean"));
        let dir = tempfile::tempdir().unwrap();
        let written = r.write(dir.path(), OutputFormat::Csv).unwrap();
        assert_eq!(written.len(), 2);
        let meta: ReportMetadata = serde_json::from_str(&std::fs::read_to_string(&written[1]).unwrap()).unwrap();
        assert_eq!(meta.config, ExperimentConfig::desk());
        let written = r.write(dir.path(), OutputFormat::Json).unwrap();
        let back: ExperimentReport = serde_json::from_str(&std::fs::read_to_string(&written[0]).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
