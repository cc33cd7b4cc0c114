use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct Summary {
    /// Headline error of the returned estimate (`rel_err` or `err_recon`).
    pub final_error: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_err_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_err_l: Option<f64>,
    pub e002T: f64,
    pub e02T: f64,
    pub eT: f64,
    pub epochs_completed: usize,
    pub total_iters: usize,
    pub wall_ms_total: f64,
    pub invariant_checks: u64,
    pub invariant_violations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub trajectory: String,
    pub manifest: String,
}

/// Record of one run. `config` alone reproduces the trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub revision: String,
    pub config: ExperimentConfig,
    pub summary: Summary,
    pub outputs: Outputs,
}

pub fn revision() -> String {
    match option_env!("EADMM_REVISION") {
        Some(r) => format!("{} ({r})", env!("CARGO_PKG_VERSION")),
        None => env!("CARGO_PKG_VERSION").to_string(),
    }
}

impl RunManifest {
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("manifest: {e}")))
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(format!("manifest: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunManifest {
        RunManifest {
            seed: 9,
            revision: revision(),
            config: ExperimentConfig {
                seed: 9,
                radius: Some(0.1),
                ..Default::default()
            },
            summary: Summary {
                final_error: 0.012,
                final_err_s: Some(1e-3),
                final_err_l: None,
                e002T: 0.9,
                e02T: 0.1,
                eT: 0.012,
                epochs_completed: 5,
                total_iters: 10_000,
                wall_ms_total: 12.5,
                invariant_checks: 0,
                invariant_violations: 0,
            },
            outputs: Outputs {
                trajectory: "out/trajectory.csv".into(),
                manifest: "out/manifest.toml".into(),
            },
        }
    }

    #[test]
    fn round_trip() {
        let m = sample();
        let text = m.to_toml_string().unwrap();
        assert!(text.contains("e002T"));
        assert_eq!(RunManifest::from_toml_str(&text).unwrap(), m);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        let m = sample();
        m.write(&path).unwrap();
        assert_eq!(RunManifest::read(&path).unwrap(), m);
    }

    #[test]
    fn manifest_doubles_as_config_file() {
        let m = sample();
        let cfg = ExperimentConfig::from_toml_str(&m.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, m.config);
    }
}
