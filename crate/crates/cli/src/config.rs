//! Run configuration: a TOML document whose values are overridden by CLI flags.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Chirikov,
    Pierrehumbert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Quick,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    OnePoint,
    TwoPoint,
    Projective,
}

/// Every field is optional so that file and flag layers can be merged;
/// subcommands fill in their own defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<Model>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(rename = "A", skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realizations: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<Profile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ControlMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants_file: Option<String>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, CliError> {
        toml::from_str(s).map_err(|e| CliError::Config(format!("config file: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let s = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Values set in `top` win.
    pub fn overlay(mut self, top: &ExperimentConfig) -> Self {
        overlay!(self, top; model, k, a, p, q, nu, steps, samples, realizations, grid, seed,
            workers, out, profile, mode, eps, trials, constants_file);
        self
    }

    /// sha256 of the canonical JSON encoding, without the fields that
    /// only affect where and how fast a run executes.
    pub fn digest(&self) -> String {
        let c = ExperimentConfig {
            workers: None,
            out: None,
            ..self.clone()
        };
        hex(&Sha256::digest(serde_json::to_vec(&c).expect("config serializes")))
    }

    pub fn model(&self) -> Model {
        self.model.unwrap_or(Model::Chirikov)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(20240601)
    }

    /// Kick strength for Chirikov runs or amplitude for Pierrehumbert runs.
    pub fn strength(&self, default: f64) -> f64 {
        match self.model() {
            Model::Chirikov => self.k.unwrap_or(default),
            Model::Pierrehumbert => self.a.or(self.k).unwrap_or(default),
        }
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let c = ExperimentConfig {
            model: Some(Model::Pierrehumbert),
            k: Some(4.0 * std::f64::consts::PI),
            nu: Some(1e-5),
            steps: Some(200),
            seed: Some(7),
            mode: Some(ControlMode::TwoPoint),
            out: Some("out/x".into()),
            ..Default::default()
        };
        let s = c.to_toml_string();
        assert_eq!(ExperimentConfig::from_toml_str(&s).unwrap(), c);
        assert!(s.contains("K = "));
    }

    #[test]
    fn overlay_prefers_top() {
        let file = ExperimentConfig::from_toml_str("K = 10.0\nseed = 3\nmode = \"one-point\"").unwrap();
        let cli = ExperimentConfig {
            k: Some(100.0),
            ..Default::default()
        };
        let m = file.overlay(&cli);
        assert_eq!(m.k, Some(100.0));
        assert_eq!(m.seed, Some(3));
        assert_eq!(m.mode, Some(ControlMode::OnePoint));
    }

    #[test]
    fn digest_ignores_execution_fields() {
        let a = ExperimentConfig { k: Some(10.0), ..Default::default() };
        let b = ExperimentConfig { workers: Some(4), out: Some("elsewhere".into()), ..a.clone() };
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), ExperimentConfig { k: Some(11.0), ..Default::default() }.digest());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml_str("kk = 1.0").is_err());
        assert!(ExperimentConfig::from_toml_str("K = \"ten\"").is_err());
    }
}
