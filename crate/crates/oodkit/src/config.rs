//! Run configuration: a flat TOML file whose values command-line flags
//! override.

use std::fs;
use std::path::{Path, PathBuf};

use oodkit_core::synth::{Regime, RegimeParams, DEFAULT_REBALANCE_ALPHA};
use oodkit_core::{FprMode, Method, DEFAULT_EPS_SCALE, DEFAULT_K, DEFAULT_TEMPERATURE};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Every key is optional; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub train: Option<PathBuf>,
    pub id_test: Option<PathBuf>,
    pub ood_test: Option<PathBuf>,
    pub id_logits: Option<PathBuf>,
    pub ood_logits: Option<PathBuf>,
    pub methods: Option<Vec<Method>>,
    pub k: Option<usize>,
    pub temperature: Option<f64>,
    pub eps_scale: Option<f64>,
    pub fpr_mode: Option<FprMode>,
    pub target_id_tpr: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub regimes: Option<Vec<Regime>>,
    pub classes: Option<usize>,
    pub per_class: Option<usize>,
    pub dim: Option<usize>,
    pub alpha: Option<f64>,
    pub rebalance: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    /// Fields set in `over` win.
    pub fn overlay(self, over: ConfigFile) -> ConfigFile {
        ConfigFile {
            train: over.train.or(self.train),
            id_test: over.id_test.or(self.id_test),
            ood_test: over.ood_test.or(self.ood_test),
            id_logits: over.id_logits.or(self.id_logits),
            ood_logits: over.ood_logits.or(self.ood_logits),
            methods: over.methods.or(self.methods),
            k: over.k.or(self.k),
            temperature: over.temperature.or(self.temperature),
            eps_scale: over.eps_scale.or(self.eps_scale),
            fpr_mode: over.fpr_mode.or(self.fpr_mode),
            target_id_tpr: over.target_id_tpr.or(self.target_id_tpr),
            seed: over.seed.or(self.seed),
            out: over.out.or(self.out),
            regimes: over.regimes.or(self.regimes),
            classes: over.classes.or(self.classes),
            per_class: over.per_class.or(self.per_class),
            dim: over.dim.or(self.dim),
            alpha: over.alpha.or(self.alpha),
            rebalance: over.rebalance.or(self.rebalance),
        }
    }
}

/// Fully resolved settings with defaults applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub id_test: Option<PathBuf>,
    pub ood_test: Option<PathBuf>,
    pub id_logits: Option<PathBuf>,
    pub ood_logits: Option<PathBuf>,
    pub methods: Vec<Method>,
    pub k: usize,
    pub temperature: f64,
    pub eps_scale: f64,
    pub fpr_mode: FprMode,
    pub target_id_tpr: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub regimes: Vec<Regime>,
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub alpha: f64,
    pub rebalance: Option<usize>,
}

impl RunConfig {
    pub fn resolve(file: ConfigFile) -> Result<Self, CliError> {
        let cfg = RunConfig {
            train: file.train,
            id_test: file.id_test,
            ood_test: file.ood_test,
            id_logits: file.id_logits,
            ood_logits: file.ood_logits,
            methods: file
                .methods
                .unwrap_or_else(|| vec![Method::Maha, Method::Knn]),
            k: file.k.unwrap_or(DEFAULT_K),
            temperature: file.temperature.unwrap_or(DEFAULT_TEMPERATURE),
            eps_scale: file.eps_scale.unwrap_or(DEFAULT_EPS_SCALE),
            fpr_mode: file.fpr_mode.unwrap_or_default(),
            target_id_tpr: file.target_id_tpr.unwrap_or(0.95),
            seed: file.seed.unwrap_or(0),
            out: file.out.unwrap_or_else(|| PathBuf::from("out")),
            regimes: file.regimes.unwrap_or_default(),
            classes: file.classes.unwrap_or(5),
            per_class: file.per_class.unwrap_or(500),
            dim: file.dim.unwrap_or(32),
            alpha: file.alpha.unwrap_or(DEFAULT_REBALANCE_ALPHA),
            rebalance: file.rebalance,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.methods.is_empty() {
            return Err(CliError::input(
                "method set is empty; choose from maha, knn, msp, energy",
            ));
        }
        if !(self.target_id_tpr > 0.0 && self.target_id_tpr <= 1.0) {
            return Err(CliError::input(format!(
                "target_id_tpr must lie in (0, 1], got {}",
                self.target_id_tpr
            )));
        }
        if self.k == 0 {
            return Err(CliError::input("k must be at least 1"));
        }
        if !(self.temperature > 0.0) {
            return Err(CliError::input(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(self.eps_scale >= 0.0) {
            return Err(CliError::input(format!(
                "eps_scale must be non-negative, got {}",
                self.eps_scale
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(CliError::input(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn regime_params(&self) -> RegimeParams {
        RegimeParams::default()
    }

    /// Canonical TOML rendering; the manifest hash is taken over this text.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_and_overrides() {
        let file: ConfigFile = toml::from_str(
            r#"
            methods = ["maha", "energy"]
            k = 3
            fpr_mode = "id-tpr"
            regimes = ["ood-pretrained", "same-domain-overlap"]
            seed = 9
            "#,
        )
        .unwrap();
        let over = ConfigFile {
            k: Some(5),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(file.overlay(over)).unwrap();
        assert_eq!(cfg.methods, vec![Method::Maha, Method::Energy]);
        assert_eq!(cfg.k, 5);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.fpr_mode, FprMode::IdTpr);
        assert_eq!(
            cfg.regimes,
            vec![Regime::OodPretrained, Regime::SameDomainOverlap]
        );
        assert_eq!(cfg.target_id_tpr, 0.95);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(toml::from_str::<ConfigFile>("bogus = 1").is_err());
        assert!(toml::from_str::<ConfigFile>("methods = [\"cosine\"]").is_err());
        let empty = ConfigFile {
            methods: Some(vec![]),
            ..Default::default()
        };
        assert_eq!(RunConfig::resolve(empty).unwrap_err().code, 2);
        let bad = ConfigFile {
            target_id_tpr: Some(0.0),
            ..Default::default()
        };
        assert!(RunConfig::resolve(bad).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::resolve(ConfigFile::default()).unwrap();
        let b = RunConfig::resolve(ConfigFile {
            seed: Some(1),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
