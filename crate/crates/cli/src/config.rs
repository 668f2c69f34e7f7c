// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run configuration: a TOML file whose every table rejects unknown keys.

use std::path::{Path, PathBuf};

use reasonlens::nn::AdamWConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Informational; the subcommand decides what runs.
    pub experiment: Option<String>,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub model: ModelConfig,
    pub dataset: DatasetConfig,
    pub worlds: WorldsConfig,
    pub training: TrainingConfig,
    pub loss: LossConfig,
    pub analysis: AnalysisConfig,
    pub intervention: InterventionConfig,
    pub attack: AttackConfig,
    pub ingest: IngestConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: 0,
            out: PathBuf::from("out"),
            threads: None,
            model: ModelConfig::default(),
            dataset: DatasetConfig::default(),
            worlds: WorldsConfig::default(),
            training: TrainingConfig::default(),
            loss: LossConfig::default(),
            analysis: AnalysisConfig::default(),
            intervention: InterventionConfig::default(),
            attack: AttackConfig::default(),
            ingest: IngestConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub architecture: String,
    /// Load this checkpoint instead of training.
    pub checkpoint: Option<PathBuf>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            architecture: "mini-lenet".into(),
            checkpoint: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "kind")]
pub enum DatasetConfig {
    SyntheticDigits {
        #[serde(default = "default_train_per_class")]
        train_per_class: usize,
        #[serde(default = "default_test_per_class")]
        test_per_class: usize,
        /// Training images use this seed, test images the next one.
        #[serde(default = "default_data_seed")]
        seed: u64,
    },
    MnistIdx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        /// Keep only the first `limit` training examples.
        #[serde(default)]
        limit: Option<usize>,
    },
    SyntheticFairness {
        #[serde(default = "default_fairness_n")]
        train_n: usize,
        #[serde(default = "default_fairness_test_n")]
        test_n: usize,
        #[serde(default = "default_bias")]
        bias: f64,
        /// Training rows use this seed, test rows the next one.
        #[serde(default = "default_data_seed")]
        seed: u64,
    },
    TabularCsv {
        path: PathBuf,
        label_column: String,
        threshold: f64,
        protected_column: String,
        privileged_value: f64,
        #[serde(default = "yes")]
        include_protected: bool,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
    },
}

fn default_train_per_class() -> usize {
    300
}
fn default_test_per_class() -> usize {
    100
}
fn default_data_seed() -> u64 {
    1
}
fn default_fairness_n() -> usize {
    4000
}
fn default_fairness_test_n() -> usize {
    2000
}
fn default_bias() -> f64 {
    0.3
}
fn default_test_fraction() -> f64 {
    0.2
}
fn yes() -> bool {
    true
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::SyntheticDigits {
            train_per_class: default_train_per_class(),
            test_per_class: default_test_per_class(),
            seed: default_data_seed(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldsConfig {
    /// Number of sampled worlds; the whole split when absent.
    pub count: Option<usize>,
    pub split: Split,
    /// Sampling seed; the run seed when absent.
    pub seed: Option<u64>,
}

impl Default for WorldsConfig {
    fn default() -> Self {
        Self {
            count: None,
            split: Split::Test,
            seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 64,
            optimizer: AdamWConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    /// Reasons objective added to the standard loss, if any.
    pub reasons: Option<String>,
    pub weight: f64,
    /// Also train a standard-loss copy on the same batches.
    pub paired: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            reasons: None,
            weight: 1.0,
            paired: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Capture points; every non-activation, non-reshape layer when absent.
    pub layers: Option<Vec<String>>,
    pub normalization: String,
    pub solver: String,
    pub k: usize,
    pub pca_dim: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            layers: None,
            normalization: "l2".into(),
            solver: "auto".into(),
            k: 10,
            pca_dim: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterventionConfig {
    pub layer: String,
    pub count: usize,
    pub pos2neg_rule: String,
    pub neg2pos_rule: String,
    /// Classes to run; all when absent.
    pub classes: Option<Vec<usize>>,
}

impl Default for InterventionConfig {
    fn default() -> Self {
        Self {
            layer: "fc1:pre".into(),
            count: 8,
            pos2neg_rule: "affine(1,-3)".into(),
            neg2pos_rule: "affine(1,-5)".into(),
            classes: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackConfig {
    pub epsilons: Vec<f64>,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestConfig {
    pub path: Option<PathBuf>,
    /// World attribute defining the propositions; one proposition per value.
    pub attribute: String,
    /// Values to rank against; every distinct value when absent.
    pub values: Option<Vec<String>>,
    pub top_k: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            path: None,
            attribute: "label".into(),
            values: None,
            top_k: 25,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("{path}: {}", e.into_inner().message().trim()))
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// SHA-256 of the canonical JSON form, ignoring where output goes and
    /// how many threads compute it.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = PathBuf::new();
        canonical.threads = None;
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::Config(format!("{field}: {msg}")));
        if self.training.batch_size == 0 {
            return bad("training.batch_size", "must be positive".into());
        }
        if !self.loss.weight.is_finite() {
            return bad("loss.weight", "must be finite".into());
        }
        if self.analysis.k == 0 {
            return bad("analysis.k", "must be positive".into());
        }
        if self.attack.epsilons.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return bad("attack.epsilons", "must be finite and non-negative".into());
        }
        if self.threads == Some(0) {
            return bad("threads", "must be positive".into());
        }
        match &self.dataset {
            DatasetConfig::MnistIdx { train_images, train_labels, test_images, test_labels, .. } => {
                for (field, p) in [
                    ("dataset.train_images", train_images),
                    ("dataset.train_labels", train_labels),
                    ("dataset.test_images", test_images),
                    ("dataset.test_labels", test_labels),
                ] {
                    if !p.is_file() {
                        return bad(field, format!("no such file {}", p.display()));
                    }
                }
            }
            DatasetConfig::TabularCsv { path, .. } if !path.is_file() => {
                return bad("dataset.path", format!("no such file {}", path.display()));
            }
            DatasetConfig::SyntheticFairness { bias, .. } if !(0.0..=1.0).contains(bias) => {
                return bad("dataset.bias", "must lie in [0, 1]".into());
            }
            _ => {}
        }
        if let Some(p) = &self.model.checkpoint {
            if !p.is_file() {
                return bad("model.checkpoint", format!("no such file {}", p.display()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_file() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let err = RunConfig::from_toml("[training]\nepochz = 3\n").unwrap_err().to_string();
        assert!(err.contains("training"), "{err}");
        assert!(err.contains("epochz"), "{err}");
        let err = RunConfig::from_toml("[dataset]\nkind = \"synthetic-digits\"\nsize = 3\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("size"), "{err}");
    }

    #[test]
    fn hash_ignores_out_and_threads_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out = "elsewhere".into();
        b.threads = Some(4);
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn missing_dataset_path_is_a_config_error() {
        let cfg = RunConfig::from_toml(
            "[dataset]\nkind = \"tabular-csv\"\npath = \"/nonexistent.csv\"\nlabel_column = \"PINCP\"\nthreshold = 25000\nprotected_column = \"SEX\"\nprivileged_value = 1\n",
        )
        .unwrap();
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("dataset.path"));
    }
}
