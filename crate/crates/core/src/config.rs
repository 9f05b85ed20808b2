//! Declarative pipeline configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//!
//! [paths]
//! ratings = "ratings.csv"
//! catalog = "catalog.csv"
//! output = "out"
//!
//! [[features]]
//! name = "genre"
//!
//! [[features]]
//! name = "keywords"
//! min_count = 20
//!
//! [clustering]
//! metric = "linear"
//! linkage = "ward"
//!
//! [kmodes]
//! k = [5, 10]
//! init = "cao"
//!
//! [evaluation]
//! splits = ["new-user", "new-item"]
//! folds = 6
//! modes = ["baseline", "stereotype"]
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::hac::{Linkage, Metric};
use crate::ingest::DEFAULT_DELIMITER;
use crate::kmodes::InitKind;
use crate::recs::{FeatureMode, SplitKind};
use crate::stereotype::Activation;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    pub paths: Paths,
    pub features: Vec<FeatureConfig>,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    #[serde(default)]
    pub kmodes: KModesConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub ratings: Option<PathBuf>,
    pub catalog: PathBuf,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub name: String,
    #[serde(default = "default_min_count")]
    pub min_count: usize,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_min_count() -> usize {
    1
}

fn default_delimiter() -> char {
    DEFAULT_DELIMITER
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct ClusteringConfig {
    #[serde(default)]
    pub metric: Metric,
    #[serde(default)]
    pub linkage: Linkage,
    #[serde(default)]
    pub activation: Activation,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KModesConfig {
    #[serde(default = "default_k")]
    pub k: Vec<usize>,
    #[serde(default)]
    pub init: InitKind,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_k() -> Vec<usize> {
    vec![5, 10]
}

fn default_max_iter() -> usize {
    100
}

impl Default for KModesConfig {
    fn default() -> Self {
        KModesConfig {
            k: default_k(),
            init: InitKind::default(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default = "default_splits")]
    pub splits: Vec<SplitKind>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_modes")]
    pub modes: Vec<FeatureMode>,
}

fn default_splits() -> Vec<SplitKind> {
    vec![SplitKind::NewUser, SplitKind::NewItem]
}

fn default_folds() -> usize {
    6
}

fn default_modes() -> Vec<FeatureMode> {
    vec![FeatureMode::Baseline, FeatureMode::Stereotype]
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            splits: default_splits(),
            folds: default_folds(),
            modes: default_modes(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            let fix = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            };
            if let Some(r) = cfg.paths.ratings.as_mut() {
                fix(r);
            }
            fix(&mut cfg.paths.catalog);
            fix(&mut cfg.paths.output);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::Config(
                "at least one [[features]] entry is required".into(),
            ));
        }
        if let Some(f) = self.features.iter().find(|f| f.min_count == 0) {
            return Err(Error::Config(format!(
                "feature '{}': min_count must be >= 1",
                f.name
            )));
        }
        if self.kmodes.k.contains(&0) {
            return Err(Error::Config("kmodes.k entries must be >= 1".into()));
        }
        if self.evaluation.folds < 2 {
            return Err(Error::Config("evaluation.folds must be >= 2".into()));
        }
        Ok(())
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureConfig> {
        self.features.iter().find(|f| f.name == name)
    }

    /// Per-stage seed derived from the root seed.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        stage_seed(self.seed, stage)
    }
}

/// FNV-1a over the stage name, mixed with the root seed.
pub fn stage_seed(root: u64, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ root;
    for b in stage.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
