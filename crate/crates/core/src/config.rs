//! Run configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! models = ["lr", "nb", "knn", "dt", "rnn", "cnn", "cnn_rnn"]
//! out_dir = "out"
//!
//! [synth]
//! n = 15840
//! seed = 1
//!
//! [network]
//! epochs = 50
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::classic::{LogisticConfig, TreeConfig, DEFAULT_ALPHA, DEFAULT_K};
use crate::error::{Error, Result};
use crate::features::DEFAULT_N_TREES;
use crate::metrics::Averaging;
use crate::neural::{Architecture, NetworkConfig};

pub const DEFAULT_SEED: u64 = 42;
pub const SEED_ENV: &str = "SEVPRED_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lr,
    Nb,
    Knn,
    Dt,
    Rnn,
    Cnn,
    CnnRnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Lr,
        ModelKind::Dt,
        ModelKind::Knn,
        ModelKind::Nb,
        ModelKind::Rnn,
        ModelKind::Cnn,
        ModelKind::CnnRnn,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ModelKind::Lr => "lr",
            ModelKind::Nb => "nb",
            ModelKind::Knn => "knn",
            ModelKind::Dt => "dt",
            ModelKind::Rnn => "rnn",
            ModelKind::Cnn => "cnn",
            ModelKind::CnnRnn => "cnn_rnn",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        ModelKind::ALL.into_iter().find(|m| m.key() == key)
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Lr => "Logistic Regression",
            ModelKind::Nb => "Naïve Bayes",
            ModelKind::Knn => "KNN",
            ModelKind::Dt => "Decision Tree",
            ModelKind::Rnn => "RNN",
            ModelKind::Cnn => "CNN",
            ModelKind::CnnRnn => "CNN-RNN",
        }
    }

    pub fn architecture(self) -> Option<Architecture> {
        match self {
            ModelKind::Rnn => Some(Architecture::Rnn),
            ModelKind::Cnn => Some(Architecture::Cnn),
            ModelKind::CnnRnn => Some(Architecture::Hybrid),
            _ => None,
        }
    }
}

/// Parses a comma-separated model list such as `lr,knn,cnn_rnn`.
pub fn parse_model_list(list: &str) -> Result<Vec<ModelKind>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|k| ModelKind::from_key(k).ok_or_else(|| Error::Config(format!("unknown model `{k}`"))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSource {
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for LogisticSettings {
    fn default() -> Self {
        let d = LogisticConfig::default();
        LogisticSettings { epochs: d.epochs, learning_rate: d.learning_rate, l2: d.l2 }
    }
}

impl LogisticSettings {
    pub fn to_config(&self, seed: u64) -> LogisticConfig {
        LogisticConfig { epochs: self.epochs, learning_rate: self.learning_rate, l2: self.l2, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeSettings {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeSettings {
    fn default() -> Self {
        let d = TreeConfig::default();
        TreeSettings { max_depth: d.max_depth, min_leaf: d.min_leaf }
    }
}

impl TreeSettings {
    pub fn to_config(&self) -> TreeConfig {
        TreeConfig { max_depth: self.max_depth, min_leaf: self.min_leaf }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnSettings {
    pub k: usize,
}

impl Default for KnnSettings {
    fn default() -> Self {
        KnnSettings { k: DEFAULT_K }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NaiveBayesSettings {
    pub alpha: f64,
}

impl Default for NaiveBayesSettings {
    fn default() -> Self {
        NaiveBayesSettings { alpha: DEFAULT_ALPHA }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// CSV input; exactly one of `data` and `synth` must be set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSource>,
    /// Run seed. When unset the command line falls back to `SEVPRED_SEED`,
    /// then to [`DEFAULT_SEED`]. Every model gets its own sub-seed derived
    /// from this one and its key, so `network.seed` is not used by runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub test_fraction: f64,
    pub stratified: bool,
    pub threshold: f64,
    pub force_drop: Vec<String>,
    pub n_trees: usize,
    pub oversample_k: usize,
    pub models: Vec<ModelKind>,
    pub averaging: Averaging,
    pub out_dir: PathBuf,
    pub logistic: LogisticSettings,
    pub tree: TreeSettings,
    pub knn: KnnSettings,
    pub naive_bayes: NaiveBayesSettings,
    pub network: NetworkConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            synth: None,
            seed: None,
            test_fraction: 0.25,
            stratified: true,
            threshold: 0.025,
            force_drop: Vec::new(),
            n_trees: DEFAULT_N_TREES,
            oversample_k: 5,
            models: ModelKind::ALL.to_vec(),
            averaging: Averaging::Macro,
            out_dir: PathBuf::from("out"),
            logistic: LogisticSettings::default(),
            tree: TreeSettings::default(),
            knn: KnnSettings::default(),
            naive_bayes: NaiveBayesSettings::default(),
            network: NetworkConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut config = Self::from_toml_str(&text)?;
        // relative data paths are taken relative to the config file
        if let (Some(data), Some(parent)) = (&config.data, path.parent()) {
            if data.is_relative() {
                config.data = Some(parent.join(data));
            }
        }
        Ok(config)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match (&self.data, &self.synth) {
            (Some(_), Some(_)) => return bad("set either `data` or `synth`, not both".into()),
            (None, None) => return bad("no input: set `data` or `synth`".into()),
            (None, Some(s)) if s.n == 0 => return bad("synth.n must be positive".into()),
            _ => {}
        }
        if self.models.is_empty() {
            return bad("model list is empty".into());
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(m) = self.models.iter().find(|m| !seen.insert(**m)) {
            return bad(format!("model `{}` listed twice", m.key()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction must lie in (0, 1), got {}", self.test_fraction));
        }
        if !(0.0..1.0).contains(&self.threshold) {
            return bad(format!("threshold must lie in [0, 1), got {}", self.threshold));
        }
        if self.n_trees == 0 || self.oversample_k == 0 {
            return bad("n_trees and oversample_k must be at least 1".into());
        }
        if let Some(name) = self.force_drop.iter().find(|n| crate::Variable::from_name(n).is_none()) {
            return bad(format!("force_drop names unknown variable `{name}`"));
        }
        if self.knn.k == 0 || !(self.naive_bayes.alpha > 0.0) || self.tree.max_depth == 0 || self.tree.min_leaf == 0 {
            return bad("knn.k, naive_bayes.alpha, tree.max_depth and tree.min_leaf must be positive".into());
        }
        if !(self.logistic.learning_rate > 0.0) {
            return bad("logistic.learning_rate must be positive".into());
        }
        self.network.validate().map_err(|e| Error::Config(format!("network: {e}")))
    }
}
