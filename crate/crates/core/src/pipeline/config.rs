use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::base_model::{mlp_arch, LayerSpec, TrainConfig};
use crate::data::{DataSource, SplitSpec};
use crate::error::{Error, Result};
use crate::meta::{FeatureBasis, GbmParams};
use crate::numeric::Rng;

/// Confidence-scoring method compared by an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Softmax,
    BlackboxLr,
    BlackboxGbm,
    ProbesLr,
    ProbesGbm,
    Temperature,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Softmax,
        Method::BlackboxLr,
        Method::BlackboxGbm,
        Method::ProbesLr,
        Method::ProbesGbm,
        Method::Temperature,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Softmax => "softmax",
            Method::BlackboxLr => "blackbox-lr",
            Method::BlackboxGbm => "blackbox-gbm",
            Method::ProbesLr => "probes-lr",
            Method::ProbesGbm => "probes-gbm",
            Method::Temperature => "temperature",
        }
    }

    pub fn is_gbm(self) -> bool {
        matches!(self, Method::BlackboxGbm | Method::ProbesGbm)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::config("methods", format!("unknown method `{s}`")))
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Condition {
    Clean,
    /// Symmetric label noise on train-base, train-meta and dev; test and OOD stay clean.
    Noisy { rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train: DataSource,
    pub test: DataSource,
    #[serde(default)]
    pub ood: Option<DataSource>,
    #[serde(default)]
    pub num_classes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub fractions: [f64; 3],
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            fractions: [0.6, 0.2, 0.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseConfig {
    /// Widths of the relu hidden layers; a `k`-wide output layer is appended.
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for BaseConfig {
    fn default() -> Self {
        BaseConfig {
            hidden: vec![256, 128, 64, 32],
            epochs: 30,
            batch_size: 64,
            learning_rate: 0.05,
            l2: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            epochs: 20,
            batch_size: 64,
            learning_rate: 0.05,
            l2: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaConfig {
    pub methods: Vec<Method>,
    pub basis: FeatureBasis,
    /// L2 strengths tried for the LR meta-models; the best dev AUC wins.
    pub lr_lambdas: Vec<f64>,
    pub lr_max_steps: usize,
    pub lr_step: f64,
    pub gbm: GbmParams,
    pub gbm_search: GbmSearch,
    pub quadrant_threshold: f64,
    pub sweep_thresholds: Vec<f64>,
    pub rejection_fractions: Vec<f64>,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            methods: Method::ALL.to_vec(),
            basis: FeatureBasis::Probability,
            lr_lambdas: vec![1e-4, 1e-3, 1e-2],
            lr_max_steps: 2000,
            lr_step: 1.0,
            gbm: GbmParams::default(),
            gbm_search: GbmSearch::default(),
            quadrant_threshold: 0.5,
            sweep_thresholds: (0..=20).map(|i| i as f64 / 20.0).collect(),
            rejection_fractions: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        }
    }
}

/// Learning rates, depths and ensemble sizes tried for the GBM meta-models; the best dev AUC wins.
/// Empty lists fall back to the single value in `meta.gbm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbmSearch {
    pub learning_rate: Vec<f64>,
    pub max_depth: Vec<usize>,
    pub stages: Vec<usize>,
}

impl Default for GbmSearch {
    fn default() -> Self {
        GbmSearch {
            learning_rate: vec![0.1, 0.03],
            max_depth: vec![1, 2, 3],
            stages: vec![25, 50, 100, 200],
        }
    }
}

impl GbmSearch {
    /// Candidate learning rates, or the configured rate when the list is empty.
    pub fn learning_rates(&self, base: &GbmParams) -> Vec<f64> {
        if self.learning_rate.is_empty() {
            vec![base.learning_rate]
        } else {
            self.learning_rate.clone()
        }
    }

    /// Candidate depths, or the configured depth when the list is empty.
    pub fn depths(&self, base: &GbmParams) -> Vec<usize> {
        if self.max_depth.is_empty() {
            vec![base.max_depth]
        } else {
            self.max_depth.clone()
        }
    }

    /// Candidate ensemble sizes, ascending, or the configured size when empty.
    pub fn stage_counts(&self, base: &GbmParams) -> Vec<usize> {
        let mut s = if self.stages.is_empty() {
            vec![base.stages]
        } else {
            self.stages.clone()
        };
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// Everything that determines one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every stage seed derives from it.
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitConfig,
    pub condition: Condition,
    #[serde(default)]
    pub base: BaseConfig,
    #[serde(default)]
    pub probes: ProbeConfig,
    #[serde(default)]
    pub meta: MetaConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| format!("bytes {}..{}", s.start, s.end))
                .unwrap_or_else(|| "<document>".into());
            Error::config(field, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative data paths resolve against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = ExperimentConfig::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serialises")
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        let fix_src = |s: &mut DataSource| match s {
            DataSource::Csv { path } => fix(path),
            DataSource::IdxPair { images, labels } => {
                fix(images);
                fix(labels);
            }
        };
        fix_src(&mut self.data.train);
        fix_src(&mut self.data.test);
        if let Some(o) = &mut self.data.ood {
            fix_src(o);
        }
        if let Some(o) = &mut self.output_dir {
            fix(o);
        }
    }

    pub fn validate(&self) -> Result<()> {
        SplitSpec::new(self.split.fractions, 0)
            .map_err(|e| Error::config("split.fractions", e.to_string()))?;
        if let Condition::Noisy { rate } = self.condition {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::config("condition.rate", format!("{rate} is outside [0, 1]")));
            }
        }
        if self.base.hidden.iter().any(|&w| w == 0) {
            return Err(Error::config("base.hidden", "layer widths must be positive"));
        }
        self.base_train_config()
            .validate()
            .map_err(|e| Error::config("base", e.to_string()))?;
        self.probe_train_config()
            .validate()
            .map_err(|e| Error::config("probes", e.to_string()))?;
        let m = &self.meta;
        if m.methods.is_empty() {
            return Err(Error::config("meta.methods", "at least one method is required"));
        }
        if m.lr_lambdas.is_empty() || m.lr_lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::config("meta.lr_lambdas", "need at least one non-negative value"));
        }
        if m.lr_max_steps == 0 || !(m.lr_step > 0.0 && m.lr_step.is_finite()) {
            return Err(Error::config("meta.lr_step", "LR steps and step size must be positive"));
        }
        let g = &m.gbm;
        if !(g.learning_rate > 0.0 && g.learning_rate.is_finite()) {
            return Err(Error::config("meta.gbm.learning_rate", "must be positive"));
        }
        if !(g.subsample > 0.0 && g.subsample <= 1.0) {
            return Err(Error::config("meta.gbm.subsample", "must be in (0, 1]"));
        }
        if g.min_samples_leaf == 0 {
            return Err(Error::config("meta.gbm.min_samples_leaf", "must be at least 1"));
        }
        if m.gbm_search.learning_rate.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::config("meta.gbm_search.learning_rate", "rates must be positive"));
        }
        if m.gbm_search.max_depth.iter().any(|&d| d == 0) {
            return Err(Error::config("meta.gbm_search.max_depth", "depths must be at least 1"));
        }
        if m.gbm_search.stages.iter().any(|&s| s == 0) {
            return Err(Error::config("meta.gbm_search.stages", "stage counts must be at least 1"));
        }
        if m.rejection_fractions.iter().any(|f| !(0.0..1.0).contains(f)) {
            return Err(Error::config("meta.rejection_fractions", "fractions must be in [0, 1)"));
        }
        if m.sweep_thresholds.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::config("meta.sweep_thresholds", "must be sorted ascending"));
        }
        Ok(())
    }

    pub fn stage_seed(&self, stage: &str) -> u64 {
        Rng::derive_seed(self.seed, stage)
    }

    pub fn arch(&self, num_classes: usize) -> Vec<LayerSpec> {
        mlp_arch(&self.base.hidden, num_classes)
    }

    pub fn base_train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.base.epochs,
            batch_size: self.base.batch_size,
            learning_rate: self.base.learning_rate,
            l2: self.base.l2,
            seed: self.stage_seed("base"),
        }
    }

    pub fn probe_train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.probes.epochs,
            batch_size: self.probes.batch_size,
            learning_rate: self.probes.learning_rate,
            l2: self.probes.l2,
            seed: self.stage_seed("probes"),
        }
    }

    pub fn lr_train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.meta.lr_max_steps,
            batch_size: 1,
            learning_rate: self.meta.lr_step,
            l2: 0.0,
            seed: 0,
        }
    }

    pub fn has(&self, method: Method) -> bool {
        self.meta.methods.contains(&method)
    }
}
