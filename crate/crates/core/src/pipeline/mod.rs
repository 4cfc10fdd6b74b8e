//! Config-driven experiment runs.
//!
//! A run loads and splits the data, trains the base model, fits probes on the
//! frozen model, trains the requested meta-models and writes reports. Each stage
//! persists its artifact under `<out>/artifacts`, and later stages can be rerun
//! on their own against what is already on disk.

mod config;
mod report;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{
    parse_methods, BaseConfig, Condition, DataConfig, ExperimentConfig, GbmSearch, MetaConfig,
    Method, ProbeConfig, SplitConfig,
};
pub use report::{ImportanceSummary, MethodSummary, ProbeAccuracy, RejectionPoint, Summary};

use crate::artifact;
use crate::base_model::{train_base, BaseModel};
use crate::data::{
    inject_label_noise, load_dataset, pool_ood, split, Dataset, NoiseSpec, SplitSpec,
};
use crate::error::{Error, Result};
use crate::eval::{roc_auc, ScoredSet};
use crate::meta::{
    assemble_batch, fit_temperature, meta_labels, train_gbm_meta, train_lr_meta, FeatureMode,
    GbmMeta, GbmParams, LrMeta, MetaFeatures, TemperatureScaler,
};
use crate::numeric::Matrix;
use crate::probes::{train_probes, ProbeSet};

/// Sample ids of the test file start here; out-of-domain ids start at twice this.
pub const TEST_ID_OFFSET: u64 = 1 << 40;

const BASE_KIND: &str = "base-model";
const PROBES_KIND: &str = "probe-set";
const LR_KIND: &str = "lr-meta";
const GBM_KIND: &str = "gbm-meta";
const TEMPERATURE_KIND: &str = "temperature";

/// The five data partitions of one run.
#[derive(Debug, Clone)]
pub struct Partitions {
    pub train_base: Dataset,
    pub train_meta: Dataset,
    pub dev: Dataset,
    pub test: Dataset,
    pub ood: Option<Dataset>,
    /// Labels changed by noise injection in train-base, train-meta and dev.
    pub flipped: [usize; 3],
}

impl Partitions {
    /// Test set pooled with the out-of-domain set, when there is one.
    pub fn pooled(&self) -> Result<Option<Dataset>> {
        self.ood.as_ref().map(|o| pool_ood(&self.test, o)).transpose()
    }
}

/// Loads, splits and (for the noisy condition) corrupts the data, then checks that
/// no sample id appears in two partitions.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<Partitions> {
    let train = load_dataset(&cfg.data.train, cfg.data.num_classes)?;
    let k = train.num_classes();
    let test = load_dataset(&cfg.data.test, Some(k))?.with_id_offset(TEST_ID_OFFSET);
    if test.dim() != train.dim() {
        return Err(Error::invalid(format!(
            "test dimension {} does not match train dimension {}",
            test.dim(),
            train.dim()
        )));
    }
    let ood = match &cfg.data.ood {
        Some(src) => Some(load_dataset(src, None)?.with_id_offset(2 * TEST_ID_OFFSET)),
        None => None,
    };
    let spec = SplitSpec::new(cfg.split.fractions, cfg.stage_seed("split"))?;
    let (mut train_base, mut train_meta, mut dev) = split(&train, &spec)?;
    let mut flipped = [0; 3];
    if let Condition::Noisy { rate } = cfg.condition {
        for (i, (part, tag)) in [
            (&mut train_base, "noise-train-base"),
            (&mut train_meta, "noise-train-meta"),
            (&mut dev, "noise-dev"),
        ]
        .into_iter()
        .enumerate()
        {
            let noisy = inject_label_noise(part, &NoiseSpec { rate, seed: cfg.stage_seed(tag) })?;
            flipped[i] = part
                .labels()
                .iter()
                .zip(noisy.labels())
                .filter(|(a, b)| a != b)
                .count();
            *part = noisy;
        }
    }
    let parts = Partitions {
        train_base,
        train_meta,
        dev,
        test,
        ood,
        flipped,
    };
    check_disjoint(&parts)?;
    Ok(parts)
}

fn check_disjoint(p: &Partitions) -> Result<()> {
    let mut seen = BTreeSet::new();
    let sets = [
        ("train-base", Some(&p.train_base)),
        ("train-meta", Some(&p.train_meta)),
        ("dev", Some(&p.dev)),
        ("test", Some(&p.test)),
        ("ood", p.ood.as_ref()),
    ];
    for (name, set) in sets {
        for &id in set.map(|d| d.ids()).unwrap_or_default() {
            if !seen.insert(id) {
                return Err(Error::invalid(format!("sample {id} of {name} is also in another partition")));
            }
        }
    }
    Ok(())
}

/// A trained LR meta-model and the dev AUC of every L2 strength tried.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedLr {
    pub model: LrMeta,
    pub candidates: Vec<LambdaScore>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaScore {
    pub l2: f64,
    pub dev_auc: f64,
}

/// A trained GBM meta-model and the dev AUC of every grid point tried.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedGbm {
    pub model: GbmMeta,
    pub candidates: Vec<GbmScore>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmScore {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub stages: usize,
    pub dev_auc: f64,
}

/// One trained confidence scorer.
#[derive(Debug, Clone, PartialEq)]
pub enum Scorer {
    Softmax,
    Temperature(TemperatureScaler),
    Lr(FeatureMode, Box<SelectedLr>),
    Gbm(FeatureMode, Box<SelectedGbm>),
}

/// Base outputs and both feature views of one dataset.
pub struct Scoring {
    pub probs: Matrix,
    pub logits: Matrix,
    pub blackbox: MetaFeatures,
    pub whitebox: MetaFeatures,
}

impl Scoring {
    pub fn compute(cfg: &ExperimentConfig, base: &BaseModel, probes: &ProbeSet, x: &Matrix) -> Result<Self> {
        let layers = base.forward_batch(x)?;
        let probs = layers.last().expect("base model has layers").clone();
        let logits = base.logits_batch(x)?;
        let basis = cfg.meta.basis;
        let blackbox = assemble_batch(std::slice::from_ref(&probs), FeatureMode::Blackbox, basis)?;
        let whitebox = assemble_batch(&probes.forward_batch(base, x)?, FeatureMode::Whitebox, basis)?;
        Ok(Scoring {
            probs,
            logits,
            blackbox,
            whitebox,
        })
    }

    fn view(&self, mode: FeatureMode) -> &MetaFeatures {
        match mode {
            FeatureMode::Blackbox => &self.blackbox,
            FeatureMode::Whitebox => &self.whitebox,
        }
    }
}

impl Scorer {
    pub fn score(&self, s: &Scoring) -> Result<Vec<f64>> {
        let row_max = |r: &[f64]| r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        match self {
            Scorer::Softmax => Ok(s.probs.iter_rows().map(row_max).collect()),
            Scorer::Temperature(t) => Ok(s.logits.iter_rows().map(|r| row_max(&t.apply(r))).collect()),
            Scorer::Lr(mode, lr) => lr.model.score_batch(s.view(*mode)),
            Scorer::Gbm(mode, gbm) => gbm.model.score_batch(s.view(*mode)),
        }
    }
}

fn mode_of(method: Method) -> FeatureMode {
    match method {
        Method::ProbesLr | Method::ProbesGbm => FeatureMode::Whitebox,
        _ => FeatureMode::Blackbox,
    }
}

/// Where a run keeps its artifacts; reports go in the parent directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn artifacts(&self) -> PathBuf {
        self.root.join("artifacts")
    }

    fn artifact(&self, name: &str) -> PathBuf {
        self.artifacts().join(name)
    }

    fn meta_path(&self, method: Method) -> PathBuf {
        self.artifact(&format!("meta_{}.json", method.name()))
    }

    fn ensure(&self) -> Result<()> {
        let dir = self.artifacts();
        fs::create_dir_all(&dir).map_err(|e| Error::io(dir, e))
    }

    pub fn load_base(&self) -> Result<BaseModel> {
        artifact::load(&self.artifact("base.json"), BASE_KIND)
    }

    /// Loads the probe set, checking it was trained on `base`.
    pub fn load_probes(&self, base: &BaseModel) -> Result<ProbeSet> {
        let probes: ProbeSet = artifact::load(&self.artifact("probes.json"), PROBES_KIND)?;
        probes.check_base(base)?;
        Ok(probes)
    }

    pub fn load_scorer(&self, method: Method) -> Result<Scorer> {
        let path = self.meta_path(method);
        Ok(match method {
            Method::Softmax => Scorer::Softmax,
            Method::Temperature => Scorer::Temperature(artifact::load(&path, TEMPERATURE_KIND)?),
            Method::BlackboxLr | Method::ProbesLr => {
                Scorer::Lr(mode_of(method), Box::new(artifact::load(&path, LR_KIND)?))
            }
            Method::BlackboxGbm | Method::ProbesGbm => {
                Scorer::Gbm(mode_of(method), Box::new(artifact::load(&path, GBM_KIND)?))
            }
        })
    }

    fn save_scorer(&self, method: Method, scorer: &Scorer) -> Result<()> {
        let path = self.meta_path(method);
        match scorer {
            Scorer::Softmax => Ok(()),
            Scorer::Temperature(t) => artifact::save(&path, TEMPERATURE_KIND, t),
            Scorer::Lr(_, lr) => artifact::save(&path, LR_KIND, lr.as_ref()),
            Scorer::Gbm(_, g) => artifact::save(&path, GBM_KIND, g.as_ref()),
        }
    }
}

pub fn stage_train_base(cfg: &ExperimentConfig, data: &Partitions, dir: &RunDir) -> Result<BaseModel> {
    let arch = cfg.arch(data.train_base.num_classes());
    let model = train_base(&data.train_base, &arch, &cfg.base_train_config())?;
    dir.ensure()?;
    artifact::save(&dir.artifact("base.json"), BASE_KIND, &model)?;
    Ok(model)
}

pub fn stage_train_probes(cfg: &ExperimentConfig, data: &Partitions, base: &BaseModel, dir: &RunDir) -> Result<ProbeSet> {
    let probes = train_probes(base, &data.train_meta, &cfg.probe_train_config())?;
    dir.ensure()?;
    artifact::save(&dir.artifact("probes.json"), PROBES_KIND, &probes)?;
    Ok(probes)
}

/// Trains every configured meta-model on train-meta. LR strengths and the
/// temperature are chosen on dev.
pub fn stage_train_meta(
    cfg: &ExperimentConfig,
    data: &Partitions,
    base: &BaseModel,
    probes: &ProbeSet,
    dir: &RunDir,
) -> Result<Vec<(Method, Scorer)>> {
    probes.check_base(base)?;
    let train_labels = meta_labels(base, &data.train_meta)?;
    train_labels.require_both_classes()?;
    let dev_labels = meta_labels(base, &data.dev)?;
    let train = Scoring::compute(cfg, base, probes, data.train_meta.features())?;
    let dev = Scoring::compute(cfg, base, probes, data.dev.features())?;
    dir.ensure()?;
    let mut out = Vec::new();
    for &method in &cfg.meta.methods {
        let mode = mode_of(method);
        let scorer = match method {
            Method::Softmax => Scorer::Softmax,
            Method::Temperature => Scorer::Temperature(fit_temperature(&dev.logits, data.dev.labels())?),
            Method::BlackboxLr | Method::ProbesLr => {
                let lr_cfg = cfg.lr_train_config();
                let dev_set = |m: &LrMeta| -> Result<ScoredSet> {
                    ScoredSet::in_domain(m.score_batch(dev.view(mode))?, dev_labels.as_slice().to_vec())
                };
                let mut best: Option<(f64, LrMeta)> = None;
                let mut candidates = Vec::new();
                for &l2 in &cfg.meta.lr_lambdas {
                    let m = train_lr_meta(train.view(mode), &train_labels, l2, &lr_cfg)?;
                    let dev_auc = roc_auc(&dev_set(&m)?)?;
                    candidates.push(LambdaScore { l2, dev_auc });
                    if best.as_ref().map_or(true, |(a, _)| dev_auc > *a) {
                        best = Some((dev_auc, m));
                    }
                }
                let model = best.expect("at least one lambda").1;
                Scorer::Lr(mode, Box::new(SelectedLr { model, candidates }))
            }
            Method::BlackboxGbm | Method::ProbesGbm => {
                let seed = cfg.stage_seed(&format!("gbm-{}", method.name()));
                let base_params = cfg.meta.gbm;
                let counts = cfg.meta.gbm_search.stage_counts(&base_params);
                let longest = *counts.last().expect("at least one stage count");
                let mut best: Option<(f64, GbmMeta)> = None;
                let mut candidates = Vec::new();
                let grid = cfg.meta.gbm_search.learning_rates(&base_params).into_iter().flat_map(|lr| {
                    cfg.meta.gbm_search.depths(&base_params).into_iter().map(move |d| (lr, d))
                });
                for (learning_rate, max_depth) in grid {
                    let params = GbmParams { learning_rate, max_depth, stages: longest, ..base_params };
                    let full = train_gbm_meta(train.view(mode), &train_labels, &params, seed)?;
                    for &stages in &counts {
                        let m = full.truncated(stages);
                        let scores = m.score_batch(dev.view(mode))?;
                        let dev_auc = roc_auc(&ScoredSet::in_domain(scores, dev_labels.as_slice().to_vec())?)?;
                        candidates.push(GbmScore { learning_rate, max_depth, stages, dev_auc });
                        if best.as_ref().map_or(true, |(a, _)| dev_auc > *a) {
                            best = Some((dev_auc, m));
                        }
                    }
                }
                let model = best.expect("at least one candidate").1;
                Scorer::Gbm(mode, Box::new(SelectedGbm { model, candidates }))
            }
        };
        dir.save_scorer(method, &scorer)?;
        out.push((method, scorer));
    }
    Ok(out)
}

/// Everything persisted by the training stages, loaded back.
pub struct Trained {
    pub base: BaseModel,
    pub probes: ProbeSet,
    pub scorers: Vec<(Method, Scorer)>,
}

impl Trained {
    pub fn load(cfg: &ExperimentConfig, dir: &RunDir) -> Result<Self> {
        let base = dir.load_base()?;
        let probes = dir.load_probes(&base)?;
        let scorers = cfg
            .meta
            .methods
            .iter()
            .map(|&m| dir.load_scorer(m).map(|s| (m, s)))
            .collect::<Result<_>>()?;
        Ok(Trained {
            base,
            probes,
            scorers,
        })
    }
}

pub use report::{write_evaluation, write_importance, write_quadrants};

/// Runs every stage and writes all reports into `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &RunDir) -> Result<Summary> {
    let data = prepare_data(cfg)?;
    let base = stage_train_base(cfg, &data, dir)?;
    let probes = stage_train_probes(cfg, &data, &base, dir)?;
    let scorers = stage_train_meta(cfg, &data, &base, &probes, dir)?;
    let trained = Trained {
        base,
        probes,
        scorers,
    };
    write_importance(&trained, dir)?;
    write_quadrants(cfg, &data, &trained, dir)?;
    write_evaluation(cfg, &data, &trained, dir)
}
