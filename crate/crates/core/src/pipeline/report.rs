//! CSV and JSON reports written by the evaluation stages.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Condition, ExperimentConfig, Method, Partitions, RunDir, Scorer, Scoring, Trained};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{
    confusion_quadrants, pr_curve, residual_precision_at_rejection, roc_auc, roc_curve,
    threshold_sweep, Operating, ScoredSet,
};
use crate::meta::{meta_labels, Importance};
use crate::numeric::argmax;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sizes {
    pub train_base: usize,
    pub train_meta: usize,
    pub dev: usize,
    pub test: usize,
    pub ood: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlippedLabels {
    pub train_base: usize,
    pub train_meta: usize,
    pub dev: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseAccuracy {
    pub train_base: f64,
    pub train_meta: f64,
    pub dev: f64,
    pub test: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeAccuracy {
    pub layer: usize,
    pub width: usize,
    pub train_meta: f64,
    pub test: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectionPoint {
    pub fraction: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadrantCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub in_domain_auc: f64,
    pub pooled_auc: Option<f64>,
    pub dev_auc: Option<f64>,
    pub lr_l2: Option<f64>,
    pub gbm_max_depth: Option<usize>,
    pub gbm_stages: Option<usize>,
    pub temperature: Option<f64>,
    pub residual_precision: Vec<RejectionPoint>,
    pub quadrants: QuadrantCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceSummary {
    pub method: Method,
    /// Importance mass per probe layer (whitebox models only).
    pub per_layer: Vec<f64>,
    /// Share of importance on all layers but the last (whitebox models only).
    pub non_final_share: Option<f64>,
}

/// The run summary written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub condition: Condition,
    pub sizes: Sizes,
    pub flipped_labels: FlippedLabels,
    pub base_accuracy: BaseAccuracy,
    pub base_train_loss: Vec<f64>,
    pub probe_accuracy: Vec<ProbeAccuracy>,
    pub methods: Vec<MethodSummary>,
    pub importance: Vec<ImportanceSummary>,
}

impl Summary {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }

    pub fn importance_of(&self, m: Method) -> Option<&ImportanceSummary> {
        self.importance.iter().find(|s| s.method == m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::IncompatibleArtifact {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

fn write_file(dir: &RunDir, name: &str, body: &str) -> Result<()> {
    let root = dir.root();
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let path = root.join(name);
    fs::write(&path, body).map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Correctness-labelled scores for the in-domain test set and (if present) the pool.
struct Tasks {
    in_domain: ScoredSet,
    pooled: Option<ScoredSet>,
}

fn scored(scorer: &Scorer, scoring: &Scoring, trained: &Trained, data: &Dataset) -> Result<ScoredSet> {
    let labels = meta_labels(&trained.base, data)?;
    ScoredSet::new(scorer.score(scoring)?, labels.as_slice().to_vec(), data.origin().to_vec())
}

struct Views {
    test: Scoring,
    pooled: Option<(Dataset, Scoring)>,
}

fn views(cfg: &ExperimentConfig, data: &Partitions, trained: &Trained) -> Result<Views> {
    let test = Scoring::compute(cfg, &trained.base, &trained.probes, data.test.features())?;
    let pooled = match data.pooled()? {
        Some(p) => {
            let s = Scoring::compute(cfg, &trained.base, &trained.probes, p.features())?;
            Some((p, s))
        }
        None => None,
    };
    Ok(Views { test, pooled })
}

fn tasks(scorer: &Scorer, v: &Views, data: &Partitions, trained: &Trained) -> Result<Tasks> {
    Ok(Tasks {
        in_domain: scored(scorer, &v.test, trained, &data.test)?,
        pooled: v
            .pooled
            .as_ref()
            .map(|(p, s)| scored(scorer, s, trained, p))
            .transpose()?,
    })
}

/// Writes ROC, PR and sweep CSVs plus `probe_acc.csv` and `summary.json`.
pub fn write_evaluation(cfg: &ExperimentConfig, data: &Partitions, trained: &Trained, dir: &RunDir) -> Result<Summary> {
    let base = &trained.base;
    let v = views(cfg, data, trained)?;
    let dev_scoring = Scoring::compute(cfg, base, &trained.probes, data.dev.features())?;
    let mut methods = Vec::new();
    for (method, scorer) in &trained.scorers {
        let t = tasks(scorer, &v, data, trained)?;
        let name = method.name();
        for (task, set) in [("in_domain", Some(&t.in_domain)), ("pooled", t.pooled.as_ref())] {
            let Some(set) = set else { continue };
            let mut roc = String::from("threshold,fpr,tpr\n");
            for p in roc_curve(set)?.points {
                writeln!(roc, "{},{},{}", p.threshold, p.fpr, p.tpr).unwrap();
            }
            write_file(dir, &format!("roc_{name}_{task}.csv"), &roc)?;
            let mut pr = String::from("threshold,precision,recall\n");
            for p in pr_curve(set)?.points {
                writeln!(pr, "{},{},{}", p.threshold, p.precision, p.recall).unwrap();
            }
            write_file(dir, &format!("pr_{name}_{task}.csv"), &pr)?;
        }
        let mut sweep = String::from(
            "threshold,in_accepted,in_precision,in_recall,pooled_accepted,pooled_precision,pooled_recall\n",
        );
        let cells = |o: Option<Operating>| match o {
            Some(o) => format!("{},{},{}", o.accepted, opt(o.precision), opt(o.recall)),
            None => ",,".to_string(),
        };
        for row in threshold_sweep(&t.in_domain, t.pooled.as_ref(), &cfg.meta.sweep_thresholds) {
            writeln!(sweep, "{},{},{}", row.threshold, cells(Some(row.in_domain)), cells(row.pooled)).unwrap();
        }
        write_file(dir, &format!("sweep_{name}.csv"), &sweep)?;

        let dev_set = scored(scorer, &dev_scoring, trained, &data.dev)?;
        let q = confusion_quadrants(&t.in_domain, cfg.meta.quadrant_threshold);
        methods.push(MethodSummary {
            method: *method,
            in_domain_auc: roc_auc(&t.in_domain)?,
            pooled_auc: t.pooled.as_ref().map(roc_auc).transpose()?,
            dev_auc: roc_auc(&dev_set).ok(),
            lr_l2: match scorer {
                Scorer::Lr(_, lr) => Some(lr.model.l2),
                _ => None,
            },
            gbm_max_depth: match scorer {
                Scorer::Gbm(_, g) => Some(g.model.params.max_depth),
                _ => None,
            },
            gbm_stages: match scorer {
                Scorer::Gbm(_, g) => Some(g.model.params.stages),
                _ => None,
            },
            temperature: match scorer {
                Scorer::Temperature(ts) => Some(ts.temperature),
                _ => None,
            },
            residual_precision: cfg
                .meta
                .rejection_fractions
                .iter()
                .map(|&f| {
                    residual_precision_at_rejection(&t.in_domain, f)
                        .map(|precision| RejectionPoint { fraction: f, precision })
                })
                .collect::<Result<_>>()?,
            quadrants: QuadrantCounts {
                tp: q.tp.len(),
                fp: q.fp.len(),
                tn: q.tn.len(),
                fn_: q.fn_.len(),
            },
        });
    }

    let train_meta_acc = trained.probes.accuracy_report(base, &data.train_meta)?;
    let test_acc = trained.probes.accuracy_report(base, &data.test)?;
    let widths = base.layer_widths();
    let probe_accuracy: Vec<ProbeAccuracy> = (0..trained.probes.len())
        .map(|i| ProbeAccuracy {
            layer: i + 1,
            width: widths[i],
            train_meta: train_meta_acc[i],
            test: test_acc[i],
        })
        .collect();
    let mut csv = String::from("layer,width,train_meta_accuracy,test_accuracy\n");
    for p in &probe_accuracy {
        writeln!(csv, "{},{},{},{}", p.layer, p.width, p.train_meta, p.test).unwrap();
    }
    write_file(dir, "probe_acc.csv", &csv)?;

    let summary = Summary {
        seed: cfg.seed,
        condition: cfg.condition,
        sizes: Sizes {
            train_base: data.train_base.len(),
            train_meta: data.train_meta.len(),
            dev: data.dev.len(),
            test: data.test.len(),
            ood: data.ood.as_ref().map_or(0, Dataset::len),
        },
        flipped_labels: FlippedLabels {
            train_base: data.flipped[0],
            train_meta: data.flipped[1],
            dev: data.flipped[2],
        },
        base_accuracy: BaseAccuracy {
            train_base: base.accuracy(&data.train_base)?,
            train_meta: base.accuracy(&data.train_meta)?,
            dev: base.accuracy(&data.dev)?,
            test: base.accuracy(&data.test)?,
        },
        base_train_loss: base.train_loss().to_vec(),
        probe_accuracy,
        methods,
        importance: importance_summaries(trained),
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serialises");
    write_file(dir, "summary.json", &(json + "\n"))?;
    Ok(summary)
}

fn importance_summaries(trained: &Trained) -> Vec<ImportanceSummary> {
    trained
        .scorers
        .iter()
        .filter_map(|(m, s)| match s {
            Scorer::Gbm(_, g) => Some((*m, g.model.feature_importance())),
            _ => None,
        })
        .map(|(method, imp)| match imp {
            Importance::Grid { layers, classes, values } => {
                let per_layer: Vec<f64> = values.chunks(classes).map(|c| c.iter().sum()).collect();
                let non_final = per_layer[..layers - 1].iter().sum();
                ImportanceSummary {
                    method,
                    per_layer,
                    non_final_share: Some(non_final),
                }
            }
            Importance::Flat(_) => ImportanceSummary {
                method,
                per_layer: Vec::new(),
                non_final_share: None,
            },
        })
        .collect()
}

/// Writes `importance_<method>.csv` for every GBM meta-model.
pub fn write_importance(trained: &Trained, dir: &RunDir) -> Result<Vec<ImportanceSummary>> {
    for (method, scorer) in &trained.scorers {
        let Scorer::Gbm(_, g) = scorer else { continue };
        let mut csv = String::new();
        match g.model.feature_importance() {
            Importance::Grid { classes, values, .. } => {
                csv.push_str("layer,rank,importance\n");
                for (i, v) in values.iter().enumerate() {
                    writeln!(csv, "{},{},{}", i / classes + 1, i % classes + 1, v).unwrap();
                }
            }
            Importance::Flat(values) => {
                csv.push_str("feature,importance\n");
                for (i, v) in values.iter().enumerate() {
                    writeln!(csv, "{i},{v}").unwrap();
                }
            }
        }
        write_file(dir, &format!("importance_{}.csv", method.name()), &csv)?;
    }
    Ok(importance_summaries(trained))
}

/// Writes `quadrants_<method>.csv`: every test (and pooled) sample with its quadrant
/// at the configured threshold.
pub fn write_quadrants(cfg: &ExperimentConfig, data: &Partitions, trained: &Trained, dir: &RunDir) -> Result<()> {
    let v = views(cfg, data, trained)?;
    for (method, scorer) in &trained.scorers {
        let t = tasks(scorer, &v, data, trained)?;
        let mut csv = String::from("task,index,sample_id,label,predicted,score,quadrant\n");
        let sets = [
            ("in_domain", Some((&t.in_domain, &v.test, &data.test))),
            (
                "pooled",
                t.pooled.as_ref().zip(v.pooled.as_ref()).map(|(s, (p, sc))| (s, sc, p)),
            ),
        ];
        for (task, entry) in sets {
            let Some((set, scoring, ds)) = entry else { continue };
            let q = confusion_quadrants(set, cfg.meta.quadrant_threshold);
            let mut tag = vec![""; set.len()];
            for (name, idx) in [("TP", &q.tp), ("FP", &q.fp), ("TN", &q.tn), ("FN", &q.fn_)] {
                for &i in idx {
                    tag[i] = name;
                }
            }
            let predicted: Vec<usize> = scoring.probs.iter_rows().map(argmax).collect();
            for i in 0..set.len() {
                writeln!(
                    csv,
                    "{task},{i},{},{},{},{},{}",
                    ds.ids()[i],
                    ds.labels()[i],
                    predicted[i],
                    set.scores()[i],
                    tag[i]
                )
                .unwrap();
            }
        }
        write_file(dir, &format!("quadrants_{}.csv", method.name()), &csv)?;
    }
    Ok(())
}
