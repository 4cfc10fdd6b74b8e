//! Gradient boosting on logistic loss with depth-limited regression trees.
//!
//! Stage `m` fits a squared-error tree to the residuals `y - p` on a seeded
//! subsample; each leaf then takes the single Newton step
//! `sum(y - p) / sum(p (1 - p))` over its samples, and the ensemble adds
//! `learning_rate * leaf` to the raw score.

use serde::{Deserialize, Serialize};

use super::{FeatureLayout, FeatureMode, MetaFeatures, MetaLabels};
use crate::error::{Error, Result};
use crate::numeric::{sigmoid, Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmParams {
    pub learning_rate: f64,
    pub stages: usize,
    pub max_depth: usize,
    /// Fraction of samples drawn (without replacement) to fit each tree.
    pub subsample: f64,
    pub min_samples_leaf: usize,
}

impl Default for GbmParams {
    fn default() -> Self {
        GbmParams {
            learning_rate: 0.1,
            stages: 200,
            max_depth: 3,
            subsample: 0.8,
            min_samples_leaf: 5,
        }
    }
}

impl GbmParams {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("GBM learning_rate must be positive"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::invalid("GBM subsample must be in (0, 1]"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("GBM min_samples_leaf must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Squared-error reduction achieved by this split.
        gain: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmMeta {
    /// Log-odds of the training positive rate.
    pub init_score: f64,
    pub trees: Vec<Tree>,
    pub params: GbmParams,
    pub seed: u64,
    pub num_features: usize,
    pub layout: Option<FeatureLayout>,
    /// Training log-loss before any stage, then after each stage.
    pub train_loss: Vec<f64>,
}

/// Feature importance, reshaped to (probe layer x rank position) when the layout allows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Importance {
    Grid {
        layers: usize,
        classes: usize,
        values: Vec<f64>,
    },
    Flat(Vec<f64>),
}

impl Importance {
    pub fn values(&self) -> &[f64] {
        match self {
            Importance::Grid { values, .. } | Importance::Flat(values) => values,
        }
    }
}

impl GbmMeta {
    /// Raw additive score `F0 + ν Σ tree(x)`.
    pub fn raw_score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.num_features {
            return Err(Error::invalid(format!(
                "GBM meta-model expects {} features, got {}",
                self.num_features,
                x.len()
            )));
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok(self.init_score + self.params.learning_rate * sum)
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.raw_score(x).map(sigmoid)
    }

    pub fn score_batch(&self, features: &MetaFeatures) -> Result<Vec<f64>> {
        features.matrix().iter_rows().map(|r| self.score(r)).collect()
    }

    /// The first `stages` trees. Stage draws are sequential, so this equals a model
    /// trained with `stages` from the same seed.
    pub fn truncated(&self, stages: usize) -> GbmMeta {
        let m = stages.min(self.trees.len());
        GbmMeta {
            init_score: self.init_score,
            trees: self.trees[..m].to_vec(),
            params: GbmParams { stages: m, ..self.params },
            seed: self.seed,
            num_features: self.num_features,
            layout: self.layout,
            train_loss: self.train_loss[..=m].to_vec(),
        }
    }

    /// Total squared-error reduction per feature across all splits, normalised to sum 1
    /// (all zeros when the ensemble never splits).
    pub fn feature_importance(&self) -> Importance {
        let mut imp = vec![0.0; self.num_features];
        for tree in &self.trees {
            for node in &tree.nodes {
                if let Node::Split { feature, gain, .. } = node {
                    imp[*feature] += gain;
                }
            }
        }
        let total: f64 = imp.iter().sum();
        if total > 0.0 {
            imp.iter_mut().for_each(|v| *v /= total);
        }
        match self.layout {
            Some(l) if l.mode == FeatureMode::Whitebox && l.width() == self.num_features => {
                Importance::Grid {
                    layers: l.blocks,
                    classes: l.num_classes,
                    values: imp,
                }
            }
            _ => Importance::Flat(imp),
        }
    }
}

fn log_loss(raw: &[f64], y: &[f64]) -> f64 {
    raw.iter()
        .zip(y)
        .map(|(&s, &t)| {
            let sp = if s > 0.0 {
                s + (-s).exp().ln_1p()
            } else {
                s.exp().ln_1p()
            };
            sp - t * s
        })
        .sum::<f64>()
        / raw.len() as f64
}

pub fn train_gbm_meta(
    features: &MetaFeatures,
    labels: &MetaLabels,
    params: &GbmParams,
    seed: u64,
) -> Result<GbmMeta> {
    if features.len() != labels.len() {
        return Err(Error::invalid("feature and label counts differ"));
    }
    labels.require_both_classes()?;
    let mut meta = fit(features.matrix(), labels.as_slice(), params, seed)?;
    meta.layout = Some(features.layout());
    Ok(meta)
}

fn fit(x: &Matrix, labels: &[bool], params: &GbmParams, seed: u64) -> Result<GbmMeta> {
    params.validate()?;
    let n = x.rows();
    let y: Vec<f64> = labels.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let rate = y.iter().sum::<f64>() / n as f64;
    let init_score = (rate / (1.0 - rate)).ln();

    let sorted: Vec<Vec<usize>> = (0..x.cols())
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
            idx
        })
        .collect();

    let mut raw = vec![init_score; n];
    let mut history = vec![log_loss(&raw, &y)];
    let mut rng = Rng::new(seed);
    let sample_n = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let mut trees = Vec::with_capacity(params.stages);
    for _ in 0..params.stages {
        let p: Vec<f64> = raw.iter().map(|&s| sigmoid(s)).collect();
        let residual: Vec<f64> = y.iter().zip(&p).map(|(t, q)| t - q).collect();
        let hessian: Vec<f64> = p.iter().map(|q| q * (1.0 - q)).collect();
        let rows = if sample_n == n {
            (0..n).collect()
        } else {
            let mut r = rng.sample_without_replacement(n, sample_n);
            r.sort_unstable();
            r
        };
        let tree = TreeBuilder {
            x,
            sorted: &sorted,
            residual: &residual,
            hessian: &hessian,
            params,
        }
        .build(rows);
        for (i, s) in raw.iter_mut().enumerate() {
            *s += params.learning_rate * tree.predict(x.row(i));
        }
        history.push(log_loss(&raw, &y));
        trees.push(tree);
    }
    Ok(GbmMeta {
        init_score,
        trees,
        params: *params,
        seed,
        num_features: x.cols(),
        layout: None,
        train_loss: history,
    })
}

const NO_NODE: usize = usize::MAX;

#[derive(Clone, Copy)]
struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct TreeBuilder<'a> {
    x: &'a Matrix,
    sorted: &'a [Vec<usize>],
    residual: &'a [f64],
    hessian: &'a [f64],
    params: &'a GbmParams,
}

impl TreeBuilder<'_> {
    /// Level-wise exact greedy growth. Every level scans each feature's global sort
    /// order once, so the chosen split is the first best (lowest feature, lowest
    /// threshold) under a strict gain comparison.
    fn build(&self, rows: Vec<usize>) -> Tree {
        let n = self.x.rows();
        let min_leaf = self.params.min_samples_leaf;
        let mut node_of = vec![NO_NODE; n];
        for &r in &rows {
            node_of[r] = 0;
        }
        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let mut members: Vec<Vec<usize>> = vec![rows];
        let mut frontier = vec![0usize];

        for _ in 0..self.params.max_depth {
            let splittable: Vec<usize> = frontier
                .iter()
                .copied()
                .filter(|&id| members[id].len() >= 2 * min_leaf)
                .collect();
            if splittable.is_empty() {
                break;
            }
            let mut slot = vec![NO_NODE; nodes.len()];
            for (s, &id) in splittable.iter().enumerate() {
                slot[id] = s;
            }
            let totals: Vec<(usize, f64)> = splittable
                .iter()
                .map(|&id| {
                    let m = &members[id];
                    (m.len(), m.iter().map(|&r| self.residual[r]).sum())
                })
                .collect();
            let mut best: Vec<Option<BestSplit>> = vec![None; splittable.len()];

            let mut left_n = vec![0usize; splittable.len()];
            let mut left_sum = vec![0.0f64; splittable.len()];
            let mut last: Vec<Option<f64>> = vec![None; splittable.len()];
            for (f, order) in self.sorted.iter().enumerate() {
                left_n.fill(0);
                left_sum.fill(0.0);
                last.fill(None);
                for &r in order {
                    let id = node_of[r];
                    if id == NO_NODE || slot[id] == NO_NODE {
                        continue;
                    }
                    let s = slot[id];
                    let v = self.x.get(r, f);
                    if let Some(prev) = last[s] {
                        if v > prev {
                            let (tn, tsum) = totals[s];
                            let (ln, lsum) = (left_n[s], left_sum[s]);
                            let rn = tn - ln;
                            if ln >= min_leaf && rn >= min_leaf {
                                let rsum = tsum - lsum;
                                let gain = lsum * lsum / ln as f64 + rsum * rsum / rn as f64
                                    - tsum * tsum / tn as f64;
                                if gain > 0.0 && best[s].map_or(true, |b| gain > b.gain) {
                                    let mid = 0.5 * (prev + v);
                                    let threshold = if mid < v { mid } else { prev };
                                    best[s] = Some(BestSplit {
                                        gain,
                                        feature: f,
                                        threshold,
                                    });
                                }
                            }
                        }
                    }
                    left_n[s] += 1;
                    left_sum[s] += self.residual[r];
                    last[s] = Some(v);
                }
            }

            let mut next = Vec::new();
            for (s, &id) in splittable.iter().enumerate() {
                let Some(b) = best[s] else { continue };
                let left = nodes.len();
                let right = left + 1;
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                let (l_rows, r_rows): (Vec<usize>, Vec<usize>) = members[id]
                    .iter()
                    .partition(|&&r| self.x.get(r, b.feature) <= b.threshold);
                for &r in &l_rows {
                    node_of[r] = left;
                }
                for &r in &r_rows {
                    node_of[r] = right;
                }
                members[id].clear();
                members.push(l_rows);
                members.push(r_rows);
                nodes[id] = Node::Split {
                    feature: b.feature,
                    threshold: b.threshold,
                    left,
                    right,
                    gain: b.gain,
                };
                next.push(left);
                next.push(right);
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }

        for (id, node) in nodes.iter_mut().enumerate() {
            if let Node::Leaf { value } = node {
                let m = &members[id];
                let num: f64 = m.iter().map(|&r| self.residual[r]).sum();
                let den: f64 = m.iter().map(|&r| self.hessian[r]).sum();
                *value = if den.abs() < 1e-150 { 0.0 } else { num / den };
            }
        }
        Tree { nodes }
    }
}
