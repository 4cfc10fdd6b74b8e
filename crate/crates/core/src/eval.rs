//! Filtering metrics over "base model correct" as the positive class: ROC/AUC,
//! precision-recall, threshold sweeps, residual precision after rejection and
//! confusion quadrants. A sample is accepted when its score is `>= threshold`.

use serde::{Deserialize, Serialize};

use crate::data::Origin;
use crate::error::{Error, Result};

/// Confidence scores with their correctness labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    scores: Vec<f64>,
    labels: Vec<bool>,
    origin: Vec<Origin>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>, origin: Vec<Origin>) -> Result<Self> {
        if scores.len() != labels.len() || scores.len() != origin.len() {
            return Err(Error::invalid(format!(
                "{} scores, {} labels, {} origin flags",
                scores.len(),
                labels.len(),
                origin.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("non-finite confidence score"));
        }
        Ok(ScoredSet {
            scores,
            labels,
            origin,
        })
    }

    /// All samples flagged in-domain.
    pub fn in_domain(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        let n = labels.len();
        ScoredSet::new(scores, labels, vec![Origin::InDomain; n])
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn origin(&self) -> &[Origin] {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    fn positives(&self) -> usize {
        self.labels.iter().filter(|&&b| b).count()
    }

    /// Indices by descending score, ascending index among ties.
    fn descending(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        idx
    }

    /// `(threshold, tp, fp)` after accepting each distinct score, highest first.
    fn cumulative_counts(&self) -> Vec<(f64, usize, usize)> {
        let order = self.descending();
        let mut out = Vec::new();
        let (mut tp, mut fp) = (0, 0);
        let mut i = 0;
        while i < order.len() {
            let t = self.scores[order[i]];
            while i < order.len() && self.scores[order[i]] == t {
                if self.labels[order[i]] {
                    tp += 1;
                } else {
                    fp += 1;
                }
                i += 1;
            }
            out.push((t, tp, fp));
        }
        out
    }

    fn counts_at(&self, threshold: f64) -> (usize, usize) {
        self.scores
            .iter()
            .zip(&self.labels)
            .filter(|(&s, _)| s >= threshold)
            .fold((0, 0), |(tp, fp), (_, &y)| if y { (tp + 1, fp) } else { (tp, fp + 1) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Operating points from `(0, 0)` (threshold `+inf`) to `(1, 1)`, one per distinct score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

pub fn roc_curve(set: &ScoredSet) -> Result<RocCurve> {
    let p = set.positives();
    let n = set.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::DegenerateLabels(format!(
            "ROC needs both classes ({p} positives, {n} negatives)"
        )));
    }
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    points.extend(set.cumulative_counts().into_iter().map(|(t, tp, fp)| RocPoint {
        threshold: t,
        fpr: fp as f64 / n as f64,
        tpr: tp as f64 / p as f64,
    }));
    Ok(RocCurve { points })
}

/// Trapezoidal area under the ROC curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

/// ROC AUC of a scored set in one call.
pub fn roc_auc(set: &ScoredSet) -> Result<f64> {
    roc_curve(set).map(|c| auc(&c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// Highest threshold first; the last point accepts everything.
    pub points: Vec<PrPoint>,
}

pub fn pr_curve(set: &ScoredSet) -> Result<PrCurve> {
    let p = set.positives();
    if p == 0 {
        return Err(Error::DegenerateLabels("PR curve needs at least one positive".into()));
    }
    Ok(PrCurve {
        points: set
            .cumulative_counts()
            .into_iter()
            .map(|(t, tp, fp)| PrPoint {
                threshold: t,
                precision: tp as f64 / (tp + fp) as f64,
                recall: tp as f64 / p as f64,
            })
            .collect(),
    })
}

/// Precision and recall at one threshold; `None` where the ratio is undefined
/// (nothing accepted, or no positives).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Operating {
    pub accepted: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

pub fn operating_point(set: &ScoredSet, threshold: f64) -> Operating {
    let (tp, fp) = set.counts_at(threshold);
    let p = set.positives();
    Operating {
        accepted: tp + fp,
        precision: (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64),
        recall: (p > 0).then(|| tp as f64 / p as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub in_domain: Operating,
    pub pooled: Option<Operating>,
}

/// In-domain and pooled precision/recall at each threshold.
pub fn threshold_sweep(in_domain: &ScoredSet, pooled: Option<&ScoredSet>, thresholds: &[f64]) -> Vec<SweepRow> {
    thresholds
        .iter()
        .map(|&t| SweepRow {
            threshold: t,
            in_domain: operating_point(in_domain, t),
            pooled: pooled.map(|p| operating_point(p, t)),
        })
        .collect()
}

/// Accuracy of the samples left after dropping the `floor(fraction * N)` lowest
/// scores (ties dropped in ascending index order).
pub fn residual_precision_at_rejection(set: &ScoredSet, fraction: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid(format!(
            "rejection fraction must be in [0, 1], got {fraction}"
        )));
    }
    let drop = crate::data::floor_count(fraction, set.len());
    if drop >= set.len() {
        return Err(Error::invalid("rejection leaves no samples"));
    }
    let mut idx: Vec<usize> = (0..set.len()).collect();
    idx.sort_by(|&a, &b| set.scores[a].total_cmp(&set.scores[b]));
    let kept = &idx[drop..];
    let correct = kept.iter().filter(|&&i| set.labels[i]).count();
    Ok(correct as f64 / kept.len() as f64)
}

/// Index sets of accepted-correct (TP), accepted-incorrect (FP),
/// rejected-incorrect (TN) and rejected-correct (FN) samples.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quadrants {
    pub tp: Vec<usize>,
    pub fp: Vec<usize>,
    pub tn: Vec<usize>,
    pub fn_: Vec<usize>,
}

pub fn confusion_quadrants(set: &ScoredSet, threshold: f64) -> Quadrants {
    let mut q = Quadrants::default();
    for (i, (&s, &y)) in set.scores.iter().zip(&set.labels).enumerate() {
        match (s >= threshold, y) {
            (true, true) => q.tp.push(i),
            (true, false) => q.fp.push(i),
            (false, false) => q.tn.push(i),
            (false, true) => q.fn_.push(i),
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(scores: &[f64], labels: &[u8]) -> ScoredSet {
        ScoredSet::in_domain(scores.to_vec(), labels.iter().map(|&l| l == 1).collect()).unwrap()
    }

    fn has_point(c: &RocCurve, fpr: f64, tpr: f64) -> bool {
        c.points.iter().any(|p| p.fpr == fpr && p.tpr == tpr)
    }

    #[test]
    fn roc_examples() {
        let c = roc_curve(&set(&[0.9, 0.8, 0.4, 0.3], &[1, 1, 0, 0])).unwrap();
        assert!(has_point(&c, 0.0, 1.0));
        assert_eq!(auc(&c), 1.0);

        let c = roc_curve(&set(&[0.5; 4], &[1, 0, 1, 0])).unwrap();
        assert_eq!(c.points.len(), 2);
        assert_eq!((c.points[0].fpr, c.points[0].tpr), (0.0, 0.0));
        assert_eq!((c.points[1].fpr, c.points[1].tpr), (1.0, 1.0));
        assert_eq!(auc(&c), 0.5);

        let c = roc_curve(&set(&[0.1, 0.2, 0.8, 0.9], &[1, 1, 0, 0])).unwrap();
        assert!(has_point(&c, 1.0, 0.0));
        assert_eq!(auc(&c), 0.0);
    }

    #[test]
    fn auc_hand_case() {
        // Pairs (pos, neg): (0.2, 0.9) wrong, (0.2, 0.1) right, (0.8, 0.9) wrong, (0.8, 0.1) right.
        let c = roc_curve(&set(&[0.2, 0.9, 0.8, 0.1], &[1, 0, 1, 0])).unwrap();
        assert!((auc(&c) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn roc_is_monotone() {
        let c = roc_curve(&set(&[0.3, 0.3, 0.7, 0.1, 0.9, 0.7], &[1, 0, 1, 0, 0, 1])).unwrap();
        for w in c.points.windows(2) {
            assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
        let last = c.points.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
    }

    #[test]
    fn degenerate_roc_and_pr() {
        assert!(matches!(roc_curve(&set(&[0.1, 0.2], &[1, 1])), Err(Error::DegenerateLabels(_))));
        assert!(matches!(pr_curve(&set(&[0.1, 0.2], &[0, 0])), Err(Error::DegenerateLabels(_))));
    }

    #[test]
    fn pr_examples() {
        let c = pr_curve(&set(&[0.9, 0.8, 0.4, 0.3], &[1, 1, 0, 0])).unwrap();
        for p in c.points.iter().filter(|p| p.recall <= 1.0 && p.threshold >= 0.8) {
            assert_eq!(p.precision, 1.0);
        }
        let all = c.points.last().unwrap();
        assert_eq!((all.recall, all.precision), (1.0, 0.5));

        let s = set(&[0.9, 0.6, 0.4], &[1, 0, 1]);
        let op = operating_point(&s, 0.5);
        assert_eq!((op.precision, op.recall), (Some(0.5), Some(0.5)));
        let c = pr_curve(&s).unwrap();
        let at = c.points.iter().find(|p| p.threshold == 0.6).unwrap();
        assert_eq!((at.precision, at.recall), (0.5, 0.5));
    }

    #[test]
    fn sweep_examples() {
        let s = set(&[0.9, 0.6, 0.4], &[1, 0, 1]);
        let rows = threshold_sweep(&s, Some(&s), &[0.0, 0.5, 0.95]);
        assert_eq!(rows[0].in_domain.recall, Some(1.0));
        assert_eq!(rows[0].pooled.unwrap().recall, Some(1.0));
        assert_eq!(rows[0].in_domain.precision, Some(2.0 / 3.0));
        assert_eq!(rows[1].in_domain.precision, Some(0.5));
        assert_eq!(rows[1].in_domain.recall, Some(0.5));
        assert_eq!(rows[2].in_domain.accepted, 0);
        assert_eq!(rows[2].in_domain.precision, None);
        let at_min = threshold_sweep(&s, None, &[0.4]);
        assert_eq!(at_min[0].in_domain.precision, Some(2.0 / 3.0));
        assert!(at_min[0].pooled.is_none());
    }

    #[test]
    fn residual_precision_examples() {
        let s = set(&[0.1, 0.2, 0.9, 0.8], &[0, 0, 1, 1]);
        assert_eq!(residual_precision_at_rejection(&s, 0.0).unwrap(), 0.5);
        assert_eq!(residual_precision_at_rejection(&s, 0.5).unwrap(), 1.0);
        assert!(residual_precision_at_rejection(&s, 1.0).is_err());
        assert!(residual_precision_at_rejection(&s, 1.5).is_err());

        let mut prev = 0.0;
        for f in [0.0, 0.1, 0.25, 0.4, 0.5] {
            let r = residual_precision_at_rejection(&s, f).unwrap();
            assert!(r >= prev);
            prev = r;
        }
    }

    #[test]
    fn rejection_ties_drop_lower_index_first() {
        let s = set(&[0.5, 0.5, 0.9], &[0, 1, 1]);
        assert_eq!(residual_precision_at_rejection(&s, 0.34).unwrap(), 1.0);
        let s = set(&[0.5, 0.5, 0.9], &[1, 0, 1]);
        assert_eq!(residual_precision_at_rejection(&s, 0.34).unwrap(), 0.5);
    }

    #[test]
    fn quadrant_examples() {
        let s = set(&[0.9, 0.6, 0.4, 0.1], &[1, 0, 1, 0]);
        let q = confusion_quadrants(&s, 0.0);
        assert_eq!(q.tp.len() + q.fp.len(), 4);
        let q = confusion_quadrants(&s, 2.0);
        assert_eq!(q.tn.len() + q.fn_.len(), 4);
        let q = confusion_quadrants(&s, 0.5);
        assert_eq!(q, Quadrants { tp: vec![0], fp: vec![1], tn: vec![3], fn_: vec![2] });
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(ScoredSet::in_domain(vec![0.1], vec![]).is_err());
        assert!(ScoredSet::in_domain(vec![f64::NAN], vec![true]).is_err());
    }
}
