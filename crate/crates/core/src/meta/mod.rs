//! Meta-models that predict whether the base model's prediction is correct.
//!
//! Inputs are probe outputs (whitebox) or the final probability vector alone
//! (blackbox). Every k-block of a feature row is permuted by the descending rank
//! order of the final block, so position 1 always refers to the top-scoring class.

mod gbm;
mod lr;
mod temperature;

pub use gbm::{train_gbm_meta, GbmMeta, GbmParams, Importance, Node, Tree};
pub use lr::{lr_objective, train_lr_meta, LrMeta};
pub use temperature::{fit_temperature, temperature_nll, TemperatureScaler};

use serde::{Deserialize, Serialize};

use crate::base_model::BaseModel;
use crate::data::{Dataset, Origin};
use crate::error::{Error, Result};
use crate::numeric::{rank_order_desc, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// Every probe output, `n * k` columns.
    Whitebox,
    /// Final output only, `k` columns.
    Blackbox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureBasis {
    #[default]
    Probability,
    /// Log-probabilities, i.e. logits normalised by their log-sum-exp.
    Logit,
}

/// Shape and meaning of a meta-feature row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub mode: FeatureMode,
    pub basis: FeatureBasis,
    /// Number of k-blocks per row.
    pub blocks: usize,
    pub num_classes: usize,
}

impl FeatureLayout {
    pub fn width(&self) -> usize {
        self.blocks * self.num_classes
    }
}

/// Feature table for a meta-model, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaFeatures {
    matrix: Matrix,
    layout: FeatureLayout,
}

impl MetaFeatures {
    pub fn new(matrix: Matrix, layout: FeatureLayout) -> Result<Self> {
        if matrix.cols() != layout.width() {
            return Err(Error::invalid(format!(
                "{} columns for a layout of width {}",
                matrix.cols(),
                layout.width()
            )));
        }
        Ok(MetaFeatures { matrix, layout })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn layout(&self) -> FeatureLayout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.rows() == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }
}

fn basis_value(p: f64, basis: FeatureBasis) -> f64 {
    match basis {
        FeatureBasis::Probability => p,
        FeatureBasis::Logit => p.max(f64::MIN_POSITIVE).ln(),
    }
}

/// Builds one feature row from `ŷ_1 .. ŷ_n`. The permutation is the descending rank
/// order of the last vector; whitebox keeps every block, blackbox only the last.
pub fn assemble_features<V: AsRef<[f64]>>(
    outputs: &[V],
    mode: FeatureMode,
    basis: FeatureBasis,
) -> Result<Vec<f64>> {
    let last = outputs
        .last()
        .ok_or_else(|| Error::invalid("no probe outputs to assemble"))?
        .as_ref();
    let k = last.len();
    if let Some(i) = outputs.iter().position(|o| o.as_ref().len() != k) {
        return Err(Error::invalid(format!(
            "probe output {} has {} classes, final has {k}",
            i + 1,
            outputs[i].as_ref().len()
        )));
    }
    let order = rank_order_desc(last)?;
    let blocks: &[V] = match mode {
        FeatureMode::Whitebox => outputs,
        FeatureMode::Blackbox => &outputs[outputs.len() - 1..],
    };
    let mut row = Vec::with_capacity(blocks.len() * k);
    for block in blocks {
        let block = block.as_ref();
        row.extend(order.iter().map(|&c| basis_value(block[c], basis)));
    }
    Ok(row)
}

/// Batch form of [`assemble_features`]: `outputs[i]` holds `ŷ_{i+1}` for every sample.
pub fn assemble_batch(outputs: &[Matrix], mode: FeatureMode, basis: FeatureBasis) -> Result<MetaFeatures> {
    let last = outputs
        .last()
        .ok_or_else(|| Error::invalid("no probe outputs to assemble"))?;
    let (n, k) = (last.rows(), last.cols());
    if outputs.iter().any(|m| m.rows() != n) {
        return Err(Error::invalid("probe output batches differ in length"));
    }
    let blocks = match mode {
        FeatureMode::Whitebox => outputs.len(),
        FeatureMode::Blackbox => 1,
    };
    let layout = FeatureLayout {
        mode,
        basis,
        blocks,
        num_classes: k,
    };
    let mut data = Vec::with_capacity(n * layout.width());
    for i in 0..n {
        let rows: Vec<&[f64]> = outputs.iter().map(|m| m.row(i)).collect();
        data.extend(assemble_features(&rows, mode, basis)?);
    }
    MetaFeatures::new(Matrix::from_vec(n, layout.width(), data)?, layout)
}

/// Correctness targets: `true` where the sample is in-domain and the base model predicts its label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaLabels(Vec<bool>);

impl MetaLabels {
    pub fn new(labels: Vec<bool>) -> Self {
        MetaLabels(labels)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub(crate) fn require_both_classes(&self) -> Result<()> {
        let pos = self.positives();
        if pos == 0 || pos == self.0.len() {
            return Err(Error::DegenerateLabels(format!(
                "{pos} of {} meta labels are positive; need both classes",
                self.0.len()
            )));
        }
        Ok(())
    }
}

pub fn meta_labels(model: &BaseModel, data: &Dataset) -> Result<MetaLabels> {
    let preds = model.predict_batch(data.features())?;
    Ok(MetaLabels(
        preds
            .iter()
            .zip(data.labels())
            .zip(data.origin())
            .map(|((&p, &y), &o)| o == Origin::InDomain && y >= 0 && p == y as usize)
            .collect(),
    ))
}

/// Maximum class probability.
pub fn softmax_response(probs: &[f64]) -> f64 {
    probs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_model::mlp_arch;
    use crate::data::pool_ood;
    use proptest::prelude::*;

    #[test]
    fn whitebox_assembly_permutes_by_final_block() {
        let outs = [vec![0.2, 0.5, 0.3], vec![0.1, 0.6, 0.3]];
        let w = assemble_features(&outs, FeatureMode::Whitebox, FeatureBasis::Probability).unwrap();
        assert_eq!(w, vec![0.5, 0.3, 0.2, 0.6, 0.3, 0.1]);
        let b = assemble_features(&outs, FeatureMode::Blackbox, FeatureBasis::Probability).unwrap();
        assert_eq!(b, vec![0.6, 0.3, 0.1]);
    }

    #[test]
    fn sorted_final_block_is_identity() {
        let outs = [vec![0.1, 0.2, 0.7], vec![0.7, 0.2, 0.1]];
        let w = assemble_features(&outs, FeatureMode::Whitebox, FeatureBasis::Probability).unwrap();
        assert_eq!(w, vec![0.1, 0.2, 0.7, 0.7, 0.2, 0.1]);
    }

    #[test]
    fn logit_basis_is_log_probability() {
        let outs = [vec![0.25, 0.75]];
        let b = assemble_features(&outs, FeatureMode::Blackbox, FeatureBasis::Logit).unwrap();
        assert_eq!(b, vec![0.75f64.ln(), 0.25f64.ln()]);
    }

    #[test]
    fn inconsistent_class_counts_rejected() {
        let outs = [vec![0.5, 0.5], vec![0.2, 0.3, 0.5]];
        assert!(assemble_features(&outs, FeatureMode::Whitebox, FeatureBasis::Probability).is_err());
        let none: [Vec<f64>; 0] = [];
        assert!(assemble_features(&none, FeatureMode::Whitebox, FeatureBasis::Probability).is_err());
    }

    #[test]
    fn softmax_response_examples() {
        assert_eq!(softmax_response(&[0.1, 0.7, 0.2]), 0.7);
        assert_eq!(softmax_response(&[0.0, 1.0, 0.0]), 1.0);
        assert!((softmax_response(&[0.1; 10]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn meta_labels_follow_correctness_and_origin() {
        let m = BaseModel::init(2, &mlp_arch(&[3], 2), 5).unwrap();
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.5, -0.5]]).unwrap();
        let preds = m.predict_batch(&x).unwrap();
        let right: Vec<i32> = preds.iter().map(|&p| p as i32).collect();
        let wrong: Vec<i32> = preds.iter().map(|&p| 1 - p as i32).collect();
        let d_right = Dataset::new(x.clone(), right, 2).unwrap();
        let d_wrong = Dataset::new(x.clone(), wrong, 2).unwrap();
        assert_eq!(meta_labels(&m, &d_right).unwrap().positives(), 3);
        assert_eq!(meta_labels(&m, &d_wrong).unwrap().positives(), 0);
        let pooled = pool_ood(&d_right, &d_right.clone().with_id_offset(10)).unwrap();
        let l = meta_labels(&m, &pooled).unwrap();
        assert_eq!(l.as_slice(), &[true, true, true, false, false, false]);
    }

    proptest! {
        #[test]
        fn whitebox_blocks_are_rearrangements(
            raw in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 4), 1..6)
        ) {
            let outs: Vec<Vec<f64>> = raw.iter().map(|v| {
                let s: f64 = v.iter().sum();
                v.iter().map(|x| x / s).collect()
            }).collect();
            let row = assemble_features(&outs, FeatureMode::Whitebox, FeatureBasis::Probability).unwrap();
            prop_assert_eq!(row.len(), outs.len() * 4);
            for (block, orig) in row.chunks(4).zip(&outs) {
                let mut a = block.to_vec();
                let mut b = orig.clone();
                a.sort_by(f64::total_cmp);
                b.sort_by(f64::total_cmp);
                prop_assert_eq!(a, b);
                prop_assert!((block.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
            let last = row.chunks(4).last().unwrap();
            prop_assert!(last.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
