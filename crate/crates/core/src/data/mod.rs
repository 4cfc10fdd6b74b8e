//! Classification datasets: ingestion, seeded three-way splits, symmetric label
//! noise, and pooling of in-domain with out-of-domain samples.

mod load;
pub mod synthetic;

pub use load::{load_dataset, write_csv, DataSource};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Matrix, Rng};

/// Label carried by every out-of-domain sample.
pub const OOD_LABEL: i32 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    InDomain,
    OutOfDomain,
}

/// Feature matrix with integer class labels, per-sample origin flags and stable sample ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<i32>,
    num_classes: usize,
    origin: Vec<Origin>,
    ids: Vec<u64>,
}

impl Dataset {
    /// In-domain dataset; ids are assigned `0..N`.
    pub fn new(features: Matrix, labels: Vec<i32>, num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::invalid(format!(
                "num_classes must be at least 2, got {num_classes}"
            )));
        }
        if labels.len() != features.rows() {
            return Err(Error::invalid(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.rows()
            )));
        }
        if let Some((i, &y)) = labels
            .iter()
            .enumerate()
            .find(|(_, &y)| y < 0 || y as usize >= num_classes)
        {
            return Err(Error::invalid(format!(
                "label {y} at row {i} outside [0, {num_classes})"
            )));
        }
        let n = labels.len();
        Ok(Dataset {
            features,
            labels,
            num_classes,
            origin: vec![Origin::InDomain; n],
            ids: (0..n as u64).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn origin(&self) -> &[Origin] {
        &self.origin
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn all_in_domain(&self) -> bool {
        self.origin.iter().all(|&o| o == Origin::InDomain)
    }

    /// Shifts every sample id by `offset`, so datasets from different files never collide.
    pub fn with_id_offset(mut self, offset: u64) -> Self {
        for id in &mut self.ids {
            *id += offset;
        }
        self
    }

    /// Rows at `indices`, in that order, keeping labels, flags and ids.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            origin: indices.iter().map(|&i| self.origin[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i]).collect(),
        }
    }
}

/// Three-way partition fractions: train-base, train-meta, dev.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(fractions: [f64; 3], seed: u64) -> Result<Self> {
        let spec = SplitSpec { fractions, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::invalid(format!(
                "split fractions must be non-negative, got {:?}",
                self.fractions
            )));
        }
        let sum: f64 = self.fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub rate: f64,
    pub seed: u64,
}

/// `floor(fraction * n)`, absorbing the representation error of decimal fractions
/// (`0.29 * 100` is `28.999999999999996` in binary).
pub(crate) fn floor_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Splits into (train-base, train-meta, dev). Train-meta and dev get `floor(f * N)`
/// samples; train-base takes the remainder. Membership comes from a seeded
/// permutation; each subset keeps the input's relative order.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    let n = dataset.len();
    if n < 3 {
        return Err(Error::invalid(format!("cannot split {n} samples three ways")));
    }
    let meta_n = floor_count(spec.fractions[1], n);
    let dev_n = floor_count(spec.fractions[2], n);
    let base_n = n - meta_n - dev_n;
    for (name, size) in [("train-base", base_n), ("train-meta", meta_n), ("dev", dev_n)] {
        if size == 0 {
            return Err(Error::invalid(format!(
                "split fractions {:?} leave {name} empty for N={n}",
                spec.fractions
            )));
        }
    }
    let perm = Rng::new(spec.seed).permutation(n);
    let take = |range: std::ops::Range<usize>| {
        let mut idx = perm[range].to_vec();
        idx.sort_unstable();
        dataset.subset(&idx)
    };
    Ok((
        take(0..base_n),
        take(base_n..base_n + meta_n),
        take(base_n + meta_n..n),
    ))
}

/// Replaces the label of exactly `floor(rate * N)` samples with a label drawn
/// uniformly from the other `k - 1` classes. Features are untouched.
pub fn inject_label_noise(dataset: &Dataset, spec: &NoiseSpec) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&spec.rate) {
        return Err(Error::invalid(format!(
            "noise rate must be in [0, 1], got {}",
            spec.rate
        )));
    }
    if !dataset.all_in_domain() {
        return Err(Error::invalid("label noise applies to in-domain data only"));
    }
    let k = dataset.num_classes;
    let count = floor_count(spec.rate, dataset.len());
    let mut rng = Rng::new(spec.seed);
    let mut out = dataset.clone();
    for i in rng.sample_without_replacement(dataset.len(), count) {
        let original = out.labels[i] as usize;
        let draw = rng.below(k - 1);
        let replacement = if draw >= original { draw + 1 } else { draw };
        out.labels[i] = replacement as i32;
    }
    Ok(out)
}

/// Concatenates `in_test` (flagged in-domain) with `ood` (flagged out-of-domain,
/// relabelled to [`OOD_LABEL`]).
pub fn pool_ood(in_test: &Dataset, ood: &Dataset) -> Result<Dataset> {
    if ood.is_empty() {
        let mut out = in_test.clone();
        out.origin.iter_mut().for_each(|o| *o = Origin::InDomain);
        return Ok(out);
    }
    if in_test.dim() != ood.dim() {
        return Err(Error::invalid(format!(
            "in-domain dimension {} does not match out-of-domain dimension {}",
            in_test.dim(),
            ood.dim()
        )));
    }
    let mut labels = in_test.labels.clone();
    labels.extend(std::iter::repeat(OOD_LABEL).take(ood.len()));
    let mut origin = vec![Origin::InDomain; in_test.len()];
    origin.extend(std::iter::repeat(Origin::OutOfDomain).take(ood.len()));
    let mut ids = in_test.ids.clone();
    ids.extend_from_slice(&ood.ids);
    Ok(Dataset {
        features: in_test.features.vstack(&ood.features)?,
        labels,
        num_classes: in_test.num_classes,
        origin,
        ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn toy(n: usize, k: usize) -> Dataset {
        let feats: Vec<f64> = (0..n * 2).map(|i| i as f64).collect();
        let labels = (0..n).map(|i| (i % k) as i32).collect();
        Dataset::new(Matrix::from_vec(n, 2, feats).unwrap(), labels, k).unwrap()
    }

    #[test]
    fn rejects_bad_labels() {
        let m = Matrix::zeros(2, 1);
        assert!(Dataset::new(m.clone(), vec![0, 10], 10).is_err());
        assert!(Dataset::new(m.clone(), vec![0, -1], 10).is_err());
        assert!(Dataset::new(m, vec![0, 0], 1).is_err());
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let spec = SplitSpec::new([0.6, 0.2, 0.2], 5).unwrap();
        let (a, b, c) = split(&toy(10, 2), &spec).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (6, 2, 2));

        let (a, b, c) = split(&toy(50_000, 10), &spec).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (30_000, 10_000, 10_000));

        let spec = SplitSpec::new([0.5, 0.25, 0.25], 5).unwrap();
        let (a, b, c) = split(&toy(11, 2), &spec).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (7, 2, 2));
    }

    #[test]
    fn split_is_deterministic_and_seeded() {
        let d = toy(100, 3);
        let spec = SplitSpec::new([0.6, 0.2, 0.2], 9).unwrap();
        assert_eq!(split(&d, &spec).unwrap(), split(&d, &spec).unwrap());
        let other = SplitSpec { seed: 10, ..spec };
        assert_ne!(split(&d, &spec).unwrap().1.ids(), split(&d, &other).unwrap().1.ids());
    }

    #[test]
    fn split_rejects_empty_subsets_and_bad_fractions() {
        let d = toy(10, 2);
        assert!(split(&d, &SplitSpec { fractions: [0.9, 0.1, 0.0], seed: 0 }).is_err());
        assert!(split(&d, &SplitSpec { fractions: [0.5, 0.2, 0.2], seed: 0 }).is_err());
        assert!(split(&toy(2, 2), &SplitSpec { fractions: [0.4, 0.3, 0.3], seed: 0 }).is_err());
        assert!(SplitSpec::new([1.2, -0.1, -0.1], 0).is_err());
    }

    #[test]
    fn noise_examples() {
        let d = toy(10, 4);
        let same = inject_label_noise(&d, &NoiseSpec { rate: 0.0, seed: 1 }).unwrap();
        assert_eq!(same, d);

        let noisy = inject_label_noise(&d, &NoiseSpec { rate: 0.3, seed: 1 }).unwrap();
        let changed = d.labels().iter().zip(noisy.labels()).filter(|(a, b)| a != b).count();
        assert_eq!(changed, 3);
        assert_eq!(noisy.features(), d.features());

        let big = toy(50_000, 10);
        let noisy = inject_label_noise(&big, &NoiseSpec { rate: 0.3, seed: 2 }).unwrap();
        let changed = big.labels().iter().zip(noisy.labels()).filter(|(a, b)| a != b).count();
        assert_eq!(changed, 15_000);

        assert!(inject_label_noise(&d, &NoiseSpec { rate: 1.5, seed: 1 }).is_err());
        assert!(inject_label_noise(&d, &NoiseSpec { rate: -0.1, seed: 1 }).is_err());
    }

    #[test]
    fn noise_rejects_pooled_data() {
        let pooled = pool_ood(&toy(4, 2), &toy(3, 2)).unwrap();
        assert!(inject_label_noise(&pooled, &NoiseSpec { rate: 0.5, seed: 0 }).is_err());
    }

    #[test]
    fn pooling_examples() {
        let test = toy(10_000, 10);
        let ood = toy(10_000, 10).with_id_offset(1 << 32);
        let pooled = pool_ood(&test, &ood).unwrap();
        assert_eq!(pooled.len(), 20_000);
        assert_eq!(pooled.num_classes(), 10);
        for i in 0..pooled.len() {
            if pooled.origin()[i] == Origin::OutOfDomain {
                assert_eq!(pooled.labels()[i], OOD_LABEL);
            }
        }
        assert_eq!(&pooled.labels()[..10_000], test.labels());
        assert_eq!(pooled.features().row(10_000), ood.features().row(0));

        let empty = toy(5, 2).subset(&[]);
        assert_eq!(pool_ood(&test, &empty).unwrap(), test);

        let wide = Dataset::new(Matrix::zeros(2, 3), vec![0, 1], 2).unwrap();
        assert!(pool_ood(&test, &wide).is_err());
    }

    proptest! {
        #[test]
        fn split_partitions_exactly(n in 3usize..300, seed in any::<u64>(), a in 0.1f64..0.8) {
            let b = (1.0 - a) / 2.0;
            let d = toy(n, 3);
            let spec = SplitSpec { fractions: [a, b, 1.0 - a - b], seed };
            if let Ok((x, y, z)) = split(&d, &spec) {
                let mut all: Vec<u64> = x.ids().iter().chain(y.ids()).chain(z.ids()).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n as u64).collect::<Vec<_>>());
            }
        }

        #[test]
        fn noise_hamming_distance_is_exact(n in 1usize..400, k in 2usize..12, rate in 0.0f64..=1.0, seed in any::<u64>()) {
            let d = toy(n, k);
            let noisy = inject_label_noise(&d, &NoiseSpec { rate, seed }).unwrap();
            let changed = d.labels().iter().zip(noisy.labels()).filter(|(a, b)| a != b).count();
            prop_assert_eq!(changed, floor_count(rate, n));
            prop_assert!(noisy.labels().iter().all(|&y| y >= 0 && (y as usize) < k));
        }

        #[test]
        fn pooling_preserves_blocks(n in 0usize..50, m in 0usize..50) {
            let a = toy(n.max(1), 2);
            let b = toy(m, 2).with_id_offset(1000);
            let p = pool_ood(&a, &b).unwrap();
            prop_assert_eq!(&p.ids()[..a.len()], a.ids());
            prop_assert_eq!(&p.ids()[a.len()..], b.ids());
            let ids: BTreeSet<u64> = p.ids().iter().copied().collect();
            prop_assert_eq!(ids.len(), p.len());
        }
    }
}
