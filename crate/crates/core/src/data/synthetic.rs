//! Seeded generator for desk-scale image-like classification data.
//!
//! Every class is a mixture of Gaussian modes in a low-dimensional latent space;
//! samples are pushed through a fixed random `tanh` map into feature space and
//! perturbed with isotropic noise. Out-of-domain classes are drawn from the same
//! process with their own modes, so they share the feature space but none of the
//! in-domain classes.

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::numeric::{Matrix, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub ood_classes: usize,
    pub dim: usize,
    pub latent_dim: usize,
    pub modes_per_class: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub ood_size: usize,
    /// Scale of the mode centres in latent space.
    pub center_scale: f64,
    /// Standard deviation of a sample around its mode.
    pub spread: f64,
    /// Gain of the latent-to-feature map.
    pub gain: f64,
    /// Standard deviation of additive feature noise.
    pub feature_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_classes: 10,
            ood_classes: 10,
            dim: 32,
            latent_dim: 8,
            modes_per_class: 8,
            train_size: 25_000,
            test_size: 2_500,
            ood_size: 2_500,
            center_scale: 1.0,
            spread: 0.45,
            gain: 1.5,
            feature_noise: 0.1,
            seed: 2019,
        }
    }
}

/// In-domain train/test sets and a disjoint-class out-of-domain set.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub train: Dataset,
    pub test: Dataset,
    pub ood: Dataset,
}

struct Process {
    modes: Vec<Vec<f64>>,
    map: Matrix,
    bias: Vec<f64>,
}

impl Process {
    fn sample(&self, spec: &SyntheticSpec, class: usize, rng: &mut Rng, out: &mut Vec<f64>) {
        let mode = &self.modes[class * spec.modes_per_class + rng.below(spec.modes_per_class)];
        let z: Vec<f64> = mode.iter().map(|c| c + spec.spread * rng.normal()).collect();
        let mut h = vec![0.0; spec.dim];
        self.map.mul_vec_into(&z, &mut h);
        for (j, v) in h.iter().enumerate() {
            out.push((v + self.bias[j]).tanh() + spec.feature_noise * rng.normal());
        }
    }
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    if spec.num_classes < 2 || spec.ood_classes < 1 {
        return Err(Error::invalid("need at least 2 in-domain and 1 out-of-domain class"));
    }
    if spec.dim == 0 || spec.latent_dim == 0 || spec.modes_per_class == 0 {
        return Err(Error::invalid("dimensions and mode count must be positive"));
    }
    let mut rng = Rng::new(spec.seed);
    let total_classes = spec.num_classes + spec.ood_classes;
    let modes = (0..total_classes * spec.modes_per_class)
        .map(|_| {
            (0..spec.latent_dim)
                .map(|_| spec.center_scale * rng.normal())
                .collect()
        })
        .collect();
    let scale = spec.gain / (spec.latent_dim as f64).sqrt();
    let map = Matrix::from_vec(
        spec.dim,
        spec.latent_dim,
        (0..spec.dim * spec.latent_dim)
            .map(|_| scale * rng.normal())
            .collect(),
    )?;
    let bias = (0..spec.dim).map(|_| 0.2 * rng.normal()).collect();
    let process = Process { modes, map, bias };

    let draw = |n: usize, first_class: usize, classes: usize, tag: &str| -> Result<Dataset> {
        let mut r = Rng::new(Rng::derive_seed(spec.seed, tag));
        let mut labels: Vec<i32> = (0..n).map(|i| (i % classes) as i32).collect();
        r.shuffle(&mut labels);
        let mut data = Vec::with_capacity(n * spec.dim);
        for &y in &labels {
            process.sample(spec, first_class + y as usize, &mut r, &mut data);
        }
        Dataset::new(
            Matrix::from_vec(n, spec.dim, data)?,
            labels,
            classes.max(2),
        )
    };
    Ok(SyntheticData {
        train: draw(spec.train_size, 0, spec.num_classes, "train")?,
        test: draw(spec.test_size, 0, spec.num_classes, "test")?,
        ood: draw(spec.ood_size, spec.num_classes, spec.ood_classes, "ood")?,
    })
}
