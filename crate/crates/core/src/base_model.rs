//! Layered feed-forward classifier whose per-layer outputs can be observed.
//!
//! Each layer is an affine map followed by `relu` or `identity`; the last layer is
//! always followed by a softmax, so the final entry of an [`ActivationTrace`] is the
//! class probability vector.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numeric::{argmax, log_sum_exp, softmax_in_place, Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn relu(width: usize) -> Self {
        LayerSpec {
            width,
            activation: Activation::Relu,
        }
    }

    pub fn identity(width: usize) -> Self {
        LayerSpec {
            width,
            activation: Activation::Identity,
        }
    }
}

/// Hidden relu layers of the given widths followed by an identity output layer of width `k`.
pub fn mlp_arch(hidden: &[usize], num_classes: usize) -> Vec<LayerSpec> {
    hidden
        .iter()
        .map(|&w| LayerSpec::relu(w))
        .chain(std::iter::once(LayerSpec::identity(num_classes)))
        .collect()
}

/// Mini-batch SGD settings, shared by the base model, the probes and the LR meta-model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::invalid("l2 must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `(width x fan_in)`, row-major.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    fn forward_into(&self, input: &[f64], out: &mut [f64]) {
        self.weights.mul_vec_into(input, out);
        for (o, b) in out.iter_mut().zip(&self.bias) {
            *o += b;
            if self.activation == Activation::Relu && *o < 0.0 {
                *o = 0.0;
            }
        }
    }

    fn width(&self) -> usize {
        self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "BaseModelRepr", into = "BaseModelRepr")]
pub struct BaseModel {
    input_dim: usize,
    num_classes: usize,
    layers: Vec<Layer>,
    /// Epoch-mean training objective, one entry per epoch.
    train_loss: Vec<f64>,
    /// Cached [`BaseModel::fingerprint`]; refreshed whenever parameters change.
    fingerprint: Arc<str>,
}

#[derive(Clone, Serialize, Deserialize)]
struct BaseModelRepr {
    input_dim: usize,
    num_classes: usize,
    layers: Vec<Layer>,
    train_loss: Vec<f64>,
}

impl From<BaseModelRepr> for BaseModel {
    fn from(r: BaseModelRepr) -> Self {
        let mut m = BaseModel {
            input_dim: r.input_dim,
            num_classes: r.num_classes,
            layers: r.layers,
            train_loss: r.train_loss,
            fingerprint: Arc::from(""),
        };
        m.refresh_fingerprint();
        m
    }
}

impl From<BaseModel> for BaseModelRepr {
    fn from(m: BaseModel) -> Self {
        BaseModelRepr {
            input_dim: m.input_dim,
            num_classes: m.num_classes,
            layers: m.layers,
            train_loss: m.train_loss,
        }
    }
}

/// Per-layer outputs `x_1 .. x_n` for one sample; `x_n` is the softmax output.
/// Carries the fingerprint of the model that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    layers: Vec<Vec<f64>>,
    source: Arc<str>,
}

impl ActivationTrace {
    pub fn new(layers: Vec<Vec<f64>>, source_fingerprint: &str) -> Self {
        ActivationTrace {
            layers,
            source: Arc::from(source_fingerprint),
        }
    }

    /// Fingerprint of the producing model.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn output(&self) -> &[f64] {
        self.layers.last().map_or(&[], Vec::as_slice)
    }
}

/// Parameter gradients with the same layout as [`BaseModel::parameters`].
#[derive(Debug, Clone)]
pub struct Gradients {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(model: &BaseModel) -> Self {
        Gradients {
            weights: model
                .layers
                .iter()
                .map(|l| vec![0.0; l.weights.as_slice().len()])
                .collect(),
            biases: model.layers.iter().map(|l| vec![0.0; l.width()]).collect(),
        }
    }

    fn clear(&mut self) {
        self.weights.iter_mut().for_each(|w| w.fill(0.0));
        self.biases.iter_mut().for_each(|b| b.fill(0.0));
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

/// Reusable per-sample activation buffers.
struct Scratch {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Scratch {
    fn new(model: &BaseModel) -> Self {
        let acts = model.layers.iter().map(|l| vec![0.0; l.width()]).collect();
        let deltas = model.layers.iter().map(|l| vec![0.0; l.width()]).collect();
        Scratch { acts, deltas }
    }
}

impl BaseModel {
    /// Randomly initialised model: weights uniform in `±sqrt(6 / fan_in)` for relu
    /// layers and `±sqrt(1 / fan_in)` otherwise, biases zero.
    pub fn init(input_dim: usize, arch: &[LayerSpec], seed: u64) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        let Some(last) = arch.last() else {
            return Err(Error::invalid("architecture needs at least one layer"));
        };
        if arch.iter().any(|l| l.width == 0) {
            return Err(Error::invalid("layer widths must be at least 1"));
        }
        let num_classes = last.width;
        if num_classes < 2 {
            return Err(Error::invalid("final layer width must be at least 2"));
        }
        let mut rng = Rng::new(seed);
        let mut fan_in = input_dim;
        let mut layers = Vec::with_capacity(arch.len());
        for spec in arch {
            let gain = match spec.activation {
                Activation::Relu => 6.0,
                Activation::Identity => 1.0,
            };
            let bound = (gain / fan_in as f64).sqrt();
            let w = (0..spec.width * fan_in)
                .map(|_| rng.uniform(-bound, bound))
                .collect();
            layers.push(Layer {
                weights: Matrix::from_vec(spec.width, fan_in, w)?,
                bias: vec![0.0; spec.width],
                activation: spec.activation,
            });
            fan_in = spec.width;
        }
        let mut model = BaseModel {
            input_dim,
            num_classes,
            layers,
            train_loss: Vec::new(),
            fingerprint: Arc::from(""),
        };
        model.refresh_fingerprint();
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Output width of every layer, first to last.
    pub fn layer_widths(&self) -> Vec<usize> {
        self.layers.iter().map(Layer::width).collect()
    }

    pub fn train_loss(&self) -> &[f64] {
        &self.train_loss
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::invalid(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Fills `scratch.acts` with per-layer outputs; the last holds raw logits.
    fn forward_raw(&self, x: &[f64], scratch: &mut Scratch) {
        let (first, rest) = scratch.acts.split_at_mut(1);
        self.layers[0].forward_into(x, &mut first[0]);
        let mut prev: &[f64] = &first[0];
        for (layer, out) in self.layers[1..].iter().zip(rest.iter_mut()) {
            layer.forward_into(prev, out);
            prev = out;
        }
    }

    /// Pre-softmax output of the final layer.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut s = Scratch::new(self);
        self.forward_raw(x, &mut s);
        Ok(s.acts.pop().expect("at least one layer"))
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut p = self.logits(x)?;
        softmax_in_place(&mut p);
        Ok(p)
    }

    /// Class probabilities plus every intermediate output.
    pub fn forward_with_trace(&self, x: &[f64]) -> Result<(Vec<f64>, ActivationTrace)> {
        self.check_dim(x)?;
        let mut s = Scratch::new(self);
        self.forward_raw(x, &mut s);
        let mut layers = s.acts;
        softmax_in_place(layers.last_mut().expect("at least one layer"));
        let y = layers.last().expect("at least one layer").clone();
        Ok((
            y,
            ActivationTrace {
                layers,
                source: Arc::clone(&self.fingerprint),
            },
        ))
    }

    /// Argmax class, lowest index on ties.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }

    /// Per-layer outputs for every row of `x`: element `i` is an `(N x width_i)` matrix.
    pub fn forward_batch(&self, x: &Matrix) -> Result<Vec<Matrix>> {
        if x.cols() != self.input_dim {
            return Err(Error::invalid(format!(
                "input has {} features, model expects {}",
                x.cols(),
                self.input_dim
            )));
        }
        let mut outs: Vec<Matrix> = self
            .layers
            .iter()
            .map(|l| Matrix::zeros(x.rows(), l.width()))
            .collect();
        let mut s = Scratch::new(self);
        for (i, row) in x.iter_rows().enumerate() {
            self.forward_raw(row, &mut s);
            softmax_in_place(s.acts.last_mut().expect("at least one layer"));
            for (out, act) in outs.iter_mut().zip(&s.acts) {
                out.row_mut(i).copy_from_slice(act);
            }
        }
        Ok(outs)
    }

    /// Raw final-layer logits for every row.
    pub fn logits_batch(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(x.rows(), self.num_classes);
        for (i, row) in x.iter_rows().enumerate() {
            out.row_mut(i).copy_from_slice(&self.logits(row)?);
        }
        Ok(out)
    }

    pub fn predict_batch(&self, x: &Matrix) -> Result<Vec<usize>> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }

    /// Fraction of in-domain samples whose prediction equals their label.
    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::invalid("accuracy of an empty dataset"));
        }
        let preds = self.predict_batch(data.features())?;
        let hits = preds
            .iter()
            .zip(data.labels())
            .filter(|(&p, &y)| y >= 0 && p == y as usize)
            .count();
        Ok(hits as f64 / data.len() as f64)
    }

    fn l2_penalty(&self, l2: f64) -> f64 {
        if l2 == 0.0 {
            return 0.0;
        }
        let sq: f64 = self
            .layers
            .iter()
            .map(|l| l.weights.as_slice().iter().map(|w| w * w).sum::<f64>())
            .sum();
        0.5 * l2 * sq
    }

    /// Mean cross-entropy over the rows plus `l2 / 2 * ||W||^2` (biases unpenalised).
    pub fn loss(&self, x: &Matrix, labels: &[i32], l2: f64) -> Result<f64> {
        let mut s = Scratch::new(self);
        let mut total = 0.0;
        for (row, &y) in x.iter_rows().zip(labels) {
            self.check_dim(row)?;
            self.forward_raw(row, &mut s);
            let logits = s.acts.last().expect("at least one layer");
            total += log_sum_exp(logits) - logits[y as usize];
        }
        Ok(total / labels.len() as f64 + self.l2_penalty(l2))
    }

    /// Objective of [`BaseModel::loss`] and its gradient over the given rows.
    pub fn loss_and_gradient(&self, x: &Matrix, labels: &[i32], l2: f64) -> Result<(f64, Gradients)> {
        if x.rows() != labels.len() || labels.is_empty() {
            return Err(Error::invalid("rows and labels must be non-empty and equal in count"));
        }
        if x.cols() != self.input_dim {
            return Err(Error::invalid("input dimension mismatch"));
        }
        let rows: Vec<usize> = (0..labels.len()).collect();
        let mut grads = Gradients::zeros_like(self);
        let mut s = Scratch::new(self);
        let loss = self.accumulate(x, labels, &rows, l2, &mut s, &mut grads);
        Ok((loss, grads))
    }

    /// Accumulates the mean-batch gradient over `rows` into `grads`; returns the batch objective.
    fn accumulate(
        &self,
        x: &Matrix,
        labels: &[i32],
        rows: &[usize],
        l2: f64,
        s: &mut Scratch,
        grads: &mut Gradients,
    ) -> f64 {
        let scale = 1.0 / rows.len() as f64;
        let n = self.layers.len();
        let mut loss = 0.0;
        for &r in rows {
            let input = x.row(r);
            let y = labels[r] as usize;
            self.forward_raw(input, s);
            let out = &s.acts[n - 1];
            let lse = log_sum_exp(out);
            loss += lse - out[y];
            // dL/dlogits = softmax - onehot
            let delta = &mut s.deltas[n - 1];
            for (d, &z) in delta.iter_mut().zip(out.iter()) {
                *d = (z - lse).exp() * scale;
            }
            delta[y] -= scale;

            for l in (0..n).rev() {
                let layer = &self.layers[l];
                let fan_in = layer.weights.cols();
                let prev: &[f64] = if l == 0 { input } else { &s.acts[l - 1] };
                let delta = &s.deltas[l];
                let gw = &mut grads.weights[l];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    grads.biases[l][o] += d;
                    for (g, &p) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(prev) {
                        *g += d * p;
                    }
                }
                if l > 0 {
                    let (lower, upper) = s.deltas.split_at_mut(l);
                    let back = &mut lower[l - 1];
                    back.fill(0.0);
                    let w = layer.weights.as_slice();
                    for (o, &d) in upper[0].iter().enumerate() {
                        if d == 0.0 {
                            continue;
                        }
                        for (b, &wv) in back.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                            *b += d * wv;
                        }
                    }
                    if self.layers[l - 1].activation == Activation::Relu {
                        for (b, &a) in back.iter_mut().zip(&s.acts[l - 1]) {
                            if a <= 0.0 {
                                *b = 0.0;
                            }
                        }
                    }
                }
            }
        }
        if l2 > 0.0 {
            for (gw, layer) in grads.weights.iter_mut().zip(&self.layers) {
                for (g, &w) in gw.iter_mut().zip(layer.weights.as_slice()) {
                    *g += l2 * w;
                }
            }
        }
        loss * scale + self.l2_penalty(l2)
    }

    fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        for ((layer, gw), gb) in self.layers.iter_mut().zip(&grads.weights).zip(&grads.biases) {
            for (w, g) in layer.weights.as_mut_slice().iter_mut().zip(gw) {
                *w -= lr * g;
            }
            for (b, g) in layer.bias.iter_mut().zip(gb) {
                *b -= lr * g;
            }
        }
    }

    /// All parameters flattened layer by layer as `[W_1, b_1, W_2, b_2, ...]`.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Inverse of [`BaseModel::parameters`].
    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        let total: usize = self
            .layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.width())
            .sum();
        if params.len() != total {
            return Err(Error::invalid(format!(
                "expected {total} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite parameter"));
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, tail) = rest.split_at(l.weights.as_slice().len());
            l.weights.as_mut_slice().copy_from_slice(w);
            let (b, tail) = tail.split_at(l.bias.len());
            l.bias.copy_from_slice(b);
            rest = tail;
        }
        self.refresh_fingerprint();
        Ok(())
    }

    /// SHA-256 over shapes, activations and the bit patterns of every parameter.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn refresh_fingerprint(&mut self) {
        self.fingerprint = Arc::from(self.compute_fingerprint());
    }

    fn compute_fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.input_dim as u64).to_le_bytes());
        h.update((self.num_classes as u64).to_le_bytes());
        for l in &self.layers {
            h.update((l.weights.rows() as u64).to_le_bytes());
            h.update((l.weights.cols() as u64).to_le_bytes());
            h.update([l.activation as u8]);
            for v in l.weights.as_slice().iter().chain(&l.bias) {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Trains a fresh model with mini-batch SGD on mean cross-entropy. The result is a
/// pure function of `(train, arch, cfg)`: initialisation and the per-epoch
/// reshuffle both derive from `cfg.seed`.
pub fn train_base(train: &Dataset, arch: &[LayerSpec], cfg: &TrainConfig) -> Result<BaseModel> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if !train.all_in_domain() {
        return Err(Error::invalid("base model trains on in-domain samples only"));
    }
    let Some(last) = arch.last() else {
        return Err(Error::invalid("architecture needs at least one layer"));
    };
    if last.width != train.num_classes() {
        return Err(Error::invalid(format!(
            "final layer width {} does not match {} classes",
            last.width,
            train.num_classes()
        )));
    }
    let mut model = BaseModel::init(train.dim(), arch, Rng::derive_seed(cfg.seed, "init"))?;
    let mut rng = Rng::new(Rng::derive_seed(cfg.seed, "shuffle"));
    let mut grads = Gradients::zeros_like(&model);
    let mut scratch = Scratch::new(&model);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            grads.clear();
            let loss = model.accumulate(
                train.features(),
                train.labels(),
                batch,
                cfg.l2,
                &mut scratch,
                &mut grads,
            );
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            model.sgd_step(&grads, cfg.learning_rate);
            sum += loss * batch.len() as f64;
            batches += batch.len();
        }
        let mean = sum / batches as f64;
        if !mean.is_finite() || model.parameters().iter().any(|p| !p.is_finite()) {
            return Err(Error::TrainingDiverged { epoch });
        }
        model.train_loss.push(mean);
    }
    model.refresh_fingerprint();
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n: usize, seed: u64, flip: bool) -> Dataset {
        let mut rng = Rng::new(seed);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let y = (i % 2) as i32;
            let c = if y == 0 { -1.5 } else { 1.5 };
            data.push(c + 0.5 * rng.normal());
            data.push(c + 0.5 * rng.normal());
            labels.push(if flip && rng.next_f64() < 0.3 { 1 - y } else { y });
        }
        Dataset::new(Matrix::from_vec(n, 2, data).unwrap(), labels, 2).unwrap()
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 16,
            learning_rate: 0.1,
            l2: 0.0,
            seed: 1,
        }
    }

    #[test]
    fn trace_shapes() {
        let m = BaseModel::init(4, &mlp_arch(&[5, 3], 3), 0).unwrap();
        let x = [0.3, -0.2, 1.0, 0.5];
        let (y, trace) = m.forward_with_trace(&x).unwrap();
        assert_eq!(trace.len(), 3);
        assert_eq!(trace.layers()[0].len(), 5);
        assert_eq!(trace.layers()[1].len(), 3);
        assert_eq!(trace.output(), y.as_slice());
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(y, m.predict_proba(&x).unwrap());
        assert_eq!(m.predict(&x).unwrap(), argmax(&y));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = BaseModel::init(4, &mlp_arch(&[5], 3), 0).unwrap();
        assert!(m.forward_with_trace(&[1.0]).is_err());
        assert!(m.predict(&[1.0; 5]).is_err());
        let d = blobs(10, 1, false);
        assert!(train_base(&d, &mlp_arch(&[4], 3), &cfg(1)).is_err());
        assert!(train_base(&d, &[], &cfg(1)).is_err());
    }

    #[test]
    fn batch_forward_matches_per_sample() {
        let m = BaseModel::init(2, &mlp_arch(&[6, 4], 2), 3).unwrap();
        let d = blobs(20, 2, false);
        let outs = m.forward_batch(d.features()).unwrap();
        for i in 0..d.len() {
            let (_, t) = m.forward_with_trace(d.features().row(i)).unwrap();
            for (l, layer) in t.layers().iter().enumerate() {
                assert_eq!(outs[l].row(i), layer.as_slice());
            }
        }
    }

    #[test]
    fn separable_blobs_are_learned() {
        let d = blobs(200, 1, false);
        let m = train_base(&d, &mlp_arch(&[8], 2), &cfg(30)).unwrap();
        assert!(m.accuracy(&d).unwrap() > 0.95);
        assert_eq!(m.train_loss().len(), 30);
    }

    #[test]
    fn training_is_bit_reproducible() {
        let d = blobs(100, 4, false);
        let a = train_base(&d, &mlp_arch(&[8, 4], 2), &cfg(5)).unwrap();
        let b = train_base(&d, &mlp_arch(&[8, 4], 2), &cfg(5)).unwrap();
        assert_eq!(a.parameters(), b.parameters());
        assert_eq!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn noisy_labels_reduce_fit() {
        let clean = blobs(200, 1, false);
        let noisy = blobs(200, 1, true);
        let arch = mlp_arch(&[8], 2);
        let a = train_base(&clean, &arch, &cfg(30)).unwrap();
        let b = train_base(&noisy, &arch, &cfg(30)).unwrap();
        assert!(b.accuracy(&noisy).unwrap() < a.accuracy(&clean).unwrap());
    }

    #[test]
    fn divergence_is_reported() {
        let d = blobs(50, 1, false);
        let huge = TrainConfig {
            learning_rate: 1e200,
            ..cfg(3)
        };
        let err = train_base(&d, &mlp_arch(&[8], 2), &huge).unwrap_err();
        assert!(matches!(err, Error::TrainingDiverged { .. }), "{err:?}");
    }

    #[test]
    fn fingerprint_tracks_parameters() {
        let mut m = BaseModel::init(2, &mlp_arch(&[3], 2), 0).unwrap();
        let before = m.fingerprint().to_string();
        let mut p = m.parameters();
        p[0] += 1e-12;
        m.set_parameters(&p).unwrap();
        assert_ne!(before, m.fingerprint());
    }
}
