//! Linear classifier probes: one affine-softmax classifier per base-model layer,
//! fitted on that layer's frozen output.

use serde::{Deserialize, Serialize};

use crate::base_model::{ActivationTrace, BaseModel, TrainConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numeric::{argmax, log_sum_exp, softmax_in_place, Matrix, Rng};

/// `softmax(W x_i + b)` over one layer's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    /// 1-based index of the probed layer.
    pub layer: usize,
    /// `(k x dim(x_i))`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    /// Epoch-mean cross-entropy during training.
    pub train_loss: Vec<f64>,
}

impl Probe {
    /// Zero-initialised probe, which outputs the uniform distribution.
    pub fn zeros(layer: usize, input_dim: usize, num_classes: usize) -> Self {
        Probe {
            layer,
            weights: Matrix::zeros(num_classes, input_dim),
            bias: vec![0.0; num_classes],
            train_loss: Vec::new(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    fn logits_into(&self, x: &[f64], out: &mut [f64]) {
        self.weights.mul_vec_into(x, out);
        for (o, b) in out.iter_mut().zip(&self.bias) {
            *o += b;
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "probe {} expects {} inputs, got {}",
                self.layer,
                self.input_dim(),
                x.len()
            )));
        }
        let mut out = vec![0.0; self.bias.len()];
        self.logits_into(x, &mut out);
        softmax_in_place(&mut out);
        Ok(out)
    }

    fn fit(&mut self, inputs: &Matrix, labels: &[i32], cfg: &TrainConfig, seed: u64) -> Result<()> {
        let k = self.bias.len();
        let d = self.input_dim();
        let mut rng = Rng::new(seed);
        let mut order: Vec<usize> = (0..labels.len()).collect();
        let mut gw = vec![0.0; k * d];
        let mut gb = vec![0.0; k];
        let mut p = vec![0.0; k];
        for epoch in 0..cfg.epochs {
            rng.shuffle(&mut order);
            let mut total = 0.0;
            for batch in order.chunks(cfg.batch_size) {
                gw.fill(0.0);
                gb.fill(0.0);
                let scale = 1.0 / batch.len() as f64;
                let mut batch_loss = 0.0;
                for &r in batch {
                    let x = inputs.row(r);
                    let y = labels[r] as usize;
                    self.logits_into(x, &mut p);
                    let lse = log_sum_exp(&p);
                    batch_loss += lse - p[y];
                    for c in 0..k {
                        let mut g = (p[c] - lse).exp();
                        if c == y {
                            g -= 1.0;
                        }
                        g *= scale;
                        gb[c] += g;
                        for (acc, &xv) in gw[c * d..(c + 1) * d].iter_mut().zip(x) {
                            *acc += g * xv;
                        }
                    }
                }
                let w = self.weights.as_mut_slice();
                let penalty = if cfg.l2 > 0.0 {
                    0.5 * cfg.l2 * w.iter().map(|v| v * v).sum::<f64>()
                } else {
                    0.0
                };
                for (wv, g) in w.iter_mut().zip(&gw) {
                    *wv -= cfg.learning_rate * (g + cfg.l2 * *wv);
                }
                for (bv, g) in self.bias.iter_mut().zip(&gb) {
                    *bv -= cfg.learning_rate * g;
                }
                total += batch_loss + penalty * batch.len() as f64;
            }
            let mean = total / labels.len() as f64;
            if !mean.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            self.train_loss.push(mean);
        }
        Ok(())
    }
}

/// One probe per base-model layer, tied to the base model it was trained against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSet {
    probes: Vec<Probe>,
    base_fingerprint: String,
    num_classes: usize,
}

impl ProbeSet {
    pub fn new(probes: Vec<Probe>, base_fingerprint: &str) -> Result<Self> {
        let num_classes = probes
            .first()
            .map(|p| p.bias.len())
            .ok_or_else(|| Error::invalid("probe set needs at least one probe"))?;
        if probes.iter().any(|p| p.bias.len() != num_classes) {
            return Err(Error::invalid("probes disagree on class count"));
        }
        Ok(ProbeSet {
            probes,
            base_fingerprint: base_fingerprint.to_string(),
            num_classes,
        })
    }

    pub fn probes(&self) -> &[Probe] {
        &self.probes
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn base_fingerprint(&self) -> &str {
        &self.base_fingerprint
    }

    /// Fails with a stale-probe error unless `model` is the base these probes were fitted on.
    pub fn check_base(&self, model: &BaseModel) -> Result<()> {
        self.check_fingerprint(model.fingerprint())
    }

    fn check_fingerprint(&self, found: &str) -> Result<()> {
        if found != self.base_fingerprint {
            return Err(Error::StaleProbe {
                expected: self.base_fingerprint.clone(),
                found: found.to_string(),
            });
        }
        Ok(())
    }

    /// Probe outputs `ŷ_1 .. ŷ_n` for one trace.
    pub fn probe_forward(&self, trace: &ActivationTrace) -> Result<Vec<Vec<f64>>> {
        self.check_fingerprint(trace.source())?;
        if trace.len() != self.probes.len() {
            return Err(Error::invalid(format!(
                "trace has {} layers, probe set has {}",
                trace.len(),
                self.probes.len()
            )));
        }
        self.probes
            .iter()
            .zip(trace.layers())
            .map(|(p, x)| p.forward(x))
            .collect()
    }

    /// Probe outputs for every row of `x`: element `i` is the `(N x k)` output of probe `i + 1`.
    pub fn forward_batch(&self, model: &BaseModel, x: &Matrix) -> Result<Vec<Matrix>> {
        self.check_base(model)?;
        let layers = model.forward_batch(x)?;
        self.probes
            .iter()
            .zip(&layers)
            .map(|(probe, acts)| {
                let mut out = Matrix::zeros(acts.rows(), self.num_classes);
                for (i, row) in acts.iter_rows().enumerate() {
                    let o = out.row_mut(i);
                    probe.logits_into(row, o);
                    softmax_in_place(o);
                }
                Ok(out)
            })
            .collect()
    }

    /// Per-layer fraction of samples whose probe argmax equals the label.
    pub fn accuracy_report(&self, model: &BaseModel, data: &Dataset) -> Result<Vec<f64>> {
        if data.is_empty() {
            return Err(Error::invalid("probe accuracy of an empty dataset"));
        }
        if !data.all_in_domain() {
            return Err(Error::invalid("probe accuracy needs in-domain labels"));
        }
        let outs = self.forward_batch(model, data.features())?;
        Ok(outs
            .iter()
            .map(|m| {
                let hits = m
                    .iter_rows()
                    .zip(data.labels())
                    .filter(|(row, &y)| argmax(row) == y as usize)
                    .count();
                hits as f64 / data.len() as f64
            })
            .collect())
    }
}

/// Fits one probe per layer on `train_meta` with the base model frozen. Each
/// probe starts at zero and runs mini-batch SGD on multinomial cross-entropy.
pub fn train_probes(model: &BaseModel, train_meta: &Dataset, cfg: &TrainConfig) -> Result<ProbeSet> {
    cfg.validate()?;
    if train_meta.is_empty() {
        return Err(Error::invalid("probe training set is empty"));
    }
    if !train_meta.all_in_domain() {
        return Err(Error::invalid("probes train on in-domain samples only"));
    }
    if train_meta.num_classes() != model.num_classes() {
        return Err(Error::invalid("dataset and base model disagree on class count"));
    }
    let layers = model.forward_batch(train_meta.features())?;
    let k = model.num_classes();
    let mut probes = Vec::with_capacity(layers.len());
    for (i, acts) in layers.iter().enumerate() {
        let mut probe = Probe::zeros(i + 1, acts.cols(), k);
        let seed = Rng::derive_seed(cfg.seed, &format!("probe-{}", i + 1));
        probe.fit(acts, train_meta.labels(), cfg, seed)?;
        probes.push(probe);
    }
    ProbeSet::new(probes, model.fingerprint())
}
