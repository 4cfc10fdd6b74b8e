use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, softmax_in_place, Matrix};

/// `softmax(logits / T)` with a single scalar `T > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureScaler {
    pub temperature: f64,
}

impl TemperatureScaler {
    pub fn new(temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::invalid(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        Ok(TemperatureScaler { temperature })
    }

    pub fn apply(&self, logits: &[f64]) -> Vec<f64> {
        let mut p: Vec<f64> = logits.iter().map(|z| z / self.temperature).collect();
        softmax_in_place(&mut p);
        p
    }
}

/// Mean negative log-likelihood of `labels` under `softmax(logits / t)`.
pub fn temperature_nll(logits: &Matrix, labels: &[i32], t: f64) -> f64 {
    let mut scaled = vec![0.0; logits.cols()];
    let mut total = 0.0;
    for (row, &y) in logits.iter_rows().zip(labels) {
        for (s, z) in scaled.iter_mut().zip(row) {
            *s = z / t;
        }
        total += log_sum_exp(&scaled) - scaled[y as usize];
    }
    total / labels.len() as f64
}

const LOG_T_RANGE: (f64, f64) = (-3.0, 3.0);
const GOLDEN_ITERS: usize = 80;

/// Golden-section search for the NLL-minimising `T` over `ln T ∈ [-3, 3]`
/// (`T` from about 0.05 to 20). `T = 1` is kept if the search does no better.
pub fn fit_temperature(logits: &Matrix, labels: &[i32]) -> Result<TemperatureScaler> {
    if logits.rows() != labels.len() || labels.is_empty() {
        return Err(Error::invalid("logits and labels must be non-empty and equal in count"));
    }
    if labels.iter().any(|&y| y < 0 || y as usize >= logits.cols()) {
        return Err(Error::invalid("temperature fitting needs in-domain labels"));
    }
    let f = |log_t: f64| temperature_nll(logits, labels, log_t.exp());
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = LOG_T_RANGE;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERS {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let (log_t, best) = if fc <= fd { (c, fc) } else { (d, fd) };
    let t = if best <= f(0.0) { log_t.exp() } else { 1.0 };
    TemperatureScaler::new(t)
}
