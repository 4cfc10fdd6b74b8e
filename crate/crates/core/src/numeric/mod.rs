//! Deterministic numeric kernels shared by every stage: dense matrices, softmax and
//! sigmoid, descending rank order, and a seedable portable generator.

mod matrix;
mod rng;

pub use matrix::Matrix;
pub(crate) use matrix::dot;
pub use rng::Rng;

use crate::error::{Error, Result};

/// Probability vector `exp(v_i - max v) / sum_j exp(v_j - max v)`.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    check_finite_nonempty(v, "softmax")?;
    let mut out = v.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// Unchecked in-place softmax for hot loops; input must be non-empty and finite.
pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// `ln sum_j exp(v_j)`, stabilised by the maximum.
pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Logistic function; evaluated on the branch that cannot overflow.
pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Indices ordering `v` from largest to smallest; equal values keep ascending index order.
pub fn rank_order_desc(v: &[f64]) -> Result<Vec<usize>> {
    check_finite_nonempty(v, "rank_order_desc")?;
    let mut idx: Vec<usize> = (0..v.len()).collect();
    // Stable sort keeps lower indices first among ties.
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    Ok(idx)
}

/// Index of the maximum entry, lowest index on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn check_finite_nonempty(v: &[f64], op: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::invalid(format!("{op}: empty input")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("{op}: non-finite input")));
    }
    Ok(())
}
