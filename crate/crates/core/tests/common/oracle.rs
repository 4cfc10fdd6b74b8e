//! Independent reference computations shared by the property suites and the
//! acceptance run.

use confprobe::base_model::{BaseModel, LayerSpec};
use confprobe::eval::{roc_auc, ScoredSet};
use confprobe::meta::lr_objective;
use confprobe::numeric::{Matrix, Rng};

const STEP: f64 = 1e-5;

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-7)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
}

/// Mann-Whitney statistic: P(score+ > score-) + P(tie) / 2 over all pairs.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Largest gap between trapezoid AUC and the pairwise statistic over `count`
/// random sets of size at most 50.
pub fn worst_auc_gap(count: usize, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let (mut checked, mut worst) = (0, 0.0f64);
    while checked < count {
        let n = 2 + rng.below(49);
        // Coarse scores force plenty of ties.
        let levels = 1 + rng.below(12);
        let scores: Vec<f64> = (0..n).map(|_| rng.below(levels) as f64 / levels as f64).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.next_f64() < 0.5).collect();
        if labels.iter().all(|&b| b) || labels.iter().all(|&b| !b) {
            continue;
        }
        let set = ScoredSet::in_domain(scores.clone(), labels.clone()).unwrap();
        worst = worst.max((roc_auc(&set).unwrap() - pairwise_auc(&scores, &labels)).abs());
        checked += 1;
    }
    worst
}

/// Worst relative error of the base-model gradient against central differences
/// on a random 3-layer model and a batch of 8.
pub fn base_gradient_error() -> f64 {
    let mut rng = Rng::new(11);
    let arch = [LayerSpec::relu(7), LayerSpec::relu(5), LayerSpec::identity(4)];
    let mut model = BaseModel::init(6, &arch, 3).unwrap();
    // Nudge biases off zero so no unit sits exactly on the relu kink.
    let params: Vec<f64> = model.parameters().iter().map(|p| p + 0.05 * rng.normal()).collect();
    model.set_parameters(&params).unwrap();
    let x = random_matrix(8, 6, &mut rng);
    let labels: Vec<i32> = (0..8).map(|i| (i % 4) as i32).collect();
    let l2 = 1e-3;

    let (_, grads) = model.loss_and_gradient(&x, &labels, l2).unwrap();
    let analytic = grads.flatten();
    assert_eq!(analytic.len(), params.len());
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let mut p = params.clone();
        p[i] += STEP;
        model.set_parameters(&p).unwrap();
        let up = model.loss(&x, &labels, l2).unwrap();
        p[i] -= 2.0 * STEP;
        model.set_parameters(&p).unwrap();
        let down = model.loss(&x, &labels, l2).unwrap();
        worst = worst.max(rel_err(analytic[i], (up - down) / (2.0 * STEP)));
    }
    worst
}

/// Worst relative error of the penalised logistic-loss gradient.
pub fn lr_gradient_error() -> f64 {
    let mut rng = Rng::new(5);
    let x = random_matrix(30, 6, &mut rng);
    let labels: Vec<bool> = (0..30).map(|_| rng.next_f64() < 0.4).collect();
    let w: Vec<f64> = (0..6).map(|_| 0.5 * rng.normal()).collect();
    let b = 0.3;
    let l2 = 1e-2;
    let loss = |w: &[f64], b: f64| lr_objective(&x, &labels, w, b, l2).0;
    let (_, gw, gb) = lr_objective(&x, &labels, &w, b, l2);
    let mut worst: f64 = 0.0;
    for j in 0..w.len() {
        let mut up = w.clone();
        up[j] += STEP;
        let mut down = w.clone();
        down[j] -= STEP;
        worst = worst.max(rel_err(gw[j], (loss(&up, b) - loss(&down, b)) / (2.0 * STEP)));
    }
    worst.max(rel_err(gb, (loss(&w, b + STEP) - loss(&w, b - STEP)) / (2.0 * STEP)))
}
