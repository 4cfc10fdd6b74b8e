//! Criterion checks that return a description of the first violation, shared by
//! the per-module suites and the acceptance run.

use confprobe::artifact;
use confprobe::data::{inject_label_noise, NoiseSpec};
use confprobe::eval::{
    operating_point, pr_curve, residual_precision_at_rejection, threshold_sweep, ScoredSet,
};
use confprobe::meta::{
    train_gbm_meta, FeatureBasis, FeatureLayout, FeatureMode, GbmParams, MetaFeatures, MetaLabels,
};
use confprobe::numeric::{Matrix, Rng};
use confprobe::probes::train_probes;

pub type Check = Result<(), String>;

fn expect<T: PartialEq + std::fmt::Debug>(what: &str, got: T, want: T) -> Check {
    if got == want {
        Ok(())
    } else {
        Err(format!("{what}: got {got:?}, want {want:?}"))
    }
}

fn four() -> ScoredSet {
    ScoredSet::in_domain(vec![0.9, 0.8, 0.4, 0.2], vec![true, false, true, false]).unwrap()
}

pub fn pr_four() -> Check {
    // Accept 1: 1/1 precision, 1/2 recall. Accept 2: 1/2, 1/2. Accept 3: 2/3, 1. Accept 4: 1/2, 1.
    let pts = pr_curve(&four()).map_err(|e| e.to_string())?.points;
    let got: Vec<(f64, f64, f64)> = pts.iter().map(|p| (p.threshold, p.precision, p.recall)).collect();
    expect(
        "pr curve",
        got,
        vec![(0.9, 1.0, 0.5), (0.8, 0.5, 0.5), (0.4, 2.0 / 3.0, 1.0), (0.2, 0.5, 1.0)],
    )
}

pub fn sweep_four() -> Check {
    let rows = threshold_sweep(&four(), None, &[0.0, 0.5, 0.85, 1.0]);
    let got: Vec<(usize, Option<f64>, Option<f64>)> = rows
        .iter()
        .map(|r| (r.in_domain.accepted, r.in_domain.precision, r.in_domain.recall))
        .collect();
    expect(
        "sweep",
        got,
        vec![
            (4, Some(0.5), Some(1.0)),
            (2, Some(0.5), Some(0.5)),
            (1, Some(1.0), Some(0.5)),
            (0, None, Some(0.0)),
        ],
    )?;
    expect("pooled rows", rows.iter().all(|r| r.pooled.is_none()), true)?;
    // Closed at the threshold.
    expect("accepted at 0.8", operating_point(&four(), 0.8).accepted, 2)
}

pub fn rejection_four() -> Check {
    let s = ScoredSet::in_domain(vec![0.1, 0.2, 0.9, 0.8], vec![false, false, true, true]).unwrap();
    expect("reject half", residual_precision_at_rejection(&s, 0.5).ok(), Some(1.0))?;
    expect("reject none", residual_precision_at_rejection(&s, 0.0).ok(), Some(0.5))?;
    expect("reject all fails", residual_precision_at_rejection(&s, 1.0).is_err(), true)
}

pub fn gbm_problem(n: usize, d: usize, seed: u64) -> (MetaFeatures, MetaLabels) {
    let mut rng = Rng::new(seed);
    let x: Vec<f64> = (0..n * d).map(|_| rng.normal()).collect();
    let labels: Vec<bool> = (0..n)
        .map(|i| x[i * d] + 0.5 * x[i * d + 1] + 0.7 * rng.normal() > 0.0)
        .collect();
    let layout = FeatureLayout {
        mode: FeatureMode::Whitebox,
        basis: FeatureBasis::Probability,
        blocks: d / 2,
        num_classes: 2,
    };
    (
        MetaFeatures::new(Matrix::from_vec(n, d, x).unwrap(), layout).unwrap(),
        MetaLabels::new(labels),
    )
}

/// |F0 - log(p / (1 - p))| for a zero-stage ensemble.
pub fn gbm_f0_gap() -> f64 {
    let (f, l) = gbm_problem(301, 4, 1);
    let m = train_gbm_meta(&f, &l, &GbmParams { stages: 0, ..GbmParams::default() }, 0).unwrap();
    let p = l.positives() as f64 / l.len() as f64;
    (m.init_score - (p / (1.0 - p)).ln()).abs()
}

pub fn gbm_monotone() -> Check {
    let (f, l) = gbm_problem(400, 6, 2);
    for depth in [1, 2, 3] {
        let params = GbmParams {
            stages: 60,
            max_depth: depth,
            subsample: 1.0,
            ..GbmParams::default()
        };
        let m = train_gbm_meta(&f, &l, &params, 0).map_err(|e| e.to_string())?;
        expect("loss entries", m.train_loss.len(), 61)?;
        if let Some(w) = m.train_loss.windows(2).find(|w| w[1] > w[0]) {
            return Err(format!("depth {depth}: loss {} after {}", w[1], w[0]));
        }
        if m.trees.iter().any(|t| t.depth() > depth) {
            return Err(format!("tree deeper than {depth}"));
        }
    }
    Ok(())
}

pub fn single_stump() -> Check {
    let (f, l) = gbm_problem(200, 6, 5);
    let params = GbmParams {
        stages: 1,
        max_depth: 1,
        subsample: 1.0,
        ..GbmParams::default()
    };
    let m = train_gbm_meta(&f, &l, &params, 0).map_err(|e| e.to_string())?;
    let values = m.feature_importance().values().to_vec();
    let hot: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    expect("stump importance", hot, vec![1.0])
}

pub fn noise_counts() -> Check {
    for n in [10, 333, 1001] {
        let data = super::small_data(n as u64);
        let base = data.train.subset(&(0..n).collect::<Vec<_>>());
        let noisy = inject_label_noise(&base, &NoiseSpec { rate: 0.3, seed: 9 }).map_err(|e| e.to_string())?;
        let changed = base.labels().iter().zip(noisy.labels()).filter(|(a, b)| a != b).count();
        expect("flipped", changed, (0.3 * n as f64 + 1e-9).floor() as usize)?;
        expect("features untouched", noisy.features() == base.features(), true)?;
    }
    Ok(())
}

pub fn frozen_base() -> Check {
    let data = super::small_data(1);
    let model = super::small_model(&data);
    let before = artifact::to_json("base-model", &model);
    let fingerprint = model.fingerprint().to_string();
    let probes = train_probes(&model, &data.test, &super::train_cfg(5, 9)).map_err(|e| e.to_string())?;
    expect("base bytes", artifact::to_json("base-model", &model) == before, true)?;
    expect("fingerprint", model.fingerprint(), fingerprint.as_str())?;
    expect("recorded fingerprint", probes.base_fingerprint(), fingerprint.as_str())?;
    expect("probe count", probes.len(), model.num_layers())
}
