#![allow(dead_code)]

pub mod checks;
pub mod oracle;

use std::collections::BTreeMap;
use std::path::Path;

use confprobe::base_model::{mlp_arch, train_base, BaseModel, TrainConfig};
use confprobe::data::synthetic::{generate, SyntheticData, SyntheticSpec};
use confprobe::data::write_csv;
use confprobe::pipeline::ExperimentConfig;

pub fn small_data(seed: u64) -> SyntheticData {
    generate(&SyntheticSpec {
        train_size: 1500,
        modes_per_class: 3,
        test_size: 500,
        ood_size: 300,
        dim: 16,
        seed,
        ..SyntheticSpec::default()
    })
    .unwrap()
}

pub fn train_cfg(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 32,
        learning_rate: 0.05,
        l2: 0.0,
        seed,
    }
}

pub fn small_model(data: &SyntheticData) -> BaseModel {
    let arch = mlp_arch(&[32, 16], data.train.num_classes());
    train_base(&data.train, &arch, &train_cfg(10, 3)).unwrap()
}


/// Writes `small_data(seed)` as CSVs into `dir` plus a quick experiment config.
pub fn small_experiment(dir: &Path, seed: u64, condition: &str) -> ExperimentConfig {
    let data = small_data(seed);
    write_csv(&data.train, &dir.join("train.csv")).unwrap();
    write_csv(&data.test, &dir.join("test.csv")).unwrap();
    write_csv(&data.ood, &dir.join("ood.csv")).unwrap();
    let text = format!(
        r#"
seed = {seed}
[data]
train = {{ format = "csv", path = "train.csv" }}
test = {{ format = "csv", path = "test.csv" }}
ood = {{ format = "csv", path = "ood.csv" }}
[condition]
{condition}
[base]
hidden = [32, 16]
epochs = 8
[probes]
epochs = 5
[meta]
lr_max_steps = 200
[meta.gbm]
stages = 20
[meta.gbm_search]
learning_rate = [0.1]
max_depth = [2]
stages = [10, 20]
"#
    );
    let path = dir.join("experiment.toml");
    std::fs::write(&path, text).unwrap();
    ExperimentConfig::from_file(&path).unwrap()
}

/// File name (relative to `dir`) to bytes for a run's reports and artifacts.
pub fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for sub in [dir.to_path_buf(), dir.join("artifacts")] {
        for entry in std::fs::read_dir(&sub).unwrap() {
            let path = entry.unwrap().path();
            if path.is_file() {
                let name = path.strip_prefix(dir).unwrap().display().to_string();
                out.insert(name, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// Two run directories hold the same files with the same bytes.
pub fn same_tree(a: &Path, b: &Path) -> checks::Check {
    let (fa, fb) = (read_tree(a), read_tree(b));
    if fa.keys().ne(fb.keys()) {
        return Err("file sets differ".into());
    }
    match fa.iter().find(|(name, bytes)| fb[*name] != **bytes) {
        Some((name, _)) => Err(format!("{name} differs")),
        None => Ok(()),
    }
}
