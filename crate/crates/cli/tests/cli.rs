use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn confprobe(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_confprobe"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

const SPEC: &str = "train_size = 900\ntest_size = 300\nood_size = 200\ndim = 12\n";

const CONFIG: &str = r#"
seed = 5
[data]
train = { format = "csv", path = "data/train.csv" }
test = { format = "csv", path = "data/test.csv" }
ood = { format = "csv", path = "data/ood.csv" }
[condition]
kind = "noisy"
rate = 0.3
[base]
hidden = [24, 12]
epochs = 4
[probes]
epochs = 3
[meta]
lr_max_steps = 100
[meta.gbm]
stages = 10
[meta.gbm_search]
learning_rate = [0.1]
max_depth = [2]
stages = [5, 10]
"#;

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("spec.toml"), SPEC).unwrap();
    fs::write(dir.path().join("exp.toml"), CONFIG).unwrap();
    let out = confprobe(&["generate-data", "--out", "data", "--spec", "spec.toml"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir
}

#[test]
fn run_then_each_stage_succeeds() {
    let ws = workspace();
    let dir = ws.path();
    assert!(dir.join("data/ood.csv").exists());
    let out = confprobe(&["run", "--config", "exp.toml", "--out", "a"], dir);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("probes-gbm"));
    for f in ["summary.json", "probe_acc.csv", "sweep_softmax.csv", "importance_probes-gbm.csv"] {
        assert!(dir.join("a").join(f).exists(), "missing {f}");
    }
    for stage in ["train-base", "train-probes", "train-meta", "evaluate", "importance", "quadrants"] {
        let out = confprobe(&[stage, "--config", "exp.toml", "--out", "b"], dir);
        assert_eq!(code(&out), 0, "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    // Staged and one-shot runs agree byte for byte.
    for f in ["summary.json", "quadrants_probes-gbm.csv", "importance_blackbox-gbm.csv"] {
        assert_eq!(fs::read(dir.join("a").join(f)).unwrap(), fs::read(dir.join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn method_and_seed_overrides_apply() {
    let ws = workspace();
    let out = confprobe(
        &["run", "--config", "exp.toml", "--out", "o", "--seed", "9", "--methods", "softmax,temperature"],
        ws.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(ws.path().join("o/summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 9"));
    assert!(!summary.contains("probes-gbm"));
    assert!(!ws.path().join("o/artifacts/meta_probes-lr.json").exists());
}

#[test]
fn bad_config_exits_with_2() {
    let ws = workspace();
    fs::write(ws.path().join("bad.toml"), CONFIG.replace("rate = 0.3", "rate = 3.0")).unwrap();
    let out = confprobe(&["run", "--config", "bad.toml"], ws.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("condition.rate"));
    let out = confprobe(&["run", "--config", "exp.toml", "--methods", "softmax,oracle"], ws.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_artifacts_exit_with_3() {
    let ws = workspace();
    fs::create_dir(ws.path().join("empty")).unwrap();
    let out = confprobe(&["evaluate", "--config", "exp.toml", "--out", "empty"], ws.path());
    assert_eq!(code(&out), 3);
    let out = confprobe(&["run", "--config", "nowhere.toml"], ws.path());
    assert_eq!(code(&out), 3);
}

#[test]
fn stale_probes_exit_with_3() {
    let ws = workspace();
    let dir = ws.path();
    assert_eq!(code(&confprobe(&["run", "--config", "exp.toml", "--out", "s"], dir)), 0);
    let out = confprobe(&["train-base", "--config", "exp.toml", "--out", "s", "--seed", "1"], dir);
    assert_eq!(code(&out), 0);
    let out = confprobe(&["train-meta", "--config", "exp.toml", "--out", "s"], dir);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("stale") || String::from_utf8_lossy(&out.stderr).contains("probe"));
}

#[test]
fn single_class_data_exits_with_4() {
    let ws = workspace();
    let rows: String = (0..120).map(|i| format!("{},{},0\n", i as f64 / 120.0, 1.0)).collect();
    fs::write(ws.path().join("one.csv"), rows).unwrap();
    let cfg = CONFIG
        .replace("data/train.csv", "one.csv")
        .replace("data/test.csv", "one.csv")
        .replace("ood = { format = \"csv\", path = \"data/ood.csv\" }\n", "num_classes = 2\n");
    fs::write(ws.path().join("one.toml"), cfg).unwrap();
    let out = confprobe(&["run", "--config", "one.toml", "--out", "x"], ws.path());
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}
