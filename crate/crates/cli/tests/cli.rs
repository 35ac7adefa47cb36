//! End-to-end CLI checks: train a tiny model, evaluate it, verify
//! determinism of the CSV outputs and error behavior.

use std::path::Path;
use std::process::Command;

fn deepbeam() -> Command {
    Command::new(env!("CARGO_BIN_EXE_deepbeam"))
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("desk.toml");
    std::fs::write(
        &path,
        r#"
[scenario]
antennas = 2
users = 2
seed = 5

[train]
batch_size = 32
batches_per_epoch = 4
max_epochs = 3
validation_samples = 64
hidden_widths = [16]

[experiment]
kind = "rate-vs-snr"
methods = ["dnn", "mrt", "zf"]
test_samples = 32
snr_dbs = [0.0, 10.0]
taus = [0.1]
"#,
    )
    .unwrap();
    path
}

#[test]
fn train_eval_round_trip_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let ckpt = dir.path().join("net.bin");
    let log = dir.path().join("log.csv");

    let status = deepbeam()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--seed", "7", "--out"])
        .arg(&log)
        .arg("--checkpoint")
        .arg(&ckpt)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(ckpt.exists());
    let log_text = std::fs::read_to_string(&log).unwrap();
    assert!(log_text.starts_with("epoch,train_sum_rate,val_sum_rate,best_sum_rate\n"));
    assert_eq!(log_text.lines().count(), 1 + 1 + 3); // header + epoch 0 + 3 epochs

    let run_eval = |out: &Path| {
        let status = deepbeam()
            .args(["eval", "--config"])
            .arg(&cfg)
            .args(["--seed", "7", "--out"])
            .arg(out)
            .arg("--checkpoint")
            .arg(&ckpt)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let a = run_eval(&dir.path().join("r1.csv"));
    let b = run_eval(&dir.path().join("r2.csv"));
    assert_eq!(a, b, "same seed must give byte-identical CSVs");

    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("p_db,tau,method,mean_sum_rate,std_err\n"));
    // 1 tau x 2 snrs x 3 methods
    assert_eq!(text.lines().count(), 1 + 6);
}

#[test]
fn eval_without_checkpoint_fails_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let output = deepbeam()
        .args(["eval", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("r.csv"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("checkpoint"), "stderr: {stderr}");
}

#[test]
fn bad_config_fails_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[scenario]\nusers = 0\n").unwrap();
    let output = deepbeam()
        .args(["train", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(!output.status.success());
}

#[test]
fn timing_runs_without_dnn() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("t.toml");
    std::fs::write(
        &cfg,
        r#"
[scenario]
antennas = 2
users = 2

[experiment]
methods = ["mrt", "wmmse"]
test_samples = 20
snr_dbs = [0.0, 30.0]
taus = [1.0]
timing_warmup = 2
"#,
    )
    .unwrap();
    let out = dir.path().join("timing.csv");
    let status = deepbeam()
        .args(["timing", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("method,p_db,mean_us,std_us\n"));
    assert_eq!(text.lines().count(), 1 + 4); // 2 methods x 2 power levels
}

#[test]
fn convergence_kind_emits_training_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("curve.csv");
    let status = deepbeam()
        .args(["eval", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .arg("experiment.kind=\"convergence\"")
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("epoch,train_sum_rate,val_sum_rate,best_sum_rate\n"));
    assert_eq!(text.lines().count(), 1 + 1 + 3);
}

#[test]
fn override_arguments_reach_the_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("r.csv");
    let status = deepbeam()
        .args(["eval", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args([
            "experiment.methods=[\"mrt\"]",
            "experiment.snr_dbs=[5.0]",
            "experiment.test_samples=8",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("5,0.1,mrt,"));
}
