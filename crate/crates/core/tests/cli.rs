use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lmilatt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmilatt")).args(args).output().expect("spawn lmilatt")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = "seed = 3
[synth]
n_users = 40
m_range = [3, 8]
dim = 8

[train.autoencoder]
hidden = 8
epochs = 5

[train.head]
epochs = 15
";

#[test]
fn synth_train_eval_predict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let (data, run, eval, pred, peval) = (
        dir.path().join("data"),
        dir.path().join("run"),
        dir.path().join("eval"),
        dir.path().join("pred"),
        dir.path().join("peval"),
    );

    ok(&lmilatt(&["--config", path(&cfg), "--out", path(&data), "synth"]));
    let corpus = data.join("corpus.lmil");
    assert!(corpus.exists() && data.join("signal_rows.json").exists());

    ok(&lmilatt(&["--config", path(&cfg), "--out", path(&run), "train", "--corpus", path(&corpus)]));
    for f in ["model.lmck", "autoencoder.lmck", "loss_curve.csv", "history.json", "test.lmil", "effective_config.toml"] {
        assert!(run.join(f).exists(), "missing {f}");
    }

    let model = run.join("model.lmck");
    let test = run.join("test.lmil");
    ok(&lmilatt(&[
        "--out",
        path(&eval),
        "eval",
        "--checkpoint",
        path(&model),
        "--corpus",
        path(&test),
        "--history",
        path(&run.join("history.json")),
    ]));
    for f in ["report.json", "confusion.csv", "roc.csv", "loss_curve.csv"] {
        assert!(eval.join(f).exists(), "missing {f}");
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(eval.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["users"], 8);

    ok(&lmilatt(&["--out", path(&pred), "predict", "--checkpoint", path(&model), "--corpus", path(&test)]));
    let lines = fs::read_to_string(pred.join("predictions.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 8);
    ok(&lmilatt(&["--out", path(&peval), "eval", "--predictions", path(&pred.join("predictions.jsonl"))]));
    let again: serde_json::Value = serde_json::from_slice(&fs::read(peval.join("report.json")).unwrap()).unwrap();
    assert_eq!(again["counts"], report["counts"]);
}

#[test]
fn effective_config_reproduces_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let data = dir.path().join("data");
    ok(&lmilatt(&["--config", path(&cfg), "--seed", "9", "--out", path(&data), "synth"]));
    let corpus = data.join("corpus.lmil");

    let first = dir.path().join("a");
    ok(&lmilatt(&["--config", path(&cfg), "--seed", "9", "--out", path(&first), "train", "--corpus", path(&corpus)]));
    let second = dir.path().join("b");
    let effective = first.join("effective_config.toml");
    ok(&lmilatt(&[
        "--config",
        path(&effective),
        "--out",
        path(&second),
        "--threads",
        "3",
        "train",
        "--corpus",
        path(&corpus),
    ]));
    assert_eq!(fs::read(first.join("model.lmck")).unwrap(), fs::read(second.join("model.lmck")).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");

    let good = lmilatt(&["--out", path(&out), "gradcheck"]);
    ok(&good);
    assert!(out.join("gradcheck.json").exists());

    let bad = lmilatt(&["--out", path(&out), "gradcheck", "--inject-fault"]);
    assert_eq!(bad.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("lmilatt: error[numerical]:"));

    assert_eq!(lmilatt(&["--no-such-flag"]).status.code(), Some(1));

    let missing = lmilatt(&["--out", path(&out), "predict", "--checkpoint", "nope.lmck", "--corpus", "nope.lmil"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("lmilatt: error[data]:"));

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "sed = 1\n").unwrap();
    assert_eq!(lmilatt(&["--config", path(&cfg), "--out", path(&out), "gradcheck"]).status.code(), Some(1));
}
