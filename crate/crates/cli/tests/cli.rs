use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dermvgg::data::Normalization;
use dermvgg::net::NetworkGraph;
use dermvgg::weights::{save, ArchiveMetadata};
use dermvgg::ArchConfig;

const CLASSES: [&str; 3] = ["Actinic Keratosis", "Normal", "Psoriasis"];
const COLORS: [[u8; 3]; 3] = [[200, 40, 40], [40, 200, 40], [40, 40, 200]];
const SMALL: [&str; 4] = ["--input-size", "32", "--width-divisor", "8"];

/// 3 classes; `train_per` and `test_per` images per class, solid colors with
/// a little per-image texture.
fn fixture(root: &Path, train_per: usize, test_per: usize) {
    for (split, per) in [("train", train_per), ("test", test_per)] {
        for (c, name) in CLASSES.iter().enumerate() {
            let dir = root.join(split).join(name);
            fs::create_dir_all(&dir).unwrap();
            for i in 0..per {
                let img = image::RgbImage::from_fn(40, 40, |x, y| {
                    let jitter = ((x * 7 + y * 13 + i as u32 * 5) % 16) as u8;
                    let [r, g, b] = COLORS[c];
                    image::Rgb([r.saturating_add(jitter), g.saturating_add(jitter), b.saturating_add(jitter)])
                });
                img.save(dir.join(format!("img_{i:02}.png"))).unwrap();
            }
        }
    }
}

fn dermvgg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dermvgg")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train_small(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--data-dir", s(data), "--out", s(out)];
    args.extend_from_slice(&SMALL);
    args.extend_from_slice(extra);
    dermvgg(&args)
}

fn zero_model(path: &Path, classes: &[&str]) {
    let graph = NetworkGraph::<f32>::build(ArchConfig::shrunken(classes.len())).unwrap();
    let names = classes.iter().map(|c| c.to_string()).collect();
    save(&graph, path, ArchiveMetadata::new(graph.arch(), names, Normalization::Scale01)).unwrap();
}

#[test]
fn train_smoke_writes_model_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let (data, out) = (dir.path().join("data"), dir.path().join("run"));
    fixture(&data, 6, 2);
    let o = train_small(&data, &out, &["--epochs", "1", "--batch-size", "8", "--seed", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("final.wts").is_file());
    assert!(out.join("epoch_1.wts").is_file());
    let log = fs::read_to_string(out.join("train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 1);
    let rec: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(rec["epoch"], 1);
    assert!(stdout(&o).contains("epochs = 1\n"));
    assert!(stdout(&o).contains("epoch 1/1"));
    assert!(stderr(&o).contains("warning"), "frozen base without weights must warn");
}

#[test]
fn omitted_epochs_resolve_to_150() {
    let dir = tempfile::tempdir().unwrap();
    let o = dermvgg(&["train", "--data-dir", s(&dir.path().join("missing"))]);
    let out = stdout(&o);
    assert!(out.contains("epochs = 150\n"), "{out}");
    assert!(out.contains("batch_size = 8\n") && out.contains("lr = 0.0001\n") && out.contains("input_size = 150\n"));
    assert_eq!(o.status.code(), Some(2), "missing dataset is a data error");
}

#[test]
fn config_file_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    fixture(&data, 1, 1);

    assert_eq!(dermvgg(&["train", "--data-dir", s(&data), "--lr", "-1"]).status.code(), Some(1));
    assert_eq!(dermvgg(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(dermvgg(&["train"]).status.code(), Some(1));

    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, format!("data_dir = {:?}\nepochs = 0\n", s(&data))).unwrap();
    assert_eq!(dermvgg(&["train", "--config", s(&cfg)]).status.code(), Some(1));

    let empty = dir.path().join("empty");
    fs::create_dir_all(empty.join("train")).unwrap();
    let o = dermvgg(&["train", "--data-dir", s(&empty)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn evaluate_writes_reports_and_detects_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    fixture(&data, 1, 2);
    let model = dir.path().join("zero.wts");
    zero_model(&model, &CLASSES);

    let out = dir.path().join("eval");
    let o = dermvgg(&["evaluate", "--data-dir", s(&data), "--model", s(&model), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut files: Vec<String> =
        fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    files.sort();
    assert_eq!(
        files,
        [
            "confusion.csv",
            "report.csv",
            "report.json",
            "roc_Actinic_Keratosis.csv",
            "roc_Normal.csv",
            "roc_Psoriasis.csv"
        ]
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    // uniform outputs: every sample goes to the first class
    assert_eq!(report["confusion"]["counts"], serde_json::json!([[2, 0, 0], [2, 0, 0], [2, 0, 0]]));
    assert!((report["accuracy"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);

    let other = dir.path().join("two.wts");
    zero_model(&other, &["Actinic Keratosis", "Normal"]);
    let o = dermvgg(&["evaluate", "--data-dir", s(&data), "--model", s(&other), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));

    let corrupt = dir.path().join("corrupt.wts");
    let mut bytes = fs::read(&model).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    fs::write(&corrupt, bytes).unwrap();
    let o = dermvgg(&["evaluate", "--data-dir", s(&data), "--model", s(&corrupt)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("head_out.bias"), "{}", stderr(&o));

    let o = dermvgg(&["evaluate", "--data-dir", s(&dir.path().join("nope")), "--model", s(&model)]);
    assert_eq!(o.status.code(), Some(2));
}

fn parse_probs(out: &str) -> (String, Vec<f64>) {
    let body = out.split("predicted: ").nth(1).unwrap();
    let mut lines = body.lines();
    let predicted = lines.next().unwrap().to_string();
    let probs = lines.map(|l| l.rsplit(": ").next().unwrap().parse().unwrap()).collect();
    (predicted, probs)
}

#[test]
fn predict_zero_model_is_uniform_and_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    fixture(&data, 1, 1);
    let model = dir.path().join("zero.wts");
    zero_model(&model, &CLASSES);
    let img = data.join("test/Psoriasis/img_00.png");

    let a = dermvgg(&["predict", "--model", s(&model), s(&img)]);
    assert!(a.status.success(), "{}", stderr(&a));
    let (predicted, probs) = parse_probs(&stdout(&a));
    assert_eq!(predicted, "Actinic Keratosis");
    assert_eq!(probs.len(), 3);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-4);
    assert!(probs.iter().all(|&p| p == 0.3333));
    let b = dermvgg(&["predict", "--model", s(&model), s(&img)]);
    assert_eq!(stdout(&a), stdout(&b));

    let bad = dir.path().join("bad.png");
    fs::write(&bad, b"not an image").unwrap();
    assert_eq!(dermvgg(&["predict", "--model", s(&model), s(&bad)]).status.code(), Some(2));
}

#[test]
fn same_seed_gives_identical_archives_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    fixture(&data, 6, 2);
    let runs: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("run{i}"))).collect();
    for out in &runs {
        let o = train_small(&data, out, &["--epochs", "1", "--seed", "11", "--no-freeze-base"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(fs::read(runs[0].join("final.wts")).unwrap(), fs::read(runs[1].join("final.wts")).unwrap());
    let strip = |p: &Path| -> Vec<(u64, f64, f64)> {
        fs::read_to_string(p.join("train_log.jsonl"))
            .unwrap()
            .lines()
            .map(|l| {
                let v: serde_json::Value = serde_json::from_str(l).unwrap();
                (v["epoch"].as_u64().unwrap(), v["loss"].as_f64().unwrap(), v["acc"].as_f64().unwrap())
            })
            .collect()
    };
    assert_eq!(strip(&runs[0]), strip(&runs[1]));

    let o = train_small(&data, &dir.path().join("run_other"), &["--epochs", "1", "--seed", "12", "--no-freeze-base"]);
    assert!(o.status.success());
    assert_ne!(fs::read(runs[0].join("final.wts")).unwrap(), fs::read(dir.path().join("run_other/final.wts")).unwrap());
}

#[test]
fn memorized_model_evaluates_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    fixture(&data, 4, 2);
    let out = dir.path().join("run");
    let o = train_small(
        &data,
        &out,
        &["--epochs", "150", "--lr", "0.001", "--seed", "3", "--no-freeze-base", "--no-augment", "--batch-size", "4"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let model = out.join("final.wts");
    let o = dermvgg(&["evaluate", "--data-dir", s(&data), "--model", s(&model), "--out", s(&dir.path().join("eval"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let acc = text.lines().find(|l| l.trim_start().starts_with("accuracy")).unwrap();
    assert!(acc.contains("1.00"), "{text}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("eval/report.json")).unwrap()).unwrap();
    assert_eq!(report["confusion"]["counts"], serde_json::json!([[2, 0, 0], [0, 2, 0], [0, 0, 2]]));
}
