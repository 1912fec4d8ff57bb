use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kcalmap_core::dmap::load_dmap;
use kcalmap_core::eval::{AggregateReport, EvaluationReport};
use sha2::{Digest, Sha256};

fn kcalmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kcalmap"))
        .args(args)
        .env_remove("KCALMAP_DEVICE")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = kcalmap(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, n: u32, size: u32, seed: u64) -> PathBuf {
    ok(&["synth", "--n", &n.to_string(), "--size", &size.to_string(), "--seed", &seed.to_string(), "--out", s(dir)]);
    dir.join("manifest.json")
}

fn digest_tree(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let h = Sha256::digest(fs::read(&p).unwrap());
                let hex: String = h.iter().map(|b| format!("{b:02x}")).collect();
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), hex);
            }
        }
    }
    out
}

#[test]
fn zero_scenes_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = kcalmap(&["synth", "--n", "0", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_subcommand_arguments_are_usage_errors() {
    assert_eq!(kcalmap(&["synth"]).status.code(), Some(2));
    assert_eq!(kcalmap(&["frobnicate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = kcalmap(&["densify", "--manifest", s(&dir.path().join("nope.json")), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_is_byte_identical_across_repeats() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synth(a.path(), 6, 48, 7);
    synth(b.path(), 6, 48, 7);
    let da = digest_tree(a.path());
    assert_eq!(da.len(), 1 + 6 + da.keys().filter(|k| k.starts_with("masks")).count());
    assert_eq!(da, digest_tree(b.path()));
    // Running again into the same directory overwrites identically.
    synth(a.path(), 6, 48, 7);
    assert_eq!(da, digest_tree(a.path()));
}

#[test]
fn densify_writes_exact_maps_and_reports_rejections() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(&dir.path().join("data"), 5, 32, 3);
    let maps = dir.path().join("maps");
    ok(&["densify", "--manifest", s(&manifest), "--out", s(&maps)]);

    // Independent oracle: annotation totals straight from the JSON.
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    for occ in doc["occasions"].as_array().unwrap() {
        let id = occ["id"].as_str().unwrap();
        let truth: f64 = occ["items"].as_array().unwrap().iter().map(|i| i["kcal"].as_f64().unwrap()).sum();
        let map = load_dmap(&maps.join(format!("{id}.dmap"))).unwrap();
        let total: f64 = map.values().iter().map(|&v| f64::from(v)).sum();
        assert!((total - truth).abs() <= 1e-6 * truth, "{id}: {total} vs {truth}");
    }
    let rejections = fs::read_to_string(maps.join("rejections.json")).unwrap();
    assert_eq!(serde_json::from_str::<Vec<serde_json::Value>>(&rejections).unwrap().len(), 0);

    // Strip one calorie value.
    let mut broken = doc.clone();
    broken["occasions"][2]["items"][0].as_object_mut().unwrap().remove("kcal");
    fs::write(&manifest, serde_json::to_string(&broken).unwrap()).unwrap();
    let out2 = dir.path().join("maps2");
    let stdout = ok(&["densify", "--manifest", s(&manifest), "--out", s(&out2)]);
    assert!(stdout.contains("1 occasion(s) rejected"), "{stdout}");
    let rej: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(out2.join("rejections.json")).unwrap()).unwrap();
    assert_eq!(rej.len(), 1);
    assert_eq!(rej[0]["id"], doc["occasions"][2]["id"]);
    assert_eq!(fs::read_dir(&out2).unwrap().count(), 4 + 1);

    let strict = kcalmap(&["densify", "--manifest", s(&manifest), "--out", s(&out2), "--strict"]);
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn unsupported_device_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 4, 32, 1);
    let out = Command::new(env!("CARGO_BIN_EXE_kcalmap"))
        .args(["eval", "--manifest", s(&manifest), "--encoder", "ground-truth", "--out", s(dir.path())])
        .env("KCALMAP_DEVICE", "cuda:0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("KCALMAP_DEVICE"));
}

#[test]
fn help_lists_protocol_defaults() {
    let h = ok(&["train-encoder", "--help"]);
    for want in ["--epochs", "[default: 200]", "--batch-size", "[default: 1]", "--lr", "[default: 0.0002]"] {
        assert!(h.contains(want), "missing {want}:\n{h}");
    }
    for sub in ["synth", "densify", "train-decoder", "eval", "report"] {
        ok(&[sub, "--help"]);
    }
}

#[test]
fn ground_truth_pipeline_evaluates_to_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(&dir.path().join("data"), 20, 32, 5);
    let out = dir.path().join("eval");
    ok(&[
        "eval", "--manifest", s(&manifest), "--size", "32", "--encoder", "ground-truth", "--runs", "5", "--out", s(&out),
    ]);
    let agg = AggregateReport::read_json(&out.join("aggregate.json")).unwrap();
    assert_eq!(agg.run_count, 5);
    assert!(agg.mean_mae < 1e-6 && agg.mean_mape < 1e-6, "{} {}", agg.mean_mae, agg.mean_mape);
    assert_eq!(agg.runs[0].records.len(), 4);
    assert!(image::open(out.join("histogram.png")).is_ok());
    // No estimate is off, so there is nothing to draw.
    assert_eq!(fs::read_dir(out.join("panels")).unwrap().count(), 0);

    // The grayscale path loses information on the same maps.
    let gray = dir.path().join("gray");
    ok(&[
        "eval", "--manifest", s(&manifest), "--size", "32", "--encoder", "ground-truth", "--decoder", "grayscale",
        "--grayscale-scale", "0.1", "--runs", "1", "--out", s(&gray),
    ]);
    let g = AggregateReport::read_json(&gray.join("aggregate.json")).unwrap();
    assert!(g.mean_mape > 0.0);
    let panels: Vec<_> = fs::read_dir(gray.join("panels")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(!panels.is_empty() && panels.len() <= 6, "{panels:?}");
    assert!(panels.iter().all(|p| p.to_string_lossy().ends_with(".png")));

    let table = ok(&["report", s(&out.join("aggregate.json")), s(&gray.join("run_0.json")), "--table", "3"]);
    assert!(table.contains("ground-truth + summation"), "{table}");
    assert!(table.contains("166.3"), "{table}");
}

#[test]
fn end_to_end_with_tiny_networks() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(&dir.path().join("data"), 12, 32, 9);
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        "seed = 4\n[dataset]\nimage_size = 32\n[encoder]\nepochs = 5\ngenerator_width = 4\ndiscriminator_width = 4\n\
         [decoder]\nwidth = 2\nhidden = 4\nepochs = 2\nbatch_size = 4\n",
    )
    .unwrap();
    let enc = dir.path().join("enc.safetensors");
    // The flag wins over the file.
    ok(&["--config", s(&cfg), "train-encoder", "--manifest", s(&manifest), "--epochs", "1", "--out", s(&enc)]);
    let history = fs::read_to_string(dir.path().join("enc.history.csv")).unwrap();
    let lines: Vec<_> = history.lines().collect();
    assert_eq!(lines[0], "epoch,step,loss_adv_g,loss_l1,loss_d");
    // 12 scenes: 9 train, four flips each, batch 1, one epoch.
    assert_eq!(lines.len() - 1, 36);
    assert!(dir.path().join("enc.split.json").is_file());

    let dec = dir.path().join("dec.safetensors");
    ok(&[
        "--config", s(&cfg), "train-decoder", "--manifest", s(&manifest), "--encoder", s(&enc), "--decoder", "resnet18",
        "--out", s(&dec),
    ]);
    let sum = dir.path().join("sum.safetensors");
    ok(&["--config", s(&cfg), "train-decoder", "--manifest", s(&manifest), "--encoder", s(&enc), "--decoder", "summation", "--out", s(&sum)]);

    let mut reports = vec![];
    for (name, d) in [("a", &dec), ("b", &sum)] {
        let out = dir.path().join(name);
        ok(&["--config", s(&cfg), "eval", "--manifest", s(&manifest), "--encoder", s(&enc), "--decoder", s(d), "--runs", "2", "--out", s(&out)]);
        let agg = AggregateReport::read_json(&out.join("aggregate.json")).unwrap();
        assert_eq!(agg.run_count, 2);
        // A fixed checkpoint gives identical runs.
        assert_eq!(agg.runs[0].records, agg.runs[1].records);
        reports.push(EvaluationReport::read_json(&out.join("run_0.json")).unwrap());
    }
    assert!(reports[0].pipeline.decoder.contains("resnet18"));
    assert!(reports[1].pipeline.decoder.contains("summation"));
    let csv = fs::read_to_string(dir.path().join("b/run_0.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "id,true_kcal,est_kcal,error");

    // Repeating evaluation overwrites byte-identically.
    let before = digest_tree(&dir.path().join("b"));
    ok(&["--config", s(&cfg), "eval", "--manifest", s(&manifest), "--encoder", s(&enc), "--decoder", s(&sum), "--runs", "2", "--out", s(&dir.path().join("b"))]);
    assert_eq!(before, digest_tree(&dir.path().join("b")));

    let bad = kcalmap(&["--config", s(&cfg), "eval", "--manifest", s(&manifest), "--encoder", s(&enc), "--decoder", "alexnet", "--out", s(dir.path())]);
    assert_eq!(bad.status.code(), Some(2));
}
