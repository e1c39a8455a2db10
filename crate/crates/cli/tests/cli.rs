use std::path::Path;
use std::process::{Command, Output};

fn driftgas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_driftgas"))
        .args(args)
        .env_remove("DRIFTGAS_OUT")
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn preq(dir: &Path) -> f64 {
    manifest(dir)["results"]["prequential_error"].as_f64().unwrap()
}

#[test]
fn rerun_is_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("stream.csv");
    let gen = driftgas(&["generate", "--synth", "expansion-4c", "--seed", "3", "--output", data.to_str().unwrap()]);
    assert!(gen.status.success());

    let outs = [tmp.path().join("a"), tmp.path().join("b")];
    for out in &outs {
        let o = driftgas(&[
            "run", "--dataset", data.to_str().unwrap(), "--method", "aigas", "--seed", "7", "--batches", "40",
            "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let run = "stream_aigas_seed7";
    for f in ["predictions.csv", "prequential.csv", "f1_window.csv", "transforms.jsonl", "gng_final.json"] {
        let a = std::fs::read(outs[0].join(run).join(f)).unwrap();
        let b = std::fs::read(outs[1].join(run).join(f)).unwrap();
        assert!(a == b, "{f} differs between reruns");
    }
    let mut ma = manifest(&outs[0].join(run));
    let mut mb = manifest(&outs[1].join(run));
    ma["wall_time_ms"] = 0.into();
    mb["wall_time_ms"] = 0.into();
    assert_eq!(ma, mb);
    assert_eq!(ma["dataset"]["kind"], "csv");
    assert_eq!(ma["dataset"]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn aigas_beats_static_on_drifting_stream() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    for m in ["aigas", "stc"] {
        let o = driftgas(&["run", "--synth", "rectilinear-2c", "--method", m, "--seed", "7", "--out", out]);
        assert!(o.status.success());
        let stdout = String::from_utf8_lossy(&o.stdout);
        assert!(stdout.contains("rectilinear-2c"), "{stdout}");
    }
    let aigas = preq(&tmp.path().join("rectilinear-2c_aigas_seed7"));
    let stc = preq(&tmp.path().join("rectilinear-2c_stc_seed7"));
    assert!(aigas < stc, "aigas {aigas} vs stc {stc}");
}

#[test]
fn summary_uses_two_decimals() {
    let tmp = tempfile::tempdir().unwrap();
    let o = driftgas(&["run", "--synth", "static-2c", "--method", "inc", "--batches", "10", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    let row = stdout.lines().find(|l| l.starts_with("inc")).unwrap();
    let err = row.split_whitespace().nth(2).unwrap();
    assert_eq!(err.split('.').nth(1).unwrap().len(), 2, "{row}");
    assert!(!tmp.path().join("static-2c_inc_seed0/gng_final.json").exists());
}

#[test]
fn zero_batches_is_a_usage_error() {
    let o = driftgas(&["run", "--synth", "static-2c", "--batches", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_source_or_unknown_preset_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert!(!driftgas(&["run", "--out", out]).status.success());
    let o = driftgas(&["run", "--synth", "no-such-stream", "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rotation-4c"));
    let o = driftgas(&["run", "--dataset", "/nonexistent/x.csv", "--out", out]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn out_dir_defaults_to_env() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_driftgas"))
        .args(["run", "--synth", "static-2c", "--method", "stc", "--batches", "5"])
        .env("DRIFTGAS_OUT", tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("static-2c_stc_seed0/manifest.json").exists());
}

#[test]
fn config_file_feeds_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.toml");
    std::fs::write(&cfg, "seed = 11\nbatches = 20\nk = 3\n").unwrap();
    let o = driftgas(&[
        "run", "--synth", "static-2c", "--method", "sld", "--config", cfg.to_str().unwrap(), "--k", "7",
        "--out", tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&tmp.path().join("static-2c_sld_seed11"));
    assert_eq!(m["config"]["num_batches"], 20);
    assert_eq!(m["config"]["k_predict"], 7);
    assert_eq!(m["config"]["seed"], 11);
}

fn sweep_rows(root: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(root.join("sweep.csv")).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn sweep_counts_and_aggregates() {
    let tmp = tempfile::tempdir().unwrap();
    let o = driftgas(&[
        "sweep", "--synth", "static-2c,rectilinear-2c", "--method", "aigas,stc", "--batches", "20",
        "--out", tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = sweep_rows(tmp.path());
    assert_eq!(rows.iter().filter(|r| r[0] == "cell").count(), 4);
    assert_eq!(rows.iter().filter(|r| r[0] == "aggregate").count(), 2);

    for method in ["aigas", "stc"] {
        let cells: Vec<f64> = rows.iter().filter(|r| r[0] == "cell" && r[2] == method).map(|r| r[4].parse().unwrap()).collect();
        let agg = rows.iter().find(|r| r[0] == "aggregate" && r[2] == method).unwrap();
        let mean: f64 = agg[4].parse().unwrap();
        assert!((mean - cells.iter().sum::<f64>() / cells.len() as f64).abs() <= 1e-12);
    }
    // Each cell's manifest parses and matches the table.
    let m = manifest(&tmp.path().join("rectilinear-2c_stc_seed0"));
    let row = rows.iter().find(|r| r[1] == "rectilinear-2c" && r[2] == "stc").unwrap();
    assert_eq!(m["results"]["prequential_error"].as_f64().unwrap(), row[4].parse::<f64>().unwrap());
    assert!(std::fs::read_to_string(tmp.path().join("sweep.txt")).unwrap().contains("Std. Dev."));
}

#[test]
fn sweep_isolates_failed_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("good.csv");
    assert!(driftgas(&["generate", "--synth", "static-2c", "--output", data.to_str().unwrap()]).status.success());
    let missing = tmp.path().join("missing.csv");
    let out = tmp.path().join("sweep");
    let o = driftgas(&[
        "sweep", "--dataset", data.to_str().unwrap(), "--dataset", missing.to_str().unwrap(), "--method", "stc,inc",
        "--batches", "10", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let rows = sweep_rows(&out);
    for r in rows.iter().filter(|r| r[0] == "cell") {
        let expected = if r[1] == "missing" { "failed" } else { "ok" };
        assert_eq!(r[3], expected, "{r:?}");
    }
    assert!(rows.iter().filter(|r| r[0] == "aggregate").all(|r| r[3] == "partial" && r[8] == "1"));
}
