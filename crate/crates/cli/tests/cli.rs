use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nvpes_cli::parse_config;
use serde_json::Value;

fn nvpes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvpes"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn metadata(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("metadata.json")).unwrap()).unwrap()
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

const PES: &str = "\
[drive]
segment = 0.7 us, 10 MHz, 0 MHz, 0 MHz
[simulation]
initial = thermal
points = 71
[experiment]
kind = pes
";

#[test]
fn pes_run_writes_normalized_distribution() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), PES);
    let out = tmp.path().join("out");
    let res = nvpes(&["pes", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let csv = fs::read_to_string(out.join("pes.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t [us],P(0) [1],P(1) [1]"), "{header}");
    assert!(header.ends_with("leakage [1]"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 71);
    assert!(csv.ends_with('\n'));
    for row in &rows {
        let total: f64 = row[1..].iter().sum();
        assert!((total - 1.0).abs() < 1e-8);
    }
    assert!(out.join("moments.csv").exists());

    let meta = metadata(&out);
    let dev = meta["invariants"]["max_normalization_error"].as_f64().unwrap();
    assert!(dev < 1e-8, "{dev}");
    assert_eq!(meta["invariants"]["passed"], Value::Bool(true));
    assert_eq!(meta["command"], "pes");
}

#[test]
fn same_seed_gives_identical_bytes() {
    let text = "\
[experiment]
kind = rabi
tau_max = 0.5 us
tau_points = 6
shots = 500
readout_duration = 0.3 us
[output]
format = both
";
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), text);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (dir, workers) in [(&a, "1"), (&b, "3")] {
        let res = nvpes(&[
            "rabi", "--config", &cfg, "--out", dir.to_str().unwrap(), "--seed", "9", "--workers", workers,
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let (la, lb) = (listing(&a), listing(&b));
    let names: Vec<&str> = la.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(names, ["metadata.json", "rabi.csv", "rabi.json"]);
    // Output directories differ, so compare everything but the echoed path.
    for ((na, ba), (nb, bb)) in la.iter().zip(&lb) {
        assert_eq!(na, nb);
        if na == "metadata.json" {
            let strip = |bytes: &[u8], dir: &Path| {
                String::from_utf8_lossy(bytes).replace(&*dir.to_string_lossy(), "<out>")
            };
            assert_eq!(strip(ba, &a), strip(bb, &b));
        } else {
            assert_eq!(ba, bb, "{na} differs");
        }
    }

    let c = tmp.path().join("c");
    nvpes(&["rabi", "--config", &cfg, "--out", c.to_str().unwrap(), "--seed", "10"]);
    assert_ne!(fs::read(a.join("rabi.csv")).unwrap(), fs::read(c.join("rabi.csv")).unwrap());
}

#[test]
fn effective_config_is_echoed_and_reparses() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[model]\ngamma2 = 0.8 MHz\n[experiment]\nkind = saturation\npowers = 0, 50, 500 uW\n",
    );
    let out = tmp.path().join("out");
    let res = nvpes(&["saturation", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "3"]);
    assert!(res.status.success());
    let meta = metadata(&out);
    let echoed = parse_config(meta["config"].as_str().unwrap()).unwrap();
    assert_eq!(echoed.model.gamma2, 0.8);
    assert_eq!(echoed.output.seed, 3);
    assert_eq!(echoed.experiment.powers, vec![0.0, 50.0, 500.0]);
    assert_eq!(parse_config(&echoed.to_text()).unwrap(), echoed);
}

#[test]
fn odmr_reports_contrast_in_metadata() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[experiment]\nkind = odmr\nrabi = 8 MHz\npump = 20 MHz\ndetuning_min = -100 MHz\ndetuning_max = 100 MHz\n",
    );
    let out = tmp.path().join("out");
    let res = nvpes(&["odmr", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(res.status.success());
    let meta = metadata(&out);
    let c = meta["summary"]["contrast"].as_f64().unwrap();
    assert!(c > 0.0 && c < 1.0, "{c}");
    assert!(meta["summary"]["fit"]["width"].as_f64().unwrap() > 0.0);
}

#[test]
fn config_error_is_a_json_record_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[experiment]\n[model]\ngamma0 = -1\n");
    let out = tmp.path().join("out");
    let res = nvpes(&["pes", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let rec: Value = serde_json::from_slice(res.stderr.trim_ascii_end().split(|b| *b == b'\n').last().unwrap()).unwrap();
    assert_eq!(rec["error"], "config");
    assert_eq!(rec["line"], 3);
    assert!(!out.exists());
}

#[test]
fn simulation_failure_leaves_no_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[drive]\nsegment = 2 us, 40 MHz, 0 MHz, 0 MHz\n[simulation]\nn_max = 2\nn_max_cap = 4\n[experiment]\n",
    );
    let out = tmp.path().join("out");
    let res = nvpes(&["pes", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("\"error\":\"cutoff-overflow\""), "{stderr}");
    assert!(!out.exists());
}

#[test]
fn unwritable_output_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[experiment]\npowers = 1 uW\n");
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let res = nvpes(&["saturation", "--config", &cfg, "--out", blocker.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("\"error\":\"io\""));
}

#[test]
fn validate_command_passes_oracle_check() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[experiment]\nsets = 2\ntimes = 0.1, 0.5 us\n");
    let out = tmp.path().join("out");
    let res = nvpes(&["validate", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "5"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let meta = metadata(&out);
    assert_eq!(meta["summary"]["oracle"]["passed"], Value::Bool(true));
    let csv = fs::read_to_string(out.join("validate.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
}
