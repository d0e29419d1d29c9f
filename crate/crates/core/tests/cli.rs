#![cfg(feature = "cli")]

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use unicrop::synth::{generate, SynthConfig};

const FAST: &str = "rf_trees = 40\ngb_rounds = 60\nshapley_rows = 10\n";

fn unicrop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unicrop")).args(args).output().unwrap()
}

fn small_bench(dir: &Path) -> String {
    generate(dir, &SynthConfig { fields: 80, ..Default::default() }).unwrap();
    let conf = dir.join("unicrop.conf");
    let mut text = fs::read_to_string(&conf).unwrap();
    text.push_str(FAST);
    fs::write(&conf, text).unwrap();
    conf.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn full_run_writes_artifacts_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_bench(dir.path());
    let first = unicrop(&["run", "--config", &conf, "--select-k", "8", "--seed", "3", "--criterion", "difference"]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let out = dir.path().join("out");
    for f in [
        "fetch_plan.csv",
        "acquired.csv",
        "master_table.csv",
        "unicrop_columns_manifest.csv",
        "selection_report.csv",
        "selected_features.txt",
        "fold1_preprocess.txt",
        "fold5_preprocess.txt",
        "metrics_report.csv",
        "ensemble_weights.csv",
        "shap_importance.csv",
        "oof_predictions.csv",
        "run_summary.txt",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let metrics = fs::read_to_string(out.join("metrics_report.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 6, "{metrics}");
    assert_eq!(fs::read_to_string(out.join("selected_features.txt")).unwrap().lines().count(), 8);
    let summary = fs::read_to_string(out.join("run_summary.txt")).unwrap();
    assert!(summary.contains("criterion = DIFFERENCE") && summary.contains("seed = 3"));

    let before = fs::read(out.join("oof_predictions.csv")).unwrap();
    let again = unicrop(&["run", "--config", &conf, "--select-k", "8", "--seed", "3", "--criterion", "difference"]);
    assert_eq!(again.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&again.stdout);
    assert_eq!(stdout.matches("skipped").count(), 5, "{stdout}");
    assert_eq!(fs::read(out.join("oof_predictions.csv")).unwrap(), before);

    // a changed selection setting reruns only the evaluate stage
    let changed = unicrop(&["run", "--config", &conf, "--select-k", "6", "--seed", "3", "--criterion", "difference"]);
    assert_eq!(changed.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&changed.stdout);
    assert_eq!(stdout.matches("skipped").count(), 4, "{stdout}");
    assert_eq!(fs::read_to_string(out.join("selected_features.txt")).unwrap().lines().count(), 6);
}

#[test]
fn missing_mapping_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_bench(dir.path());
    fs::remove_file(dir.path().join("feature_mapping.csv")).unwrap();
    let o = unicrop(&["run", "--config", &conf]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("stage=schema_config"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_bench(dir.path());
    fs::write(&conf, fs::read_to_string(&conf).unwrap() + "folds = 1\n").unwrap();
    let o = unicrop(&["run", "--config", &conf]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("stage=config"));
    let o = unicrop(&["run", "--config", &dir.path().join("absent.conf").to_string_lossy()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn acquisition_failures_above_half_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_bench(dir.path());
    let fixtures = dir.path().join("fixtures");
    for platform in fs::read_dir(&fixtures).unwrap() {
        let platform = platform.unwrap().path();
        if !platform.ends_with("USGS_SRTMGL1_003") {
            fs::remove_dir_all(platform).unwrap();
        }
    }
    let o = unicrop(&["run", "--config", &conf, "--offline"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("stage=acquire"));
    // completed-stage artifacts survive
    assert!(dir.path().join("out/fetch_plan.csv").is_file());
    assert!(dir.path().join("out/acquired.csv").is_file());
}

#[test]
fn modelling_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_bench(dir.path());
    let fields = dir.path().join("fields.csv");
    let text = fs::read_to_string(&fields).unwrap();
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            out.push_str(line);
        } else {
            let mut cells: Vec<&str> = line.split(',').collect();
            cells[5] = "";
            out.push_str(&cells.join(","));
        }
        out.push('\n');
    }
    fs::write(&fields, out).unwrap();
    let o = unicrop(&["run", "--config", &conf]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("stage=evaluate"));
}

#[test]
fn synth_subcommand_writes_a_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("bench");
    let o = unicrop(&["synth", "--out", &target.to_string_lossy(), "--fields", "12"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["fields.csv", "feature_mapping.csv", "unicrop.conf"] {
        assert!(target.join(f).is_file());
    }
}
