//! Modelling artifacts written by the evaluate stage.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evaluate::{CvResult, FinalModel};
use crate::learners::LearnerConfig;
use crate::select::SelectionReport;
use crate::series::format_f64;

pub const METRICS_REPORT: &str = "metrics_report.csv";
pub const ENSEMBLE_WEIGHTS: &str = "ensemble_weights.csv";
pub const SHAP_IMPORTANCE: &str = "shap_importance.csv";
pub const OOF_PREDICTIONS: &str = "oof_predictions.csv";
pub const SELECTION_REPORT: &str = "selection_report.csv";
pub const SELECTED_FEATURES: &str = "selected_features.txt";
pub const MODEL_REPORT: &str = "model_report.txt";

fn opt(x: Option<f64>) -> String {
    x.map(format_f64).unwrap_or_default()
}

fn csv_text(name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::csv(name, e);
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(name, e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("utf-8 csv"))
}

/// Rows for one selection run, tagged with `fold`.
pub fn selection_rows(fold: &str, r: &SelectionReport) -> Vec<Vec<String>> {
    let row = |action: &str, feature: &str, rel: String, red: String, score: String, detail: String| {
        vec![fold.to_string(), action.to_string(), feature.to_string(), rel, red, score, detail]
    };
    let mut out = Vec::new();
    for name in &r.dropped_zero_variance {
        out.push(row("drop", name, String::new(), String::new(), String::new(), "near_zero_variance".into()));
    }
    for p in &r.pruned_collinear {
        out.push(row("prune", &p.dropped, String::new(), String::new(), String::new(), format!("kept={} r={}", p.kept, format_f64(p.r))));
    }
    for name in &r.family_rescued {
        out.push(row("rescue", name, String::new(), String::new(), String::new(), "family_preservation".into()));
    }
    for fam in &r.absent_families {
        out.push(row("absent_family", fam.as_str(), String::new(), String::new(), String::new(), String::new()));
    }
    for s in &r.relevance {
        out.push(row(
            "relevance",
            &s.name,
            format_f64(s.relevance),
            String::new(),
            String::new(),
            format!("mi={} pearson={} spearman={}", format_f64(s.mi), format_f64(s.pearson), format_f64(s.spearman)),
        ));
    }
    for (rank, s) in r.selected.iter().enumerate() {
        out.push(row(
            "select",
            &s.name,
            format_f64(s.relevance),
            format_f64(s.redundancy),
            format_f64(s.score),
            format!("rank={} criterion={}", rank + 1, r.criterion),
        ));
    }
    out
}

/// Renders every modelling artifact as (file name, contents).
pub fn render(cv: &CvResult, fin: &FinalModel, learners: &LearnerConfig) -> Result<Vec<(String, String)>> {
    let mut files = Vec::new();

    let metrics = cv
        .metrics
        .iter()
        .map(|(name, m)| vec![name.clone(), format_f64(m.rmse), format_f64(m.mae), opt(m.r2), opt(m.mape)])
        .collect();
    files.push((METRICS_REPORT.to_string(), csv_text(METRICS_REPORT, &["model", "rmse", "mae", "r2", "mape"], metrics)?));

    let weights = cv
        .ensemble_members
        .iter()
        .zip(&cv.ensemble.weights)
        .map(|(k, w)| vec![k.as_str().to_string(), format_f64(*w), format_f64(cv.ensemble.objective)])
        .collect();
    files.push((ENSEMBLE_WEIGHTS.to_string(), csv_text(ENSEMBLE_WEIGHTS, &["model", "weight", "objective"], weights)?));

    let shap = fin
        .importance
        .iter()
        .enumerate()
        .map(|(i, (f, v))| vec![f.clone(), format_f64(*v), (i + 1).to_string()])
        .collect();
    files.push((SHAP_IMPORTANCE.to_string(), csv_text(SHAP_IMPORTANCE, &["feature", "mean_abs_phi", "rank"], shap)?));

    let mut header = vec!["field_id", "y"];
    header.extend(cv.oof.iter().map(|(k, _)| k.as_str()));
    header.push("ensemble");
    let oof = (0..cv.y.len())
        .map(|i| {
            let mut r = vec![cv.field_ids[i].clone(), format_f64(cv.y[i])];
            r.extend(cv.oof.iter().map(|(_, c)| opt(c[i])));
            r.push(format_f64(cv.ensemble_oof[i]));
            r
        })
        .collect();
    files.push((OOF_PREDICTIONS.to_string(), csv_text(OOF_PREDICTIONS, &header, oof)?));

    let mut sel = Vec::new();
    for a in &cv.folds {
        sel.extend(selection_rows(&(a.fold + 1).to_string(), &a.selection));
    }
    sel.extend(selection_rows("final", &fin.artifacts.selection));
    files.push((
        SELECTION_REPORT.to_string(),
        csv_text(SELECTION_REPORT, &["fold", "action", "feature", "relevance", "redundancy", "score", "detail"], sel)?,
    ));

    let mut selected = String::new();
    for name in fin.artifacts.selection.selected_names() {
        selected.push_str(&name);
        selected.push('\n');
    }
    files.push((SELECTED_FEATURES.to_string(), selected));

    for a in &cv.folds {
        files.push((format!("fold{}_preprocess.txt", a.fold + 1), a.preprocessor.dump()));
    }
    files.push(("final_preprocess.txt".to_string(), fin.artifacts.preprocessor.dump()));

    let mut m = String::from("# fold model seed hyperparameters\n");
    for a in &cv.folds {
        for model in &a.models {
            let _ = writeln!(m, "{} {} {} {}", a.fold + 1, model.kind, model.seed, learners.describe(model.kind));
        }
        for (kind, why) in &a.failures {
            let _ = writeln!(m, "{} {} FAILED {}", a.fold + 1, kind, why);
        }
    }
    for model in &fin.artifacts.models {
        let _ = writeln!(m, "final {} {} {}", model.kind, model.seed, learners.describe(model.kind));
    }
    for k in &cv.excluded {
        let _ = writeln!(m, "excluded {k}");
    }
    let _ = writeln!(m, "explained {} shapley={:?} base={}", fin.explained, fin.mode, format_f64(fin.attribution.base));
    files.push((MODEL_REPORT.to_string(), m));
    Ok(files)
}

/// Writes rendered files; every failure is collected rather than stopping at the first.
pub fn write_all(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut errors = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        match std::fs::write(&path, body) {
            Ok(()) => written.push(path),
            Err(e) => errors.push(format!("{}: {e}", path.display())),
        }
    }
    if errors.is_empty() {
        Ok(written)
    } else {
        Err(Error::ReportWrite(errors))
    }
}
