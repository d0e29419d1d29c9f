//! Leakage-free cross-validation, ensembling and final-model attribution.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ensemble::{combine, fit_ensemble_weights, EnsembleWeights};
use super::folds::{kfold_split, FoldAssignment};
use super::metrics::{compute_metrics, MetricSet};
use super::shapley::{shapley_importance, ShapleyAttribution, ShapleyMode, MAX_EXACT_FEATURES};
use crate::error::{Error, Result};
use crate::frame::{DenseMatrix, FieldFrame};
use crate::learners::{self, FittedModel, LearnerConfig, LearnerKind};
use crate::preprocess::{FoldPreprocessor, PreprocessConfig};
use crate::select::{select_features, SelectConfig, SelectionReport};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapleySetting {
    /// Exact when the selected set has at most 12 features, sampled otherwise.
    Auto,
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyConfig {
    pub setting: ShapleySetting,
    pub budget: usize,
    pub explain_rows: usize,
    /// `None` uses the training-median row; `Some(m)` averages over m sampled rows.
    pub background_rows: Option<usize>,
}

impl Default for ShapleyConfig {
    fn default() -> Self {
        Self { setting: ShapleySetting::Auto, budget: 200, explain_rows: 50, background_rows: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub folds: usize,
    pub seed: u64,
    pub learner_seed: u64,
    pub select: SelectConfig,
    pub preprocess: PreprocessConfig,
    pub learners: LearnerConfig,
    pub enabled: Vec<LearnerKind>,
    pub shapley: ShapleyConfig,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            seed: 42,
            learner_seed: 7,
            select: SelectConfig::default(),
            preprocess: PreprocessConfig::default(),
            learners: LearnerConfig::default(),
            enabled: LearnerKind::ALL.to_vec(),
            shapley: ShapleyConfig::default(),
        }
    }
}

/// Everything fitted inside one fold, from training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldArtifacts {
    pub fold: usize,
    pub preprocessor: FoldPreprocessor,
    pub selection: SelectionReport,
    pub models: Vec<FittedModel>,
    pub failures: Vec<(LearnerKind, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub assignment: FoldAssignment,
    pub folds: Vec<FoldArtifacts>,
    pub field_ids: Vec<String>,
    pub y: Vec<f64>,
    /// Out-of-fold predictions per learner; `None` where the learner failed.
    pub oof: Vec<(LearnerKind, Vec<Option<f64>>)>,
    pub excluded: Vec<LearnerKind>,
    pub ensemble_members: Vec<LearnerKind>,
    pub ensemble: EnsembleWeights,
    pub ensemble_oof: Vec<f64>,
    /// Per learner (included ones) then "ensemble".
    pub metrics: Vec<(String, MetricSet)>,
}

fn learner_seed(base: u64, fold: usize, kind: LearnerKind) -> u64 {
    let k = LearnerKind::ALL.iter().position(|x| *x == kind).unwrap_or(0) as u64;
    base.wrapping_add(100 * fold as u64 + k)
}

/// Preprocess, select and fit on `train`; returns the artifacts and the
/// transformed selected training matrix.
fn fit_partition(train: &FieldFrame, cfg: &CvConfig, fold: usize) -> Result<(FoldArtifacts, DenseMatrix)> {
    let preprocessor = FoldPreprocessor::fit(train, &cfg.preprocess)?;
    let xt = preprocessor.apply(train)?;
    let selection = select_features(&train.names, &train.families, &train.columns, &xt.columns, &train.y, &cfg.select)?;
    let xs = xt.select(&selection.selected_names())?;
    let mut models = Vec::new();
    let mut failures = Vec::new();
    for &kind in &cfg.enabled {
        match learners::fit(kind, &xs, &train.y, &cfg.learners, learner_seed(cfg.learner_seed, fold, kind)) {
            Ok(m) => models.push(m),
            Err(e) => {
                log::warn!("fold {fold}: {kind} failed: {e}");
                failures.push((kind, e.to_string()));
            }
        }
    }
    Ok((FoldArtifacts { fold, preprocessor, selection, models, failures }, xs))
}

/// Fits one fold and predicts its validation rows.
pub fn run_fold(frame: &FieldFrame, assignment: &FoldAssignment, fold: usize, cfg: &CvConfig) -> Result<(FoldArtifacts, Vec<(LearnerKind, Vec<f64>)>)> {
    let train = frame.subset(&assignment.train_rows(fold));
    let valid = frame.subset(&assignment.valid_rows(fold));
    let (mut art, _) = fit_partition(&train, cfg, fold)?;
    let xv = art.preprocessor.apply(&valid)?;
    let mut preds = Vec::new();
    let mut kept = Vec::new();
    for m in std::mem::take(&mut art.models) {
        match m.predict(&xv) {
            Ok(p) => {
                preds.push((m.kind, p));
                kept.push(m);
            }
            Err(e) => art.failures.push((m.kind, e.to_string())),
        }
    }
    art.models = kept;
    Ok((art, preds))
}

pub fn run_cv(frame: &FieldFrame, cfg: &CvConfig) -> Result<CvResult> {
    let n = frame.n_rows();
    let assignment = kfold_split(n, cfg.folds, cfg.seed)?;
    let fold_ids: Vec<usize> = (0..cfg.folds).collect();
    let results = crate::par::map(&fold_ids, |&f| run_fold(frame, &assignment, f, cfg));

    let mut oof: Vec<(LearnerKind, Vec<Option<f64>>)> = cfg.enabled.iter().map(|k| (*k, vec![None; n])).collect();
    let mut folds = Vec::with_capacity(cfg.folds);
    for (f, res) in results.into_iter().enumerate() {
        let (art, preds) = res?;
        let rows = assignment.valid_rows(f);
        for (kind, p) in preds {
            let col = &mut oof.iter_mut().find(|(k, _)| *k == kind).expect("enabled learner").1;
            for (r, v) in rows.iter().zip(p) {
                col[*r] = Some(v);
            }
        }
        folds.push(art);
    }

    let excluded: Vec<LearnerKind> = oof.iter().filter(|(_, c)| c.iter().any(Option::is_none)).map(|(k, _)| *k).collect();
    let members: Vec<LearnerKind> = cfg.enabled.iter().copied().filter(|k| !excluded.contains(k)).collect();
    if members.is_empty() {
        return Err(Error::NoModels);
    }
    let columns: Vec<Vec<f64>> = oof
        .iter()
        .filter(|(k, _)| members.contains(k))
        .map(|(_, c)| c.iter().map(|v| v.expect("complete column")).collect())
        .collect();
    let ensemble = fit_ensemble_weights(&columns, &frame.y)?;
    let ensemble_oof = combine(&columns, &ensemble.weights);
    let mut metrics = Vec::new();
    for (kind, col) in members.iter().zip(&columns) {
        metrics.push((kind.as_str().to_string(), compute_metrics(&frame.y, col)?));
    }
    metrics.push(("ensemble".to_string(), compute_metrics(&frame.y, &ensemble_oof)?));
    Ok(CvResult {
        assignment,
        folds,
        field_ids: frame.field_ids.clone(),
        y: frame.y.clone(),
        oof,
        excluded,
        ensemble_members: members,
        ensemble,
        ensemble_oof,
        metrics,
    })
}

/// Full-data refit of the best cross-validated learner with its attributions.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalModel {
    pub artifacts: FoldArtifacts,
    pub explained: LearnerKind,
    pub features: Vec<String>,
    pub mode: ShapleyMode,
    pub attribution: ShapleyAttribution,
    /// (feature, mean |φ|) sorted by importance, ties by name.
    pub importance: Vec<(String, f64)>,
}

pub fn fit_final(frame: &FieldFrame, cv: &CvResult, cfg: &CvConfig) -> Result<FinalModel> {
    let best = cv
        .metrics
        .iter()
        .filter(|(name, _)| name != "ensemble")
        .min_by(|a, b| a.1.rmse.total_cmp(&b.1.rmse).then_with(|| a.0.cmp(&b.0)))
        .map(|(name, _)| name.parse::<LearnerKind>())
        .ok_or(Error::NoModels)??;
    let final_cfg = CvConfig { enabled: vec![best], ..cfg.clone() };
    let (artifacts, xs) = fit_partition(frame, &final_cfg, cfg.folds)?;
    let model = artifacts.models.first().ok_or(Error::NoModels)?.clone();
    let features = model.features.clone();
    let p = features.len();
    let rows = xs.rows();
    let n = rows.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut pick = |m: usize| -> Vec<Vec<f64>> {
        let mut idx = index::sample(&mut rng, n, m.min(n)).into_vec();
        idx.sort_unstable();
        idx.iter().map(|&i| rows[i].clone()).collect()
    };
    let explain = pick(cfg.shapley.explain_rows);
    let background = match cfg.shapley.background_rows {
        None => vec![xs.columns.iter().map(|c| stats::median(c).unwrap_or(0.0)).collect()],
        Some(m) => pick(m.max(1)),
    };
    let mode = match cfg.shapley.setting {
        ShapleySetting::Exact => ShapleyMode::Exact,
        ShapleySetting::Sampled => ShapleyMode::Sampled(cfg.shapley.budget),
        ShapleySetting::Auto if p <= MAX_EXACT_FEATURES => ShapleyMode::Exact,
        ShapleySetting::Auto => ShapleyMode::Sampled(cfg.shapley.budget),
    };
    let f = |row: &[f64]| model.predict_row(row);
    let attribution = shapley_importance(&f, &explain, &background, mode, cfg.seed)?;
    let mut importance: Vec<(String, f64)> = features.iter().cloned().zip(attribution.global_importance()).collect();
    importance.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(FinalModel { artifacts, explained: best, features, mode, attribution, importance })
}
