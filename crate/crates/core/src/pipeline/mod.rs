//! End-to-end orchestration: five file-to-file stages with resume.
//!
//! Every stage reads its inputs from the output directory, so a resumed run and
//! a from-scratch run see the same bytes.

pub mod config;
pub mod reports;
pub mod state;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{Overrides, RunConfig};
pub use state::{RunState, STATE_FILE};

use crate::acquire::{
    fetch_batch, read_acquired, register_local_fixture_fetcher, write_acquired, BatchOptions, Cache, FetcherRegistry,
    LOCAL_FIXTURE_PLATFORM,
};
use crate::engineer::engineer_table;
use crate::error::{Error, Result};
use crate::evaluate::{fit_final, run_cv};
use crate::frame::build_field_frame;
use crate::harmonize::{
    dedup_rows, emit_manifest, merge_sources, read_manifest, read_master_table, write_manifest, write_master_table,
    MergeOptions,
};
use crate::schema::{build_fetch_plan, parse_feature_mapping, parse_fields, read_fetch_plan, write_fetch_plan, write_fields};
use state::{file_hash, InputHasher};

pub const FETCH_PLAN: &str = "fetch_plan.csv";
pub const FIELDS_CLEAN: &str = "fields_clean.csv";
pub const CLEANING_REPORT: &str = "cleaning_report.txt";
pub const ACQUIRED: &str = "acquired.csv";
pub const ACQUIRE_REPORT: &str = "acquire_report.txt";
pub const HARMONIZED_TABLE: &str = "harmonized_table.csv";
pub const HARMONIZED_MANIFEST: &str = "harmonized_manifest.csv";
pub const DEDUP_AUDIT: &str = "dedup_audit.txt";
pub const MASTER_TABLE: &str = "master_table.csv";
pub const COLUMNS_MANIFEST: &str = "unicrop_columns_manifest.csv";
pub const ENGINEER_REPORT: &str = "engineer_report.txt";
pub const RUN_SUMMARY: &str = "run_summary.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    SchemaConfig,
    Acquire,
    Harmonize,
    Engineer,
    Evaluate,
}

impl Stage {
    pub const PIPELINE: [Stage; 5] = [Stage::SchemaConfig, Stage::Acquire, Stage::Harmonize, Stage::Engineer, Stage::Evaluate];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::SchemaConfig => "schema_config",
            Stage::Acquire => "acquire",
            Stage::Harmonize => "harmonize",
            Stage::Engineer => "engineer",
            Stage::Evaluate => "evaluate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug)]
pub struct PipelineError {
    pub stage: Stage,
    pub error: Error,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage={}: {}", self.stage, self.error)
    }
}

impl std::error::Error for PipelineError {}

impl PipelineError {
    pub fn new(stage: Stage, error: Error) -> Self {
        Self { stage, error }
    }

    /// 2 config, 3 acquisition threshold, 4 modelling.
    pub fn exit_code(&self) -> i32 {
        match (self.stage, &self.error) {
            (Stage::Config | Stage::SchemaConfig, _) => 2,
            (Stage::Acquire, Error::Config(_) | Error::NoFetcherForPlatform(_) | Error::AmbiguousFetcher(_)) => 2,
            (Stage::Acquire, _) => 3,
            _ => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub stage: Stage,
    pub skipped: bool,
    pub seconds: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub outcomes: Vec<StageOutcome>,
    pub output_dir: PathBuf,
}

impl RunReport {
    pub fn skipped(&self) -> Vec<Stage> {
        self.outcomes.iter().filter(|o| o.skipped).map(|o| o.stage).collect()
    }
}

type StageResult = Result<(Vec<String>, Vec<String>)>;

/// Loads the config file, applies overrides and runs.
pub fn run_from_file(path: &Path, overrides: &Overrides) -> Result<RunReport, PipelineError> {
    let mut cfg = RunConfig::from_file(path).map_err(|e| PipelineError::new(Stage::Config, e))?;
    cfg.apply(overrides);
    run_pipeline(&cfg)
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<RunReport, PipelineError> {
    cfg.validate().map_err(|e| PipelineError::new(Stage::Config, e))?;
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out).map_err(|e| PipelineError::new(Stage::Config, Error::io(&out, e)))?;
    let started = chrono::Utc::now();
    let mut state = RunState::load(&out);
    let order: Vec<&str> = Stage::PIPELINE.iter().map(|s| s.as_str()).collect();
    let mut outcomes = Vec::new();
    let mut failure = None;

    for stage in Stage::PIPELINE {
        let t0 = Instant::now();
        let inputs = match stage_inputs(stage, cfg) {
            Ok(h) => h,
            Err(e) => {
                failure = Some(PipelineError::new(stage, e));
                break;
            }
        };
        if state.is_current(stage.as_str(), &inputs, &out) {
            log::info!("stage {stage}: inputs unchanged, skipped");
            outcomes.push(StageOutcome { stage, skipped: true, seconds: t0.elapsed().as_secs_f64(), notes: Vec::new() });
            continue;
        }
        state.invalidate_from(stage.as_str(), &order);
        log::info!("stage {stage}: running");
        let result = match stage {
            Stage::SchemaConfig => schema_stage(cfg, &out),
            Stage::Acquire => acquire_stage(cfg, &out),
            Stage::Harmonize => harmonize_stage(cfg, &out),
            Stage::Engineer => engineer_stage(cfg, &out),
            Stage::Evaluate => evaluate_stage(cfg, &out),
            Stage::Config => unreachable!("not a pipeline stage"),
        };
        let recorded = result.and_then(|(outputs, notes)| {
            state.record(stage.as_str(), inputs, &out, &outputs)?;
            state.save(&out)?;
            Ok(notes)
        });
        match recorded {
            Ok(notes) => outcomes.push(StageOutcome { stage, skipped: false, seconds: t0.elapsed().as_secs_f64(), notes }),
            Err(e) => {
                failure = Some(PipelineError::new(stage, e));
                break;
            }
        }
    }
    if let Err(e) = state.save(&out) {
        failure.get_or_insert(PipelineError::new(Stage::Config, e));
    }
    let summary = write_summary(cfg, &out, &state, &outcomes, failure.as_ref(), started);
    if let Some(f) = failure {
        return Err(f);
    }
    summary.map_err(|e| PipelineError::new(Stage::Evaluate, e))?;
    Ok(RunReport { outcomes, output_dir: out })
}

fn stage_inputs(stage: Stage, cfg: &RunConfig) -> Result<String> {
    let out = &cfg.output_dir;
    let echo = cfg.echo();
    let setting = |h: InputHasher, keys: &[&str]| {
        echo.iter()
            .filter(|(k, _)| keys.iter().any(|p| k == p || (p.ends_with('.') && k.starts_with(p))))
            .fold(h, |h, (k, v)| h.text(k, v))
    };
    let h = InputHasher::default().text("stage", stage.as_str());
    let h = match stage {
        Stage::SchemaConfig => h.file("mapping", &cfg.mapping)?.file("fields", &cfg.fields)?,
        Stage::Acquire => {
            let mut h = h.file(FETCH_PLAN, &out.join(FETCH_PLAN))?;
            if let Some(root) = &cfg.fixture_root {
                h = h.tree("fixtures", root)?;
            }
            setting(h, &["base_url", "http_platforms", "offline", "failure_threshold"])
        }
        Stage::Harmonize => {
            let h = h
                .file(FETCH_PLAN, &out.join(FETCH_PLAN))?
                .file(ACQUIRED, &out.join(ACQUIRED))?
                .file(FIELDS_CLEAN, &out.join(FIELDS_CLEAN))?
                .file("mapping", &cfg.mapping)?;
            setting(h, &["rename."])
        }
        Stage::Engineer => {
            let h = h
                .file(HARMONIZED_TABLE, &out.join(HARMONIZED_TABLE))?
                .file(HARMONIZED_MANIFEST, &out.join(HARMONIZED_MANIFEST))?
                .file(FIELDS_CLEAN, &out.join(FIELDS_CLEAN))?
                .file("mapping", &cfg.mapping)?;
            setting(h, &["rename.", "engineer."])
        }
        Stage::Evaluate => {
            let h = h
                .file(MASTER_TABLE, &out.join(MASTER_TABLE))?
                .file(COLUMNS_MANIFEST, &out.join(COLUMNS_MANIFEST))?
                .file(FIELDS_CLEAN, &out.join(FIELDS_CLEAN))?;
            setting(
                h,
                &[
                    "select_k",
                    "criterion",
                    "epsilon",
                    "collinear_threshold",
                    "seed",
                    "folds",
                    "learner_seed",
                    "knn_k",
                    "winsor_level",
                    "learners",
                    "shapley_mode",
                    "shapley_budget",
                    "shapley_rows",
                    "shapley_background",
                    "model.",
                ],
            )
        }
        Stage::Config => h,
    };
    Ok(h.finish())
}

fn schema_stage(cfg: &RunConfig, out: &Path) -> StageResult {
    if !cfg.mapping.is_file() {
        return Err(Error::Config(format!("mapping file {} not found", cfg.mapping.display())));
    }
    if !cfg.fields.is_file() {
        return Err(Error::Config(format!("fields file {} not found", cfg.fields.display())));
    }
    let specs = parse_feature_mapping(&cfg.mapping)?;
    let (fields, report) = parse_fields(&cfg.fields)?;
    let plan = build_fetch_plan(&fields, &specs)?;
    write_fetch_plan(&out.join(FETCH_PLAN), &plan)?;
    write_fields(&out.join(FIELDS_CLEAN), &fields)?;
    let mut text = format!("kept {}\ndropped {}\n", fields.len(), report.total_dropped());
    for (reason, n) in &report.dropped {
        text.push_str(&format!("{reason} {n}\n"));
    }
    for w in &report.warnings {
        text.push_str(&format!("{w}\n"));
    }
    let path = out.join(CLEANING_REPORT);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    let notes = vec![format!("{} specs, {} fields, {} tasks", specs.len(), fields.len(), plan.len())];
    Ok((vec![FETCH_PLAN.into(), FIELDS_CLEAN.into(), CLEANING_REPORT.into()], notes))
}

fn build_registry(cfg: &RunConfig) -> Result<FetcherRegistry> {
    let mut registry = FetcherRegistry::new();
    let http_active = cfg.base_url.is_some() && !cfg.offline;
    if let Some(root) = &cfg.fixture_root {
        let fx = register_local_fixture_fetcher(root.clone());
        if http_active && cfg.http_platforms.is_empty() {
            registry.register(fx.with_platforms([LOCAL_FIXTURE_PLATFORM]));
        } else {
            registry.register(fx);
        }
    }
    if http_active {
        register_http(cfg, &mut registry)?;
    }
    Ok(registry)
}

#[cfg(feature = "http")]
fn register_http(cfg: &RunConfig, registry: &mut FetcherRegistry) -> Result<()> {
    let url = cfg.base_url.as_deref().expect("checked by caller");
    let token = cfg.auth_env.as_deref().and_then(|name| std::env::var(name).ok());
    let f = crate::acquire::register_http_fetcher(url, token)?.with_platforms(cfg.http_platforms.clone());
    registry.register(f);
    Ok(())
}

#[cfg(not(feature = "http"))]
fn register_http(_cfg: &RunConfig, _registry: &mut FetcherRegistry) -> Result<()> {
    Err(Error::Config("built without the `http` feature; base_url is unsupported".into()))
}

fn acquire_stage(cfg: &RunConfig, out: &Path) -> StageResult {
    let plan = read_fetch_plan(&out.join(FETCH_PLAN))?;
    let registry = build_registry(cfg)?;
    let cache = cfg.cache_dir.as_ref().map(Cache::open).transpose()?;
    let (results, report) =
        fetch_batch(&plan, &registry, cache.as_ref(), &BatchOptions { parallelism: cfg.parallelism.max(1) })?;
    write_acquired(&out.join(ACQUIRED), &results)?;
    let mut text = format!("tasks {}\nfailed {}\n", plan.len(), report.failed);
    for r in results.iter().filter(|r| r.status.is_failed()) {
        text.push_str(&format!("FAILED {} {}\n", r.task.field_id, r.task.key_variable));
    }
    let path = out.join(ACQUIRE_REPORT);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    if report.failed_fraction(plan.len()) > cfg.failure_threshold {
        return Err(Error::FailureThreshold { failed: report.failed, total: plan.len(), threshold: cfg.failure_threshold });
    }
    let mut notes = vec![format!(
        "{} tasks: {} cache hits, {} fetched, {} failed",
        plan.len(),
        report.cache_hits,
        report.fetched,
        report.failed
    )];
    notes.extend(report.warnings.iter().take(20).cloned());
    Ok((vec![ACQUIRED.into(), ACQUIRE_REPORT.into()], notes))
}

fn harmonize_stage(cfg: &RunConfig, out: &Path) -> StageResult {
    let plan = read_fetch_plan(&out.join(FETCH_PLAN))?;
    let results = read_acquired(&out.join(ACQUIRED), &plan)?;
    let (fields, _) = parse_fields(&out.join(FIELDS_CLEAN))?;
    let specs = parse_feature_mapping(&cfg.mapping)?;
    let merged = merge_sources(&results, &fields, &MergeOptions { renames: cfg.renames.clone() })?;
    let (table, audit) = dedup_rows(&merged);
    let manifest = emit_manifest(&table, &specs, &cfg.renames)?;
    write_master_table(&out.join(HARMONIZED_TABLE), &table)?;
    write_manifest(&out.join(HARMONIZED_MANIFEST), &manifest)?;
    let path = out.join(DEDUP_AUDIT);
    let mut text = audit.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    let notes = vec![format!("{} rows x {} columns, {} duplicate rows dropped", table.n_rows(), table.columns.len(), audit.len())];
    Ok((vec![HARMONIZED_TABLE.into(), HARMONIZED_MANIFEST.into(), DEDUP_AUDIT.into()], notes))
}

fn engineer_stage(cfg: &RunConfig, out: &Path) -> StageResult {
    let (fields, _) = parse_fields(&out.join(FIELDS_CLEAN))?;
    let manifest = read_manifest(&out.join(HARMONIZED_MANIFEST))?;
    let mut table = read_master_table(&out.join(HARMONIZED_TABLE), &manifest, &fields)?;
    let specs = parse_feature_mapping(&cfg.mapping)?;
    let report = engineer_table(&mut table, &cfg.engineer)?;
    let manifest = emit_manifest(&table, &specs, &cfg.renames)?;
    write_master_table(&out.join(MASTER_TABLE), &table)?;
    write_manifest(&out.join(COLUMNS_MANIFEST), &manifest)?;
    let mut text = String::new();
    for a in &report.added {
        text.push_str(&format!("added {a}\n"));
    }
    for s in &report.skipped {
        text.push_str(&format!("skipped {s}\n"));
    }
    let path = out.join(ENGINEER_REPORT);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    let notes = vec![format!("{} engineered columns, {} skipped", report.added.len(), report.skipped.len())];
    Ok((vec![MASTER_TABLE.into(), COLUMNS_MANIFEST.into(), ENGINEER_REPORT.into()], notes))
}

fn evaluate_stage(cfg: &RunConfig, out: &Path) -> StageResult {
    let (fields, _) = parse_fields(&out.join(FIELDS_CLEAN))?;
    let manifest = read_manifest(&out.join(COLUMNS_MANIFEST))?;
    let table = read_master_table(&out.join(MASTER_TABLE), &manifest, &fields)?;
    let frame = build_field_frame(&table, &manifest)?;
    let cv = run_cv(&frame, &cfg.cv)?;
    let fin = fit_final(&frame, &cv, &cfg.cv)?;
    let files = reports::render(&cv, &fin, &cfg.cv.learners)?;
    reports::write_all(out, &files)?;
    let mut notes = vec![format!("{} fields x {} candidate features, {} folds", frame.n_rows(), frame.n_features(), cfg.cv.folds)];
    for (name, m) in &cv.metrics {
        notes.push(format!("{name}: rmse={:.3} r2={}", m.rmse, m.r2.map_or("NA".into(), |r| format!("{r:.4}"))));
    }
    for k in &cv.excluded {
        notes.push(format!("excluded learner {k} (failed in at least one fold)"));
    }
    notes.push(format!("explained model {} ({:?})", fin.explained, fin.mode));
    Ok((files.into_iter().map(|(n, _)| n).collect(), notes))
}

fn write_summary(
    cfg: &RunConfig,
    out: &Path,
    state: &RunState,
    outcomes: &[StageOutcome],
    failure: Option<&PipelineError>,
    started: chrono::DateTime<chrono::Utc>,
) -> Result<()> {
    let mut s = String::new();
    s.push_str(&format!("unicrop {}\n", env!("CARGO_PKG_VERSION")));
    s.push_str(&format!("started {}\n", started.format("%Y-%m-%dT%H:%M:%SZ")));
    s.push_str(&format!("finished {}\n", chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ")));
    s.push_str(&format!(
        "status {}\n",
        failure.map_or("ok".to_string(), |f| format!("failed exit={} {f}", f.exit_code()))
    ));
    s.push_str(&format!("seeds cv={} learners={}\n", cfg.cv.seed, cfg.cv.learner_seed));
    s.push_str("\n[config]\n");
    for (k, v) in cfg.echo() {
        s.push_str(&format!("{k} = {v}\n"));
    }
    s.push_str("\n[stages]\n");
    for o in outcomes {
        let what = if o.skipped { "skipped" } else { "ran" };
        s.push_str(&format!("{} {what} {:.3}s\n", o.stage, o.seconds));
        for n in &o.notes {
            s.push_str(&format!("  {n}\n"));
        }
    }
    s.push_str("\n[artifacts]\n");
    for rec in state.stages.values() {
        for (name, _) in &rec.outputs {
            let h = file_hash(&out.join(name)).unwrap_or_else(|| "missing".into());
            s.push_str(&format!("{name} sha256={h}\n"));
        }
    }
    let path = out.join(RUN_SUMMARY);
    fs::write(&path, s).map_err(|e| Error::io(&path, e))
}
