//! Flat `key = value` run configuration with command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::engineer::EngineerConfig;
use crate::error::{Error, Result};
use crate::evaluate::{CvConfig, ShapleySetting};
use crate::learners::LearnerKind;
use crate::select::Criterion;

pub const DEFAULT_FAILURE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mapping: PathBuf,
    pub fields: PathBuf,
    pub fixture_root: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub base_url: Option<String>,
    /// Name of the environment variable holding the HTTP bearer token.
    pub auth_env: Option<String>,
    /// Platforms routed to the HTTP fetcher; empty means all of them.
    pub http_platforms: Vec<String>,
    pub offline: bool,
    pub parallelism: usize,
    pub failure_threshold: f64,
    pub renames: BTreeMap<String, String>,
    pub engineer: EngineerConfig,
    pub cv: CvConfig,
}

/// Flag values that win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub select_k: Option<usize>,
    pub seed: Option<u64>,
    pub criterion: Option<Criterion>,
    pub offline: bool,
}

fn bad(key: &str, value: &str) -> Error {
    Error::Config(format!("invalid value `{value}` for `{key}`"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, value)),
    }
}

fn opt_text(value: &str) -> Option<String> {
    (!value.is_empty()).then(|| value.to_string())
}

impl RunConfig {
    /// Parses a config file. Relative paths resolve against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut pairs: BTreeMap<String, String> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let k = k.trim().to_string();
            if pairs.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", i + 1)));
            }
        }
        let path = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };

        let required = |k: &str| pairs.get(k).filter(|v| !v.is_empty()).ok_or_else(|| Error::Config(format!("missing `{k}`")));
        let mut cfg = RunConfig {
            mapping: path(required("mapping")?),
            fields: path(required("fields")?),
            fixture_root: None,
            cache_dir: None,
            output_dir: path(required("output_dir")?),
            base_url: None,
            auth_env: None,
            http_platforms: Vec::new(),
            offline: false,
            parallelism: 8,
            failure_threshold: DEFAULT_FAILURE_THRESHOLD,
            renames: BTreeMap::new(),
            engineer: EngineerConfig::default(),
            cv: CvConfig::default(),
        };

        for (k, v) in &pairs {
            let (k, v) = (k.as_str(), v.as_str());
            let cv = &mut cfg.cv;
            let lc = &mut cv.learners;
            match k {
                "mapping" | "fields" | "output_dir" => {}
                "fixture_root" => cfg.fixture_root = opt_text(v).map(|s| path(&s)),
                "cache_dir" => cfg.cache_dir = opt_text(v).map(|s| path(&s)),
                "base_url" => cfg.base_url = opt_text(v),
                "auth_env" => cfg.auth_env = opt_text(v),
                "http_platforms" => {
                    cfg.http_platforms = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
                }
                "offline" => cfg.offline = flag(k, v)?,
                "parallelism" => cfg.parallelism = num(k, v)?,
                "failure_threshold" => cfg.failure_threshold = num(k, v)?,
                "select_k" => cv.select.k = num(k, v)?,
                "criterion" => cv.select.criterion = v.parse().map_err(|_| bad(k, v))?,
                "epsilon" => cv.select.epsilon = num(k, v)?,
                "collinear_threshold" => cv.select.collinear_threshold = num(k, v)?,
                "seed" => cv.seed = num(k, v)?,
                "folds" => cv.folds = num(k, v)?,
                "learner_seed" => cv.learner_seed = num(k, v)?,
                "knn_k" => cv.preprocess.knn_k = num(k, v)?,
                "winsor_level" => cv.preprocess.winsor_level = num(k, v)?,
                "learners" => {
                    cv.enabled = v
                        .split(',')
                        .map(|s| s.trim().parse::<LearnerKind>().map_err(|_| bad(k, v)))
                        .collect::<Result<_>>()?
                }
                "shapley_mode" => {
                    cv.shapley.setting = match v.to_ascii_lowercase().as_str() {
                        "auto" => ShapleySetting::Auto,
                        "exact" => ShapleySetting::Exact,
                        "sampled" => ShapleySetting::Sampled,
                        _ => return Err(bad(k, v)),
                    }
                }
                "shapley_budget" => cv.shapley.budget = num(k, v)?,
                "shapley_rows" => cv.shapley.explain_rows = num(k, v)?,
                "shapley_background" => {
                    cv.shapley.background_rows = if v == "median" { None } else { Some(num(k, v)?) }
                }
                "en_alpha" => lc.elastic_net.alpha = num(k, v)?,
                "en_l1_ratio" => lc.elastic_net.l1_ratio = num(k, v)?,
                "rf_trees" => lc.random_forest.trees = num(k, v)?,
                "rf_min_leaf" => lc.random_forest.min_leaf = num(k, v)?,
                "gb_rounds" => lc.gradient_boosting.rounds = num(k, v)?,
                "gb_learning_rate" => lc.gradient_boosting.learning_rate = num(k, v)?,
                "gb_max_depth" => lc.gradient_boosting.max_depth = num(k, v)?,
                "svr_c" => lc.svr.c = num(k, v)?,
                "svr_epsilon" => lc.svr.epsilon = num(k, v)?,
                _ => {
                    if let Some(key) = k.strip_prefix("rename.") {
                        cfg.renames.insert(key.to_string(), v.to_string());
                    } else if let Some(role) = k.strip_prefix("engineer.") {
                        let e = &mut cfg.engineer;
                        let slot = match role {
                            "tmax" => &mut e.tmax,
                            "tmin" => &mut e.tmin,
                            "temperature" => &mut e.temperature,
                            "ndvi" => &mut e.ndvi,
                            "evi" => &mut e.evi,
                            "vv" => &mut e.vv,
                            "vh" => &mut e.vh,
                            "clay" => &mut e.clay,
                            "radiation" => &mut e.radiation,
                            "elevation" => &mut e.elevation,
                            _ => return Err(Error::Config(format!("unknown key `{k}`"))),
                        };
                        *slot = v.to_string();
                    } else {
                        return Err(Error::Config(format!("unknown key `{k}`")));
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(k) = o.select_k {
            self.cv.select.k = k;
        }
        if let Some(s) = o.seed {
            self.cv.seed = s;
        }
        if let Some(c) = o.criterion {
            self.cv.select.criterion = c;
        }
        if o.offline {
            self.offline = true;
        }
    }

    /// Checks value ranges and that every input path exists.
    pub fn validate(&self) -> Result<()> {
        if self.cv.folds < 2 {
            return Err(Error::Config(format!("folds must be at least 2, got {}", self.cv.folds)));
        }
        if self.cv.enabled.is_empty() {
            return Err(Error::Config("no learners enabled".into()));
        }
        if !(0.0..=1.0).contains(&self.failure_threshold) {
            return Err(Error::Config("failure_threshold must lie in [0, 1]".into()));
        }
        if let Some(root) = &self.fixture_root {
            if !root.is_dir() {
                return Err(Error::Config(format!("fixture_root {} is not a directory", root.display())));
            }
        }
        let http = self.base_url.is_some() && !self.offline;
        if self.fixture_root.is_none() && !http {
            return Err(Error::Config("no fetcher available: set fixture_root or base_url (without --offline)".into()));
        }
        if self.output_dir.exists() && !self.output_dir.is_dir() {
            return Err(Error::Config(format!("output_dir {} is not a directory", self.output_dir.display())));
        }
        Ok(())
    }

    /// Stable rendering used for the summary echo and stage hashing.
    pub fn echo(&self) -> Vec<(String, String)> {
        let p = |x: &Path| x.display().to_string();
        let o = |x: &Option<PathBuf>| x.as_deref().map(p).unwrap_or_default();
        let cv = &self.cv;
        let mut out = vec![
            ("mapping".to_string(), p(&self.mapping)),
            ("fields".into(), p(&self.fields)),
            ("fixture_root".into(), o(&self.fixture_root)),
            ("cache_dir".into(), o(&self.cache_dir)),
            ("output_dir".into(), p(&self.output_dir)),
            ("base_url".into(), self.base_url.clone().unwrap_or_default()),
            ("auth_env".into(), self.auth_env.clone().unwrap_or_default()),
            ("http_platforms".into(), self.http_platforms.join(",")),
            ("offline".into(), self.offline.to_string()),
            ("parallelism".into(), self.parallelism.to_string()),
            ("failure_threshold".into(), self.failure_threshold.to_string()),
            ("select_k".into(), cv.select.k.to_string()),
            ("criterion".into(), cv.select.criterion.to_string()),
            ("epsilon".into(), cv.select.epsilon.to_string()),
            ("collinear_threshold".into(), cv.select.collinear_threshold.to_string()),
            ("seed".into(), cv.seed.to_string()),
            ("folds".into(), cv.folds.to_string()),
            ("learner_seed".into(), cv.learner_seed.to_string()),
            ("knn_k".into(), cv.preprocess.knn_k.to_string()),
            ("winsor_level".into(), cv.preprocess.winsor_level.to_string()),
            ("learners".into(), cv.enabled.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(",")),
            ("shapley_mode".into(), format!("{:?}", cv.shapley.setting).to_ascii_lowercase()),
            ("shapley_budget".into(), cv.shapley.budget.to_string()),
            ("shapley_rows".into(), cv.shapley.explain_rows.to_string()),
            (
                "shapley_background".into(),
                cv.shapley.background_rows.map_or("median".to_string(), |m| m.to_string()),
            ),
        ];
        for kind in LearnerKind::ALL {
            out.push((format!("model.{}", kind.as_str()), cv.learners.describe(kind)));
        }
        for (k, v) in &self.renames {
            out.push((format!("rename.{k}"), v.clone()));
        }
        let e = &self.engineer;
        for (role, v) in [
            ("tmax", &e.tmax),
            ("tmin", &e.tmin),
            ("temperature", &e.temperature),
            ("ndvi", &e.ndvi),
            ("evi", &e.evi),
            ("vv", &e.vv),
            ("vh", &e.vh),
            ("clay", &e.clay),
            ("radiation", &e.radiation),
            ("elevation", &e.elevation),
        ] {
            out.push((format!("engineer.{role}"), v.clone()));
        }
        out
    }
}
