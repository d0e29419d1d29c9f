//! Baseline regressors behind one fit/predict contract.

pub mod boosting;
pub mod elastic_net;
pub mod forest;
pub mod svr;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::frame::DenseMatrix;

pub use boosting::{BoostingParams, GradientBoosting};
pub use elastic_net::{ElasticNet, ElasticNetParams};
pub use forest::{ForestParams, RandomForest};
pub use svr::{Svr, SvrParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LearnerKind {
    ElasticNet,
    RandomForest,
    GradientBoosting,
    SvrRbf,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 4] =
        [LearnerKind::ElasticNet, LearnerKind::RandomForest, LearnerKind::GradientBoosting, LearnerKind::SvrRbf];

    pub fn as_str(&self) -> &'static str {
        match self {
            LearnerKind::ElasticNet => "elastic_net",
            LearnerKind::RandomForest => "random_forest",
            LearnerKind::GradientBoosting => "gradient_boosting",
            LearnerKind::SvrRbf => "svr_rbf",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LearnerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown learner `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearnerConfig {
    pub elastic_net: ElasticNetParams,
    pub random_forest: ForestParams,
    pub gradient_boosting: BoostingParams,
    pub svr: SvrParams,
}

impl LearnerConfig {
    /// Flat name=value listing for reports.
    pub fn describe(&self, kind: LearnerKind) -> String {
        match kind {
            LearnerKind::ElasticNet => {
                let h = &self.elastic_net;
                format!("alpha={} l1_ratio={} max_iter={} tol={}", h.alpha, h.l1_ratio, h.max_iter, h.tol)
            }
            LearnerKind::RandomForest => {
                let h = &self.random_forest;
                let mtry = h.mtry.map_or("ceil(p/3)".to_string(), |m| m.to_string());
                format!("trees={} mtry={} min_leaf={} bootstrap={}", h.trees, mtry, h.min_leaf, h.bootstrap)
            }
            LearnerKind::GradientBoosting => {
                let h = &self.gradient_boosting;
                format!(
                    "rounds={} learning_rate={} max_depth={} subsample={} min_leaf={}",
                    h.rounds, h.learning_rate, h.max_depth, h.subsample, h.min_leaf
                )
            }
            LearnerKind::SvrRbf => {
                let h = &self.svr;
                let gamma = h.gamma.map_or("1/(p*var(X))".to_string(), |g| g.to_string());
                format!("C={} epsilon={} gamma={} tol={} max_passes={}", h.c, h.epsilon, gamma, h.tol, h.max_passes)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelState {
    ElasticNet(ElasticNet),
    RandomForest(RandomForest),
    GradientBoosting(GradientBoosting),
    Svr(Svr),
}

/// A fitted regressor plus the feature schema it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub kind: LearnerKind,
    pub features: Vec<String>,
    pub seed: u64,
    pub state: ModelState,
}

impl FittedModel {
    /// Predicts rows of `x`, matching columns by name.
    pub fn predict(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        let x = x.select(&self.features)?;
        let out: Vec<f64> = x.rows().iter().map(|r| self.predict_row(r)).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("prediction"));
        }
        Ok(out)
    }

    /// Predicts one row given in the fitted feature order.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.state {
            ModelState::ElasticNet(m) => m.predict_row(row),
            ModelState::RandomForest(m) => m.predict_row(row),
            ModelState::GradientBoosting(m) => m.predict_row(row),
            ModelState::Svr(m) => m.predict_row(row),
        }
    }
}

pub fn fit(kind: LearnerKind, x: &DenseMatrix, y: &[f64], cfg: &LearnerConfig, seed: u64) -> Result<FittedModel> {
    if x.n_rows != y.len() {
        return Err(Error::LengthMismatch(x.n_rows, y.len()));
    }
    if y.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if !x.all_finite() {
        return Err(Error::NonFiniteInput("feature matrix"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("target"));
    }
    let state = match kind {
        LearnerKind::ElasticNet => ModelState::ElasticNet(ElasticNet::fit(&x.columns, y, &cfg.elastic_net)),
        LearnerKind::RandomForest => ModelState::RandomForest(RandomForest::fit(&x.columns, y, &cfg.random_forest, seed)),
        LearnerKind::GradientBoosting => {
            ModelState::GradientBoosting(GradientBoosting::fit(&x.columns, y, &cfg.gradient_boosting, seed))
        }
        LearnerKind::SvrRbf => ModelState::Svr(Svr::fit(&x.rows(), y, &cfg.svr, seed)),
    };
    if let ModelState::ElasticNet(m) = &state {
        if !m.converged {
            log::warn!("elastic net stopped at max_iter without converging");
        }
    }
    if let ModelState::Svr(m) = &state {
        if !m.converged {
            log::warn!("SVR hit the sweep cap before max_passes clean passes");
        }
    }
    Ok(FittedModel { kind, features: x.names.clone(), seed, state })
}
