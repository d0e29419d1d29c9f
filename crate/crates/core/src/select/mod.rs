//! Fold-local feature selection: variance screen, collinearity pruning,
//! family preservation and mRMR ranking.

pub mod mi;
pub mod mrmr;
pub mod screen;

pub use mi::mutual_information;
pub use mrmr::{mrmr_select, Criterion, RelevanceStats, Selected, DEFAULT_EPSILON};
pub use screen::{PrunedPair, COLLINEAR_THRESHOLD};

use crate::error::{Error, Result};
use crate::family::Family;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectConfig {
    pub k: usize,
    pub criterion: Criterion,
    pub epsilon: f64,
    pub collinear_threshold: f64,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self { k: 15, criterion: Criterion::Ratio, epsilon: DEFAULT_EPSILON, collinear_threshold: COLLINEAR_THRESHOLD }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub dropped_zero_variance: Vec<String>,
    pub pruned_collinear: Vec<PrunedPair>,
    pub family_rescued: Vec<String>,
    pub absent_families: Vec<Family>,
    /// Relevance components over the final pool.
    pub relevance: Vec<RelevanceStats>,
    pub selected: Vec<Selected>,
    pub criterion: Criterion,
    pub epsilon: f64,
}

impl SelectionReport {
    pub fn selected_names(&self) -> Vec<String> {
        self.selected.iter().map(|s| s.name.clone()).collect()
    }
}

/// Runs the full selection on training rows.
///
/// The variance screen looks at the raw training values; pruning, rescue and
/// mRMR use the preprocessed training matrix.
pub fn select_features(
    names: &[String],
    families: &[Family],
    raw: &[Vec<Option<f64>>],
    transformed: &[Vec<f64>],
    y: &[f64],
    cfg: &SelectConfig,
) -> Result<SelectionReport> {
    let p = names.len();
    if families.len() != p || raw.len() != p || transformed.len() != p {
        return Err(Error::LengthMismatch(p, transformed.len()));
    }
    let (after_variance, dropped_zero_variance) = screen::drop_near_zero_variance(names, raw);

    let yb = mi::Binned::new(y);
    let mi_y: Vec<f64> = crate::par::map(transformed, |c| mi::Binned::new(c).mi(&yb));
    let dense: Vec<Vec<Option<f64>>> = transformed.iter().map(|c| c.iter().map(|v| Some(*v)).collect()).collect();
    let (mut pool, pruned_collinear) =
        screen::prune_collinear(&after_variance, names, &dense, &mi_y, cfg.collinear_threshold);

    let removed: Vec<usize> = (0..p).filter(|j| !pool.contains(j)).collect();
    let preservation = screen::preserve_families(&mut pool, &removed, names, families, &mi_y);

    let pool_names: Vec<String> = pool.iter().map(|&j| names[j].clone()).collect();
    let pool_cols: Vec<&[f64]> = pool.iter().map(|&j| transformed[j].as_slice()).collect();
    let (relevance, selected) = if pool.is_empty() {
        if cfg.k > 0 {
            return Err(Error::EmptyPool);
        }
        (Vec::new(), Vec::new())
    } else {
        let stats = mrmr::relevance_stats(&pool_names, &pool_cols, y)?;
        let rel: Vec<f64> = stats.iter().map(|s| s.relevance).collect();
        let nmi = mrmr::normalised_pairwise_mi(&pool_cols);
        let sel = mrmr::mrmr_from_scores(&pool_names, &rel, &nmi, cfg.k, cfg.criterion, cfg.epsilon)?;
        (stats, sel)
    };
    Ok(SelectionReport {
        dropped_zero_variance,
        pruned_collinear,
        family_rescued: preservation.rescued,
        absent_families: preservation.absent,
        relevance,
        selected,
        criterion: cfg.criterion,
        epsilon: cfg.epsilon,
    })
}
