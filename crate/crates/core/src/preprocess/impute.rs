//! Family-specific imputers: chained ridge regressions, grouped nearest
//! neighbours and training medians.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::preprocess::scale::RobustScale;
use crate::stats;

pub const ITERATIVE_MAX_ROUNDS: usize = 10;
pub const ITERATIVE_RIDGE: f64 = 1e-3;
pub const ITERATIVE_TOL: f64 = 1e-4;
pub const ITERATIVE_MIN_COLUMNS: usize = 2;
pub const ITERATIVE_MIN_ROWS: usize = 10;
pub const KNN_DEFAULT_K: usize = 5;

type Columns = [Vec<Option<f64>>];

/// Training median per column; an all-missing column gets 0 and a warning.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianImputer {
    pub medians: Vec<f64>,
    pub warnings: Vec<String>,
}

impl MedianImputer {
    pub fn fit(names: &[String], cols: &Columns) -> Self {
        let mut warnings = Vec::new();
        let medians = cols
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let present: Vec<f64> = c.iter().flatten().copied().collect();
                stats::median(&present).unwrap_or_else(|| {
                    warnings.push(format!("column `{}` has no training values; imputed as 0", names[j]));
                    0.0
                })
            })
            .collect();
        Self { medians, warnings }
    }

    pub fn apply_column(&self, j: usize, col: &[Option<f64>]) -> Vec<f64> {
        col.iter().map(|v| v.unwrap_or(self.medians[j])).collect()
    }
}

/// Missing cells replaced by the column median of the same data.
pub fn median_impute(names: &[String], cols: &Columns) -> (Vec<Vec<f64>>, Vec<String>) {
    let m = MedianImputer::fit(names, cols);
    let out = cols.iter().enumerate().map(|(j, c)| m.apply_column(j, c)).collect();
    (out, m.warnings)
}

/// Intercept plus one coefficient per column (the target's own slot is 0).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefs: Vec<f64>,
}

impl LinearModel {
    fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefs.iter().zip(row).map(|(c, x)| c * x).sum::<f64>()
    }
}

/// Ridge regression of column `target` on all other columns over `rows`.
/// The penalty applies to the centred Gram matrix, so the intercept is free.
fn ridge(x: &[Vec<f64>], target: usize, rows: &[usize], lambda: f64) -> LinearModel {
    let m = x.len();
    let preds: Vec<usize> = (0..m).filter(|&j| j != target).collect();
    let n = rows.len() as f64;
    let mut coefs = vec![0.0; m];
    if rows.is_empty() {
        return LinearModel { intercept: 0.0, coefs };
    }
    let y_mean = rows.iter().map(|&r| x[target][r]).sum::<f64>() / n;
    let means: Vec<f64> = preds.iter().map(|&j| rows.iter().map(|&r| x[j][r]).sum::<f64>() / n).collect();
    let p = preds.len();
    let gram = DMatrix::from_fn(p, p, |a, b| {
        let s: f64 = rows.iter().map(|&r| (x[preds[a]][r] - means[a]) * (x[preds[b]][r] - means[b])).sum();
        if a == b {
            s + lambda
        } else {
            s
        }
    });
    let rhs = DVector::from_fn(p, |a, _| rows.iter().map(|&r| (x[preds[a]][r] - means[a]) * (x[target][r] - y_mean)).sum());
    let w = gram
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| gram.lu().solve(&rhs))
        .unwrap_or_else(|| DVector::zeros(p));
    let mut intercept = y_mean;
    for (a, &j) in preds.iter().enumerate() {
        coefs[j] = w[a];
        intercept -= w[a] * means[a];
    }
    LinearModel { intercept, coefs }
}

/// Chained-equations imputer for meteorology columns.
#[derive(Debug, Clone, PartialEq)]
pub struct IterativeImputer {
    pub medians: Vec<f64>,
    pub iqrs: Vec<f64>,
    /// Final regression per column, refit on the converged training data.
    pub models: Vec<LinearModel>,
    pub rounds: usize,
    /// Max absolute imputed-cell change per training round.
    pub round_changes: Vec<f64>,
}

fn tolerance(iqr: f64) -> f64 {
    (ITERATIVE_TOL * iqr).max(1e-12)
}

impl IterativeImputer {
    pub fn fit(names: &[String], cols: &Columns) -> Result<Self> {
        let m = cols.len();
        let n = cols.first().map_or(0, Vec::len);
        if m < ITERATIVE_MIN_COLUMNS || n < ITERATIVE_MIN_ROWS {
            return Err(Error::TooFewColumns {
                needed: ITERATIVE_MIN_COLUMNS,
                min_rows: ITERATIVE_MIN_ROWS,
                columns: m,
                rows: n,
            });
        }
        let medians = MedianImputer::fit(names, cols).medians;
        let iqrs: Vec<f64> = cols
            .iter()
            .map(|c| stats::iqr(&c.iter().flatten().copied().collect::<Vec<_>>()).unwrap_or(0.0))
            .collect();
        let mut x: Vec<Vec<f64>> = cols.iter().enumerate().map(|(j, c)| c.iter().map(|v| v.unwrap_or(medians[j])).collect()).collect();
        let observed: Vec<Vec<usize>> = cols.iter().map(|c| (0..n).filter(|&i| c[i].is_some()).collect()).collect();
        let missing: Vec<Vec<usize>> = cols.iter().map(|c| (0..n).filter(|&i| c[i].is_none()).collect()).collect();

        let mut round_changes = Vec::new();
        let mut rounds = 0;
        if missing.iter().any(|v| !v.is_empty()) {
            for _ in 0..ITERATIVE_MAX_ROUNDS {
                rounds += 1;
                let mut converged = true;
                let mut round_max = 0.0f64;
                for j in 0..m {
                    if missing[j].is_empty() || observed[j].is_empty() {
                        continue;
                    }
                    let model = ridge(&x, j, &observed[j], ITERATIVE_RIDGE);
                    for &i in &missing[j] {
                        let row: Vec<f64> = x.iter().map(|c| c[i]).collect();
                        let new = model.predict(&row);
                        let change = (new - x[j][i]).abs();
                        round_max = round_max.max(change);
                        if change >= tolerance(iqrs[j]) {
                            converged = false;
                        }
                        x[j][i] = new;
                    }
                }
                round_changes.push(round_max);
                if converged {
                    break;
                }
            }
        }
        let models = (0..m)
            .map(|j| {
                if observed[j].is_empty() {
                    LinearModel { intercept: medians[j], coefs: vec![0.0; m] }
                } else {
                    ridge(&x, j, &observed[j], ITERATIVE_RIDGE)
                }
            })
            .collect();
        Ok(Self { medians, iqrs, models, rounds, round_changes })
    }

    /// Imputes with the fitted regressions, iterating from the training medians.
    pub fn apply(&self, cols: &Columns) -> Vec<Vec<f64>> {
        let n = cols.first().map_or(0, Vec::len);
        let mut x: Vec<Vec<f64>> =
            cols.iter().enumerate().map(|(j, c)| c.iter().map(|v| v.unwrap_or(self.medians[j])).collect()).collect();
        let missing: Vec<Vec<usize>> = cols.iter().map(|c| (0..n).filter(|&i| c[i].is_none()).collect()).collect();
        if missing.iter().all(Vec::is_empty) {
            return x;
        }
        for _ in 0..ITERATIVE_MAX_ROUNDS {
            let mut converged = true;
            for (j, rows) in missing.iter().enumerate() {
                for &i in rows {
                    let row: Vec<f64> = x.iter().map(|c| c[i]).collect();
                    let new = self.models[j].predict(&row);
                    if (new - x[j][i]).abs() >= tolerance(self.iqrs[j]) {
                        converged = false;
                    }
                    x[j][i] = new;
                }
            }
            if converged {
                break;
            }
        }
        x
    }
}

/// Nearest-neighbour imputer over robust-scaled vegetation columns, searching
/// the query's (district, season) group first.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnImputer {
    pub k: usize,
    pub scales: Vec<RobustScale>,
    /// Training rows, row-major, raw values.
    pub reference: Vec<Vec<Option<f64>>>,
    pub groups: Vec<(String, String)>,
    pub medians: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KnnStats {
    pub group_hits: usize,
    pub global_fallbacks: usize,
    pub median_fallbacks: usize,
}

impl KnnImputer {
    pub fn fit(names: &[String], cols: &Columns, groups: &[(String, String)], k: usize) -> Self {
        let n = cols.first().map_or(0, Vec::len);
        let scales = cols
            .iter()
            .map(|c| {
                let present: Vec<f64> = c.iter().flatten().copied().collect();
                RobustScale::fit(&present).unwrap_or(RobustScale { center: 0.0, spread: 1.0 })
            })
            .collect();
        let reference = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        Self {
            k: k.max(1),
            scales,
            reference,
            groups: groups.to_vec(),
            medians: MedianImputer::fit(names, cols).medians,
        }
    }

    /// Euclidean distance over mutually present columns other than `skip`,
    /// rescaled by (columns / used) so partial overlaps stay comparable.
    fn distance(&self, a: &[Option<f64>], b: &[Option<f64>], skip: usize) -> Option<f64> {
        let p = a.len();
        let mut sum = 0.0;
        let mut used = 0;
        for j in (0..p).filter(|&j| j != skip) {
            if let (Some(u), Some(v)) = (a[j], b[j]) {
                let d = self.scales[j].apply(u) - self.scales[j].apply(v);
                sum += d * d;
                used += 1;
            }
        }
        (used > 0).then(|| (sum * p as f64 / used as f64).sqrt())
    }

    fn neighbours(&self, query: &[Option<f64>], group: &(String, String), col: usize, stats: &mut KnnStats) -> Vec<usize> {
        let usable: Vec<(f64, usize)> = self
            .reference
            .iter()
            .enumerate()
            .filter(|(_, r)| r[col].is_some())
            .filter_map(|(i, r)| self.distance(query, r, col).map(|d| (d, i)))
            .collect();
        let in_group: Vec<(f64, usize)> = usable.iter().copied().filter(|&(_, i)| &self.groups[i] == group).collect();
        let mut pool = if in_group.len() >= self.k + 1 {
            stats.group_hits += 1;
            in_group
        } else {
            if !usable.is_empty() {
                stats.global_fallbacks += 1;
            }
            usable
        };
        pool.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        pool.into_iter().take(self.k).map(|(_, i)| i).collect()
    }

    pub fn apply(&self, cols: &Columns, groups: &[(String, String)]) -> (Vec<Vec<f64>>, KnnStats) {
        let n = cols.first().map_or(0, Vec::len);
        let p = cols.len();
        let mut stats = KnnStats::default();
        let mut out: Vec<Vec<f64>> = vec![vec![0.0; n]; p];
        for i in 0..n {
            let query: Vec<Option<f64>> = cols.iter().map(|c| c[i]).collect();
            for j in 0..p {
                out[j][i] = match query[j] {
                    Some(v) => v,
                    None => {
                        let nb = self.neighbours(&query, &groups[i], j, &mut stats);
                        if nb.is_empty() {
                            stats.median_fallbacks += 1;
                            self.medians[j]
                        } else {
                            nb.iter().map(|&r| self.reference[r][j].expect("usable neighbour")).sum::<f64>() / nb.len() as f64
                        }
                    }
                };
            }
        }
        (out, stats)
    }
}

/// Fits on `cols` and imputes the same rows.
pub fn knn_impute(names: &[String], cols: &Columns, groups: &[(String, String)], k: usize) -> Vec<Vec<f64>> {
    KnnImputer::fit(names, cols, groups, k).apply(cols, groups).0
}

/// Distinct (district, season) labels, for reporting.
pub fn group_labels(groups: &[(String, String)]) -> BTreeSet<(String, String)> {
    groups.iter().cloned().collect()
}
