//! Relevance scoring and greedy minimum-redundancy maximum-relevance selection.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::select::mi::Binned;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Criterion {
    /// relevance - redundancy
    Difference,
    /// relevance / (redundancy + epsilon)
    #[default]
    Ratio,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Difference => "DIFFERENCE",
            Criterion::Ratio => "RATIO",
        })
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "difference" | "diff" => Ok(Criterion::Difference),
            "ratio" | "quotient" => Ok(Criterion::Ratio),
            other => Err(Error::InvalidArgument(format!("unknown criterion `{other}`"))),
        }
    }
}

pub const DEFAULT_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceStats {
    pub name: String,
    pub mi: f64,
    pub pearson: f64,
    pub spearman: f64,
    pub relevance: f64,
}

fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / range).collect()
}

/// Fills `relevance` with the mean of min-max normalised MI, |pearson| and
/// |spearman| across the given candidates.
pub fn relevance_score(stats: &mut [RelevanceStats]) {
    let mi = min_max(&stats.iter().map(|s| s.mi).collect::<Vec<_>>());
    let p = min_max(&stats.iter().map(|s| s.pearson.abs()).collect::<Vec<_>>());
    let r = min_max(&stats.iter().map(|s| s.spearman.abs()).collect::<Vec<_>>());
    for (i, s) in stats.iter_mut().enumerate() {
        s.relevance = (mi[i] + p[i] + r[i]) / 3.0;
    }
}

/// Raw relevance components for dense columns against the target.
pub fn relevance_stats(names: &[String], columns: &[&[f64]], y: &[f64]) -> Result<Vec<RelevanceStats>> {
    let yb = Binned::new(y);
    let idx: Vec<usize> = (0..names.len()).collect();
    let out = crate::par::map(&idx, |&j| -> Result<RelevanceStats> {
        let x = columns[j];
        if x.len() != y.len() {
            return Err(Error::LengthMismatch(x.len(), y.len()));
        }
        if x.len() < super::mi::MIN_SAMPLES {
            return Err(Error::TooFewSamples { needed: super::mi::MIN_SAMPLES, got: x.len() });
        }
        Ok(RelevanceStats {
            name: names[j].clone(),
            mi: Binned::new(x).mi(&yb),
            pearson: stats::pearson(x, y),
            spearman: stats::spearman(x, y),
            relevance: 0.0,
        })
    });
    let mut stats: Vec<RelevanceStats> = out.into_iter().collect::<Result<_>>()?;
    relevance_score(&mut stats);
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selected {
    pub name: String,
    pub relevance: f64,
    pub redundancy: f64,
    pub score: f64,
}

/// Pairwise MI between pool columns, normalised by the largest off-diagonal value.
pub fn normalised_pairwise_mi(columns: &[&[f64]]) -> Vec<Vec<f64>> {
    let m = columns.len();
    let binned = crate::par::map(columns, |c| Binned::new(c));
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let vals = crate::par::map(&pairs, |&(i, j)| binned[i].mi(&binned[j]));
    let max = vals.iter().copied().fold(0.0, f64::max);
    let mut out = vec![vec![0.0; m]; m];
    for (&(i, j), v) in pairs.iter().zip(vals) {
        let nv = if max > 0.0 { v / max } else { 0.0 };
        out[i][j] = nv;
        out[j][i] = nv;
    }
    out
}

fn score(mode: Criterion, relevance: f64, redundancy: f64, epsilon: f64) -> f64 {
    match mode {
        Criterion::Difference => relevance - redundancy,
        Criterion::Ratio => relevance / (redundancy + epsilon),
    }
}

/// Greedy mRMR from precomputed relevance and normalised pairwise MI.
///
/// The first pick maximises relevance; each later pick maximises the chosen
/// criterion with redundancy = mean normalised MI to the features already
/// selected. Exact score ties go to the smaller name.
pub fn mrmr_from_scores(
    names: &[String],
    relevance: &[f64],
    nmi: &[Vec<f64>],
    k: usize,
    mode: Criterion,
    epsilon: f64,
) -> Result<Vec<Selected>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    if names.is_empty() {
        return Err(Error::EmptyPool);
    }
    let m = names.len();
    let mut chosen: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    let mut taken = vec![false; m];
    while chosen.len() < k.min(m) {
        let mut best: Option<(usize, f64, f64)> = None;
        for f in (0..m).filter(|&f| !taken[f]) {
            let (red, s) = if chosen.is_empty() {
                (0.0, relevance[f])
            } else {
                let red = chosen.iter().map(|&s| nmi[f][s]).sum::<f64>() / chosen.len() as f64;
                (red, score(mode, relevance[f], red, epsilon))
            };
            let better = match best {
                None => true,
                Some((b, _, bs)) => s > bs || (s == bs && names[f] < names[b]),
            };
            if better {
                best = Some((f, red, s));
            }
        }
        let (f, red, s) = best.expect("an untaken candidate remains");
        taken[f] = true;
        chosen.push(f);
        out.push(Selected { name: names[f].clone(), relevance: relevance[f], redundancy: red, score: s });
    }
    Ok(out)
}

/// mRMR over dense pool columns.
pub fn mrmr_select(
    names: &[String],
    columns: &[&[f64]],
    y: &[f64],
    k: usize,
    mode: Criterion,
    epsilon: f64,
) -> Result<Vec<Selected>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    if names.is_empty() {
        return Err(Error::EmptyPool);
    }
    let stats = relevance_stats(names, columns, y)?;
    let rel: Vec<f64> = stats.iter().map(|s| s.relevance).collect();
    let nmi = normalised_pairwise_mi(columns);
    mrmr_from_scores(names, &rel, &nmi, k, mode, epsilon)
}
