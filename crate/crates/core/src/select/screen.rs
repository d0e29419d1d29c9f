//! Variance screen, collinearity pruning and family preservation.

use std::collections::BTreeSet;

use crate::family::Family;
use crate::stats;

pub const COLLINEAR_THRESHOLD: f64 = 0.98;

/// True when a column carries no usable variation: at most one distinct
/// present value, or sample std below 1e-8 * (|mean| + 1).
pub fn is_near_zero_variance(values: &[Option<f64>]) -> bool {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    let distinct: BTreeSet<u64> = present.iter().map(|v| v.to_bits()).collect();
    if distinct.len() <= 1 {
        return true;
    }
    let mean = stats::mean(&present).unwrap_or(0.0);
    let std = stats::sample_std(&present).unwrap_or(0.0);
    std < 1e-8 * (mean.abs() + 1.0)
}

/// Indices of surviving columns and names of the dropped ones.
pub fn drop_near_zero_variance(names: &[String], columns: &[Vec<Option<f64>>]) -> (Vec<usize>, Vec<String>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (j, c) in columns.iter().enumerate() {
        if is_near_zero_variance(c) {
            dropped.push(names[j].clone());
        } else {
            kept.push(j);
        }
    }
    (kept, dropped)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrunedPair {
    pub kept: String,
    pub dropped: String,
    pub r: f64,
}

/// Walks pairs with |r| >= `threshold` from the most correlated down, dropping
/// the member with lower MI to the target (ties drop the larger name). Pairs
/// touching an already dropped feature are skipped.
///
/// `candidates` indexes into `names`/`columns`/`mi_y`; returns the survivors in
/// input order plus the pruned pairs.
pub fn prune_collinear(
    candidates: &[usize],
    names: &[String],
    columns: &[Vec<Option<f64>>],
    mi_y: &[f64],
    threshold: f64,
) -> (Vec<usize>, Vec<PrunedPair>) {
    let pairs: Vec<(usize, usize)> = candidates
        .iter()
        .enumerate()
        .flat_map(|(a, &i)| candidates[a + 1..].iter().map(move |&j| (i, j)))
        .collect();
    let rs = crate::par::map(&pairs, |&(i, j)| {
        let (x, y) = stats::complete_pairs(&columns[i], &columns[j]);
        stats::pearson(&x, &y)
    });
    let mut hot: Vec<(f64, usize, usize)> = pairs
        .iter()
        .zip(rs)
        .filter(|(_, r)| r.abs() >= threshold)
        .map(|(&(i, j), r)| (r, i, j))
        .collect();
    hot.sort_by(|a, b| {
        b.0.abs()
            .total_cmp(&a.0.abs())
            .then_with(|| names[a.1].cmp(&names[b.1]))
            .then_with(|| names[a.2].cmp(&names[b.2]))
    });
    let mut dropped = vec![false; names.len()];
    let mut out = Vec::new();
    for (r, i, j) in hot {
        if dropped[i] || dropped[j] {
            continue;
        }
        let drop_j = match mi_y[i].total_cmp(&mi_y[j]) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => names[j] > names[i],
        };
        let (keep, drop) = if drop_j { (i, j) } else { (j, i) };
        dropped[drop] = true;
        out.push(PrunedPair { kept: names[keep].clone(), dropped: names[drop].clone(), r });
    }
    (candidates.iter().copied().filter(|&j| !dropped[j]).collect(), out)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Preservation {
    pub rescued: Vec<String>,
    pub absent: Vec<Family>,
}

/// Re-adds, for every family left without survivors, its removed feature with
/// the highest MI to the target (ties to the smaller name). Families with no
/// features at all are recorded as absent.
pub fn preserve_families(
    survivors: &mut Vec<usize>,
    removed: &[usize],
    names: &[String],
    families: &[Family],
    mi_y: &[f64],
) -> Preservation {
    let mut report = Preservation::default();
    for family in Family::ALL {
        if survivors.iter().any(|&j| families[j] == family) {
            continue;
        }
        let best = removed
            .iter()
            .copied()
            .filter(|&j| families[j] == family)
            .min_by(|&a, &b| mi_y[b].total_cmp(&mi_y[a]).then_with(|| names[a].cmp(&names[b])));
        match best {
            Some(j) => {
                survivors.push(j);
                report.rescued.push(names[j].clone());
            }
            None => report.absent.push(family),
        }
    }
    survivors.sort_unstable();
    report
}
