//! Plug-in mutual information over equal-frequency bins.

use crate::error::{Error, Result};
use crate::stats;

pub const MIN_SAMPLES: usize = 5;

/// B = max(2, min(8, floor(sqrt(n/5)))).
pub fn n_bins(n: usize) -> usize {
    ((n as f64 / 5.0).sqrt().floor() as usize).clamp(2, 8)
}

/// Rank-based bin labels. Each distinct value goes to the bin of the rank at
/// which it first appears in sorted order, so tied values always share a bin.
pub fn quantile_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut out = vec![0; n];
    let mut start = 0;
    while start < n {
        let v = values[order[start]];
        let mut end = start;
        while end < n && values[order[end]] == v {
            end += 1;
        }
        let bin = (start * bins / n).min(bins - 1);
        for &i in &order[start..end] {
            out[i] = bin;
        }
        start = end;
    }
    out
}

/// MI in nats between two labelled variables of equal length.
pub fn mi_from_bins(a: &[usize], ba: usize, b: &[usize], bb: usize) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let mut joint = vec![0usize; ba * bb];
    let mut ca = vec![0usize; ba];
    let mut cb = vec![0usize; bb];
    for (&i, &j) in a.iter().zip(b) {
        joint[i * bb + j] += 1;
        ca[i] += 1;
        cb[j] += 1;
    }
    let nf = n as f64;
    let mut terms = Vec::new();
    for i in 0..ba {
        for j in 0..bb {
            let c = joint[i * bb + j];
            if c > 0 {
                let c = c as f64;
                terms.push(c / nf * (c * nf / (ca[i] as f64 * cb[j] as f64)).ln());
            }
        }
    }
    // summing in sorted order makes the result independent of argument order
    terms.sort_by(f64::total_cmp);
    terms.iter().sum::<f64>().max(0.0)
}

/// MI on dense, equal-length samples.
pub fn mutual_information_dense(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_SAMPLES, got: n });
    }
    let b = n_bins(n);
    Ok(mi_from_bins(&quantile_bins(x, b), b, &quantile_bins(y, b), b))
}

/// MI over pairwise-complete observations.
pub fn mutual_information(x: &[Option<f64>], y: &[Option<f64>]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let (a, b) = stats::complete_pairs(x, y);
    mutual_information_dense(&a, &b)
}

/// Pre-binned dense column, reused across many MI evaluations.
#[derive(Debug, Clone)]
pub struct Binned {
    pub labels: Vec<usize>,
    pub bins: usize,
}

impl Binned {
    pub fn new(values: &[f64]) -> Self {
        let bins = n_bins(values.len());
        Self { labels: quantile_bins(values, bins), bins }
    }

    pub fn mi(&self, other: &Binned) -> f64 {
        mi_from_bins(&self.labels, self.bins, &other.labels, other.bins)
    }
}
