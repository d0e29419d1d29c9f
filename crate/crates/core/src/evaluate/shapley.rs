//! Interventional Shapley values by subset enumeration or permutation sampling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MAX_EXACT_FEATURES: usize = 12;
pub const MIN_SAMPLED_BUDGET: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapleyMode {
    Exact,
    /// Number of random permutations per explained row.
    Sampled(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyAttribution {
    /// Mean model output over the background.
    pub base: f64,
    /// `phi[row][feature]`.
    pub phi: Vec<Vec<f64>>,
    pub predictions: Vec<f64>,
}

impl ShapleyAttribution {
    /// Mean |φ| per feature.
    pub fn global_importance(&self) -> Vec<f64> {
        let p = self.phi.first().map_or(0, Vec::len);
        let n = self.phi.len().max(1) as f64;
        (0..p).map(|j| self.phi.iter().map(|r| r[j].abs()).sum::<f64>() / n).collect()
    }
}

/// v(T): mean model output with features in `mask` from `x` and the rest from
/// each background row.
fn value<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], background: &[Vec<f64>], mask: u32, buf: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for b in background {
        for j in 0..x.len() {
            buf[j] = if mask & (1 << j) != 0 { x[j] } else { b[j] };
        }
        total += f(buf);
    }
    total / background.len() as f64
}

fn factorials(p: usize) -> Vec<f64> {
    let mut out = vec![1.0; p + 1];
    for i in 1..=p {
        out[i] = out[i - 1] * i as f64;
    }
    out
}

fn exact_row<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], background: &[Vec<f64>]) -> Vec<f64> {
    let p = x.len();
    let mut buf = vec![0.0; p];
    let v: Vec<f64> = (0u32..1 << p).map(|m| value(f, x, background, m, &mut buf)).collect();
    let fact = factorials(p);
    let weight: Vec<f64> = (0..p).map(|s| fact[s] * fact[p - s - 1] / fact[p]).collect();
    (0..p)
        .map(|j| {
            let bit = 1u32 << j;
            (0u32..1 << p)
                .filter(|m| m & bit == 0)
                .map(|m| weight[m.count_ones() as usize] * (v[(m | bit) as usize] - v[m as usize]))
                .sum()
        })
        .collect()
}

fn sampled_row<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], background: &[Vec<f64>], budget: usize, seed: u64) -> Vec<f64> {
    let p = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi = vec![0.0; p];
    let mut order: Vec<usize> = (0..p).collect();
    let mut buf = vec![0.0; p];
    for _ in 0..budget {
        order.shuffle(&mut rng);
        let mut mask = 0u32;
        let mut prev = value(f, x, background, mask, &mut buf);
        for &j in &order {
            mask |= 1 << j;
            let cur = value(f, x, background, mask, &mut buf);
            phi[j] += cur - prev;
            prev = cur;
        }
    }
    phi.iter().map(|v| v / budget as f64).collect()
}

/// Attributions for each row of `explain` (row-major, model feature order).
pub fn shapley_importance<F>(f: &F, explain: &[Vec<f64>], background: &[Vec<f64>], mode: ShapleyMode, seed: u64) -> Result<ShapleyAttribution>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let p = explain.first().or(background.first()).map_or(0, Vec::len);
    if background.is_empty() {
        return Err(Error::InvalidArgument("Shapley background is empty".into()));
    }
    if explain.iter().chain(background).any(|r| r.len() != p) {
        return Err(Error::SchemaMismatch("Shapley rows differ in width".into()));
    }
    match mode {
        ShapleyMode::Exact if p > MAX_EXACT_FEATURES => {
            return Err(Error::TooManyFeaturesForExact { max: MAX_EXACT_FEATURES, got: p })
        }
        ShapleyMode::Sampled(b) if b < MIN_SAMPLED_BUDGET => {
            return Err(Error::InvalidArgument(format!("sampled Shapley budget must be >= {MIN_SAMPLED_BUDGET}")))
        }
        ShapleyMode::Sampled(_) if p >= 32 => {
            return Err(Error::InvalidArgument("Shapley supports at most 31 features".into()))
        }
        _ => {}
    }
    let mut buf = vec![0.0; p];
    let base = value(f, &vec![0.0; p], background, 0, &mut buf);
    let idx: Vec<usize> = (0..explain.len()).collect();
    let phi = crate::par::map(&idx, |&i| match mode {
        ShapleyMode::Exact => exact_row(f, &explain[i], background),
        ShapleyMode::Sampled(b) => sampled_row(f, &explain[i], background, b, seed.wrapping_add(i as u64)),
    });
    let predictions = explain.iter().map(|r| f(r)).collect();
    Ok(ShapleyAttribution { base, phi, predictions })
}
