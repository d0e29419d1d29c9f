//! Simplex-constrained least squares over out-of-fold prediction columns.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleWeights {
    pub weights: Vec<f64>,
    /// Attained ‖y − Ŷw‖².
    pub objective: f64,
}

pub const MAX_EXACT_MODELS: usize = 12;

/// ‖y − Σ_j w_j p_j‖².
pub fn objective(preds: &[Vec<f64>], y: &[f64], w: &[f64]) -> f64 {
    y.iter()
        .enumerate()
        .map(|(i, yi)| {
            let f: f64 = preds.iter().zip(w).map(|(p, wj)| p[i] * wj).sum();
            (yi - f).powi(2)
        })
        .sum()
}

/// Minimises ‖y − Ŷw‖² over w ≥ 0, Σw = 1.
///
/// The optimum of this convex problem is the equality-constrained minimiser on
/// some face of the simplex, so every support set is solved through its KKT
/// system (pseudo-inverse, robust to identical columns) and the best feasible
/// candidate is kept. `preds` holds one column per model.
pub fn fit_ensemble_weights(preds: &[Vec<f64>], y: &[f64]) -> Result<EnsembleWeights> {
    let m = preds.len();
    if m == 0 {
        return Err(Error::NoModels);
    }
    if m > MAX_EXACT_MODELS {
        return Err(Error::InvalidArgument(format!("at most {MAX_EXACT_MODELS} models supported")));
    }
    if let Some(p) = preds.iter().find(|p| p.len() != y.len()) {
        return Err(Error::LengthMismatch(p.len(), y.len()));
    }
    if preds.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("ensemble inputs"));
    }
    let gram = DMatrix::from_fn(m, m, |a, b| preds[a].iter().zip(&preds[b]).map(|(u, v)| u * v).sum::<f64>());
    let py = DVector::from_fn(m, |a, _| preds[a].iter().zip(y).map(|(u, v)| u * v).sum::<f64>());

    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 1u32..(1 << m) {
        let support: Vec<usize> = (0..m).filter(|j| mask & (1 << j) != 0).collect();
        let s = support.len();
        let mut kkt = DMatrix::zeros(s + 1, s + 1);
        let mut rhs = DVector::zeros(s + 1);
        for (a, &ja) in support.iter().enumerate() {
            for (b, &jb) in support.iter().enumerate() {
                kkt[(a, b)] = gram[(ja, jb)];
            }
            kkt[(a, s)] = 1.0;
            kkt[(s, a)] = 1.0;
            rhs[a] = py[ja];
        }
        rhs[s] = 1.0;
        let scale = kkt.abs().max().max(1.0);
        let Ok(sol) = kkt.svd(true, true).solve(&rhs, 1e-13 * scale) else { continue };
        let mut w = vec![0.0; m];
        for (a, &j) in support.iter().enumerate() {
            w[j] = sol[a];
        }
        if w.iter().any(|v| !v.is_finite() || *v < -1e-12) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            continue;
        }
        let w = clip_renormalise(w);
        let obj = objective(preds, y, &w);
        if best.as_ref().is_none_or(|(_, b)| obj < *b) {
            best = Some((w, obj));
        }
    }
    let (weights, objective) = best.unwrap_or_else(|| {
        // every vertex is feasible, so this only guards degenerate numerics
        let j = (0..m)
            .min_by(|&a, &b| vertex(preds, y, a).total_cmp(&vertex(preds, y, b)))
            .expect("m >= 1");
        let mut w = vec![0.0; m];
        w[j] = 1.0;
        let o = vertex(preds, y, j);
        (w, o)
    });
    Ok(EnsembleWeights { weights, objective })
}

fn vertex(preds: &[Vec<f64>], y: &[f64], j: usize) -> f64 {
    preds[j].iter().zip(y).map(|(p, v)| (v - p).powi(2)).sum()
}

fn clip_renormalise(mut w: Vec<f64>) -> Vec<f64> {
    for v in &mut w {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let s: f64 = w.iter().sum();
    for v in &mut w {
        *v /= s;
    }
    w
}

pub fn combine(preds: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let n = preds.first().map_or(0, Vec::len);
    (0..n).map(|i| preds.iter().zip(w).map(|(p, wj)| p[i] * wj).sum()).collect()
}
