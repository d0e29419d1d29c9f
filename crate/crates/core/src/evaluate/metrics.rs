use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSet {
    pub rmse: f64,
    pub mae: f64,
    /// `None` when the target is constant.
    pub r2: Option<f64>,
    /// Percent, over non-zero targets; `None` when every target is zero.
    pub mape: Option<f64>,
    pub mape_excluded: usize,
}

pub fn compute_metrics(y: &[f64], yhat: &[f64]) -> Result<MetricSet> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch(y.len(), yhat.len()));
    }
    if y.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: y.len() });
    }
    let n = y.len() as f64;
    let mse = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
    let mae = y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    let mean = y.iter().sum::<f64>() / n;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let sse = mse * n;
    let r2 = (sst > 0.0).then(|| 1.0 - sse / sst);
    let nonzero: Vec<(f64, f64)> = y.iter().zip(yhat).filter(|(a, _)| **a != 0.0).map(|(a, b)| (*a, *b)).collect();
    let mape = (!nonzero.is_empty())
        .then(|| nonzero.iter().map(|(a, b)| (a - b).abs() / a.abs()).sum::<f64>() / nonzero.len() as f64 * 100.0);
    Ok(MetricSet { rmse: mse.sqrt(), mae, r2, mape, mape_excluded: y.len() - nonzero.len() })
}
