//! Per-date derivation rules applied to fetched input bands.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::family::Derivation;
use crate::series::TimeSeries;

/// Below this magnitude the EVI denominator yields a missing value.
pub const EVI_DENOMINATOR_FLOOR: f64 = 1e-9;

/// 2.5 (NIR - RED) / (NIR + 6 RED - 7.5 BLUE + 1); `None` on a vanishing denominator.
pub fn evi(nir: f64, red: f64, blue: f64) -> Option<f64> {
    let denom = nir + 6.0 * red - 7.5 * blue + 1.0;
    if denom.abs() < EVI_DENOMINATOR_FLOOR {
        None
    } else {
        Some(2.5 * (nir - red) / denom)
    }
}

/// max(0, PEV - TP)
pub fn irrigation(pev: f64, tp: f64) -> f64 {
    (pev - tp).max(0.0)
}

/// Applies `rule` date by date. Any missing input on a date gives a missing output.
pub fn derive_variable(rule: &Derivation, inputs: &BTreeMap<String, TimeSeries>) -> Result<TimeSeries> {
    let names = rule.inputs();
    if names.is_empty() {
        return Err(Error::InvalidArgument(format!("derivation {rule} has no per-date rule")));
    }
    let series: Vec<&TimeSeries> = names
        .iter()
        .map(|n| {
            inputs.get(*n).ok_or_else(|| Error::MissingInputSeries { rule: rule.to_string(), name: n.to_string() })
        })
        .collect::<Result<_>>()?;
    let first = series[0];
    for s in &series[1..] {
        if s.len() != first.len() || s.dates().zip(first.dates()).any(|(a, b)| a != b) {
            return Err(Error::MisalignedDates(rule.to_string()));
        }
    }
    let points = (0..first.len())
        .map(|i| {
            let date = first.points[i].0;
            let vals: Option<Vec<f64>> = series.iter().map(|s| s.points[i].1).collect();
            let out = vals.and_then(|v| match rule {
                Derivation::Evi => evi(v[0], v[1], v[2]),
                Derivation::Irrigation => Some(irrigation(v[0], v[1])),
                _ => unreachable!("rules without inputs rejected above"),
            });
            (date, out)
        })
        .collect();
    Ok(TimeSeries::new(points))
}
