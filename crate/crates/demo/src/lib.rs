//! WebAssembly bindings for three interactive pieces of unicrop: mRMR feature
//! ranking, simplex-constrained ensemble weights and exact Shapley values for a
//! small polynomial model.
//!
//! Every export takes and returns JSON text. The plain `*_json` functions are
//! usable from native Rust too.

use serde::{Deserialize, Serialize};
use unicrop::evaluate::{fit_ensemble_weights, shapley_importance, ShapleyMode};
use unicrop::select::{mrmr_select, Criterion, DEFAULT_EPSILON};
use wasm_bindgen::prelude::*;

type DemoResult<T> = Result<T, String>;

fn to_json<T: Serialize>(v: &T) -> DemoResult<String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn from_json<'a, T: Deserialize<'a>>(s: &'a str) -> DemoResult<T> {
    serde_json::from_str(s).map_err(|e| format!("bad input: {e}"))
}

#[derive(Deserialize)]
pub struct MrmrInput {
    /// CSV text; the last column is the target.
    pub csv: String,
    pub k: usize,
    #[serde(default)]
    pub criterion: Option<String>,
}

#[derive(Serialize)]
pub struct MrmrPick {
    pub rank: usize,
    pub name: String,
    pub relevance: f64,
    pub redundancy: f64,
    pub score: f64,
}

#[derive(Serialize)]
pub struct MrmrOutput {
    pub criterion: String,
    pub rows: usize,
    pub selected: Vec<MrmrPick>,
}

fn parse_table(csv: &str) -> DemoResult<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = csv.lines().map(str::trim).filter(|l| !l.is_empty());
    let header: Vec<String> = lines.next().ok_or("empty table")?.split(',').map(|s| s.trim().to_string()).collect();
    if header.len() < 2 {
        return Err("need at least one feature column and a target".into());
    }
    let mut cols = vec![Vec::new(); header.len()];
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(format!("row {} has {} cells, expected {}", i + 1, cells.len(), header.len()));
        }
        for (col, cell) in cols.iter_mut().zip(cells) {
            col.push(cell.trim().parse::<f64>().map_err(|_| format!("row {}: `{}` is not a number", i + 1, cell.trim()))?);
        }
    }
    Ok((header, cols))
}

pub fn mrmr_json(input: &str) -> DemoResult<String> {
    let req: MrmrInput = from_json(input)?;
    let criterion: Criterion = match &req.criterion {
        Some(c) => c.parse().map_err(|e: unicrop::Error| e.to_string())?,
        None => Criterion::default(),
    };
    let (mut names, mut cols) = parse_table(&req.csv)?;
    let y = cols.pop().expect("checked width");
    names.pop();
    let views: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let picks = mrmr_select(&names, &views, &y, req.k, criterion, DEFAULT_EPSILON).map_err(|e| e.to_string())?;
    to_json(&MrmrOutput {
        criterion: criterion.to_string(),
        rows: y.len(),
        selected: picks
            .into_iter()
            .enumerate()
            .map(|(i, s)| MrmrPick { rank: i + 1, name: s.name, relevance: s.relevance, redundancy: s.redundancy, score: s.score })
            .collect(),
    })
}

#[derive(Deserialize)]
pub struct EnsembleInput {
    pub y: Vec<f64>,
    /// One prediction column per model.
    pub predictions: Vec<Vec<f64>>,
}

#[derive(Serialize)]
pub struct EnsembleOutput {
    pub weights: Vec<f64>,
    pub objective: f64,
    pub member_sse: Vec<f64>,
}

pub fn ensemble_json(input: &str) -> DemoResult<String> {
    let req: EnsembleInput = from_json(input)?;
    let fit = fit_ensemble_weights(&req.predictions, &req.y).map_err(|e| e.to_string())?;
    let member_sse = req
        .predictions
        .iter()
        .map(|p| p.iter().zip(&req.y).map(|(a, b)| (a - b).powi(2)).sum())
        .collect();
    to_json(&EnsembleOutput { weights: fit.weights, objective: fit.objective, member_sse })
}

/// f(x) = bias + Σ linear_j x_j + Σ interactions (i, j, c) · c x_i x_j
#[derive(Deserialize)]
pub struct ShapleyInput {
    #[serde(default)]
    pub bias: f64,
    pub linear: Vec<f64>,
    #[serde(default)]
    pub interactions: Vec<(usize, usize, f64)>,
    pub x: Vec<f64>,
    pub background: Vec<Vec<f64>>,
}

#[derive(Serialize)]
pub struct ShapleyOutput {
    pub base: f64,
    pub prediction: f64,
    pub phi: Vec<f64>,
    /// prediction − base − Σφ
    pub efficiency_gap: f64,
}

pub fn shapley_json(input: &str) -> DemoResult<String> {
    let req: ShapleyInput = from_json(input)?;
    let p = req.linear.len();
    if req.x.len() != p || req.background.iter().any(|r| r.len() != p) {
        return Err(format!("x and every background row need {p} values"));
    }
    if p > 12 {
        return Err("at most 12 features".into());
    }
    if let Some(&(i, j, _)) = req.interactions.iter().find(|(i, j, _)| *i >= p || *j >= p) {
        return Err(format!("interaction ({i}, {j}) is out of range"));
    }
    let model = |x: &[f64]| {
        req.bias
            + req.linear.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()
            + req.interactions.iter().map(|&(i, j, c)| c * x[i] * x[j]).sum::<f64>()
    };
    let attr = shapley_importance(&model, std::slice::from_ref(&req.x), &req.background, ShapleyMode::Exact, 0)
        .map_err(|e| e.to_string())?;
    let phi = attr.phi[0].clone();
    let prediction = attr.predictions[0];
    let efficiency_gap = prediction - attr.base - phi.iter().sum::<f64>();
    to_json(&ShapleyOutput { base: attr.base, prediction, phi, efficiency_gap })
}

#[wasm_bindgen]
pub fn mrmr(input: &str) -> Result<String, JsValue> {
    mrmr_json(input).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn ensemble(input: &str) -> Result<String, JsValue> {
    ensemble_json(input).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn shapley(input: &str) -> Result<String, JsValue> {
    shapley_json(input).map_err(|e| JsValue::from_str(&e))
}
