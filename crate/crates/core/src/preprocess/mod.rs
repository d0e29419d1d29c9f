//! Fold-local preprocessing: family-aware imputation, winsorisation and robust
//! scaling, fit on training rows only.
//!
//! Meteorology columns use chained ridge regressions, vegetation columns use
//! grouped nearest neighbours, and every other family (plus any fallback) uses
//! training medians.

pub mod impute;
pub mod scale;

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::family::Family;
use crate::frame::{DenseMatrix, FieldFrame};
use crate::series::format_f64;

pub use impute::{IterativeImputer, KnnImputer, MedianImputer};
pub use scale::{RobustScale, WinsorBounds};

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub knn_k: usize,
    pub winsor_level: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { knn_k: impute::KNN_DEFAULT_K, winsor_level: scale::WINSOR_LEVEL }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImputerKind {
    Iterative,
    Knn,
    Median,
}

impl ImputerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ImputerKind::Iterative => "ITERATIVE",
            ImputerKind::Knn => "KNN",
            ImputerKind::Median => "MEDIAN",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnParams {
    pub name: String,
    pub family: Family,
    pub imputer: ImputerKind,
    pub winsor: WinsorBounds,
    pub scale: RobustScale,
}

/// Everything fitted on one training partition.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPreprocessor {
    pub columns: Vec<ColumnParams>,
    pub medians: MedianImputer,
    /// Column indices handled by the iterative imputer and its state.
    pub iterative: Option<(Vec<usize>, IterativeImputer)>,
    pub knn: Option<(Vec<usize>, KnnImputer)>,
    pub warnings: Vec<String>,
}

fn pick(cols: &[Vec<Option<f64>>], idx: &[usize]) -> Vec<Vec<Option<f64>>> {
    idx.iter().map(|&j| cols[j].clone()).collect()
}

impl FoldPreprocessor {
    pub fn fit(train: &FieldFrame, cfg: &PreprocessConfig) -> Result<Self> {
        let names = &train.names;
        let medians = MedianImputer::fit(names, &train.columns);
        let mut warnings = medians.warnings.clone();
        let of = |f: Family| -> Vec<usize> { (0..names.len()).filter(|&j| train.families[j] == f).collect() };

        let met = of(Family::Meteorology);
        let met_names: Vec<String> = met.iter().map(|&j| names[j].clone()).collect();
        let iterative = if met.is_empty() {
            None
        } else {
            match IterativeImputer::fit(&met_names, &pick(&train.columns, &met)) {
                Ok(imp) => Some((met, imp)),
                Err(Error::TooFewColumns { .. }) => {
                    warnings.push("iterative imputer needs >= 2 meteorology columns and >= 10 rows; using medians".into());
                    None
                }
                Err(e) => return Err(e),
            }
        };

        let veg = of(Family::Vegetation);
        let knn = (!veg.is_empty()).then(|| {
            let veg_names: Vec<String> = veg.iter().map(|&j| names[j].clone()).collect();
            let imp = KnnImputer::fit(&veg_names, &pick(&train.columns, &veg), &train.groups, cfg.knn_k);
            (veg, imp)
        });

        let mut pre = FoldPreprocessor { columns: Vec::new(), medians, iterative, knn, warnings };
        let imputed = pre.impute(train)?;
        for (j, col) in imputed.iter().enumerate() {
            let winsor = WinsorBounds::fit(col, cfg.winsor_level).ok_or(Error::TooFewSamples { needed: 1, got: 0 })?;
            let clipped: Vec<f64> = col.iter().map(|v| winsor.apply(*v)).collect();
            let scale = RobustScale::fit(&clipped).expect("non-empty column");
            let imputer = if pre.iterative.as_ref().is_some_and(|(idx, _)| idx.contains(&j)) {
                ImputerKind::Iterative
            } else if pre.knn.as_ref().is_some_and(|(idx, _)| idx.contains(&j)) {
                ImputerKind::Knn
            } else {
                ImputerKind::Median
            };
            pre.columns.push(ColumnParams { name: names[j].clone(), family: train.families[j], imputer, winsor, scale });
        }
        Ok(pre)
    }

    fn check_schema(&self, frame: &FieldFrame) -> Result<()> {
        if frame.names.len() != self.medians.medians.len()
            || (!self.columns.is_empty() && frame.names.iter().zip(&self.columns).any(|(a, b)| *a != b.name))
        {
            return Err(Error::SchemaMismatch("frame columns differ from the fitted preprocessor".into()));
        }
        Ok(())
    }

    /// Imputation only, column-major.
    pub fn impute(&self, frame: &FieldFrame) -> Result<Vec<Vec<f64>>> {
        self.check_schema(frame)?;
        let mut out: Vec<Vec<f64>> =
            frame.columns.iter().enumerate().map(|(j, c)| self.medians.apply_column(j, c)).collect();
        if let Some((idx, imp)) = &self.iterative {
            for (k, col) in imp.apply(&pick(&frame.columns, idx)).into_iter().enumerate() {
                out[idx[k]] = col;
            }
        }
        if let Some((idx, imp)) = &self.knn {
            let (filled, _) = imp.apply(&pick(&frame.columns, idx), &frame.groups);
            for (k, col) in filled.into_iter().enumerate() {
                out[idx[k]] = col;
            }
        }
        Ok(out)
    }

    /// impute -> winsorize -> robust scale.
    pub fn apply(&self, frame: &FieldFrame) -> Result<DenseMatrix> {
        let imputed = self.impute(frame)?;
        let columns = imputed
            .into_iter()
            .zip(&self.columns)
            .map(|(c, p)| c.into_iter().map(|v| p.scale.apply(p.winsor.apply(v))).collect())
            .collect();
        DenseMatrix::new(frame.names.clone(), columns)
    }

    /// Flat text dump of every fitted parameter, one record per line.
    pub fn dump(&self) -> String {
        let mut s = String::from("# column family imputer median p1 p99 center iqr\n");
        for (j, c) in self.columns.iter().enumerate() {
            let _ = writeln!(
                s,
                "column {} {} {} {} {} {} {} {}",
                c.name,
                c.family,
                c.imputer.as_str(),
                format_f64(self.medians.medians[j]),
                format_f64(c.winsor.lower),
                format_f64(c.winsor.upper),
                format_f64(c.scale.center),
                format_f64(c.scale.spread)
            );
        }
        if let Some((idx, imp)) = &self.iterative {
            let _ = writeln!(s, "# iterative rounds={}", imp.rounds);
            for (k, model) in imp.models.iter().enumerate() {
                let coefs: Vec<String> = model
                    .coefs
                    .iter()
                    .enumerate()
                    .filter(|(t, _)| *t != k)
                    .map(|(t, v)| format!("{}={}", self.columns[idx[t]].name, format_f64(*v)))
                    .collect();
                let _ = writeln!(
                    s,
                    "iterative {} intercept={} {}",
                    self.columns[idx[k]].name,
                    format_f64(model.intercept),
                    coefs.join(" ")
                );
            }
        }
        if let Some((idx, imp)) = &self.knn {
            let _ = writeln!(s, "# knn k={} reference_rows={}", imp.k, imp.reference.len());
            for (k, sc) in imp.scales.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "knn_scale {} center={} iqr={}",
                    self.columns[idx[k]].name,
                    format_f64(sc.center),
                    format_f64(sc.spread)
                );
            }
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning {w}");
        }
        s
    }
}
