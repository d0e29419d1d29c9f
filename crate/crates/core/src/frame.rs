//! Field-level analysis frame: one row per field, one column per candidate feature.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::family::{Derivation, Family};
use crate::harmonize::{ColumnManifest, MasterTable};
use crate::stats;

/// Raw (pre-imputation) candidate features per field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFrame {
    pub field_ids: Vec<String>,
    /// (district, season) per row; empty strings when unknown.
    pub groups: Vec<(String, String)>,
    pub y: Vec<f64>,
    pub names: Vec<String>,
    pub families: Vec<Family>,
    /// Column-major: `columns[j][i]` is feature j of row i.
    pub columns: Vec<Vec<Option<f64>>>,
}

impl FieldFrame {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    /// Rows `idx` in the given order.
    pub fn subset(&self, idx: &[usize]) -> FieldFrame {
        FieldFrame {
            field_ids: idx.iter().map(|&i| self.field_ids[i].clone()).collect(),
            groups: idx.iter().map(|&i| self.groups[i].clone()).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            names: self.names.clone(),
            families: self.families.clone(),
            columns: self.columns.iter().map(|c| idx.iter().map(|&i| c[i]).collect()).collect(),
        }
    }

    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.names.iter().position(|n| n == name).map(|j| self.columns[j].as_slice())
    }
}

/// Collapses the master table to one row per field with a recorded yield.
///
/// Engineered columns are constant within a field and contribute their value;
/// time-varying columns contribute the mean of present values over the window.
/// Diagnostic columns are not candidates.
pub fn build_field_frame(table: &MasterTable, manifest: &ColumnManifest) -> Result<FieldFrame> {
    let mut names = Vec::new();
    let mut families = Vec::new();
    let mut sources = Vec::new();
    for (name, col) in &table.columns {
        let (family, derivation) = match manifest.get(name) {
            Some(m) => (m.family, &m.derivation),
            None => (col.meta.family, &col.meta.derivation),
        };
        if *derivation == Derivation::Diagnostic {
            continue;
        }
        names.push(name.clone());
        families.push(family);
        sources.push((col, *derivation == Derivation::Engineered));
    }

    let by_field = table.rows_by_field();
    let mut field_ids = Vec::new();
    let mut groups = Vec::new();
    let mut y = Vec::new();
    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); names.len()];
    for (field_id, rows) in &by_field {
        let Some(rec) = table.fields.get(*field_id) else {
            return Err(Error::UnknownFieldId(field_id.to_string()));
        };
        let Some(target) = rec.yield_kg_ha else { continue };
        field_ids.push(field_id.to_string());
        groups.push((rec.district.clone().unwrap_or_default(), rec.season.clone().unwrap_or_default()));
        y.push(target);
        for (j, (col, engineered)) in sources.iter().enumerate() {
            let present: Vec<f64> = rows.iter().filter_map(|&r| col.values[r]).collect();
            let v = if *engineered { present.first().copied() } else { stats::mean(&present) };
            columns[j].push(v);
        }
    }
    Ok(FieldFrame { field_ids, groups, y, names, families, columns })
}

/// Dense numeric matrix with named columns, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub names: Vec<String>,
    pub n_rows: usize,
    pub columns: Vec<Vec<f64>>,
}

impl DenseMatrix {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, Vec::len);
        if names.len() != columns.len() {
            return Err(Error::LengthMismatch(names.len(), columns.len()));
        }
        if let Some(c) = columns.iter().find(|c| c.len() != n_rows) {
            return Err(Error::LengthMismatch(c.len(), n_rows));
        }
        Ok(Self { names, n_rows, columns })
    }

    /// Builds a matrix from row vectors.
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = names.len();
        let mut columns = vec![Vec::with_capacity(rows.len()); p];
        for r in rows {
            if r.len() != p {
                return Err(Error::LengthMismatch(r.len(), p));
            }
            for (j, v) in r.iter().enumerate() {
                columns[j].push(*v);
            }
        }
        Ok(Self { names, n_rows: rows.len(), columns })
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows).map(|i| self.row(i)).collect()
    }

    /// Columns picked by name, in the requested order.
    pub fn select(&self, names: &[String]) -> Result<DenseMatrix> {
        let index: BTreeMap<&str, usize> = self.names.iter().enumerate().map(|(j, n)| (n.as_str(), j)).collect();
        let mut columns = Vec::with_capacity(names.len());
        for n in names {
            let j = index.get(n.as_str()).ok_or_else(|| Error::SchemaMismatch(format!("missing column `{n}`")))?;
            columns.push(self.columns[*j].clone());
        }
        Ok(DenseMatrix { names: names.to_vec(), n_rows: self.n_rows, columns })
    }

    pub fn subset_rows(&self, idx: &[usize]) -> DenseMatrix {
        DenseMatrix {
            names: self.names.clone(),
            n_rows: idx.len(),
            columns: self.columns.iter().map(|c| idx.iter().map(|&i| c[i]).collect()).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.columns.iter().flatten().all(|v| v.is_finite())
    }
}
