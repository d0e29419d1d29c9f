//! Master time-series table keyed by (lat, lon, date) with a provenance manifest.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::NaiveDate;

use crate::acquire::FetchResult;
use crate::error::{Error, Result};
use crate::family::{Derivation, Family};
use crate::schema::{FeatureSpec, FieldRecord};
use crate::series::{format_date, format_f64, format_value, parse_date, parse_value, round_to};

/// Decimal places kept for every stored value.
pub const VALUE_DECIMALS: u32 = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct RowKey {
    pub field_id: String,
    pub lat: f64,
    pub lon: f64,
    pub date: NaiveDate,
}

impl RowKey {
    fn triple(&self) -> (u64, u64, NaiveDate) {
        (self.lat.to_bits(), self.lon.to_bits(), self.date)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMeta {
    pub family: Family,
    pub source_dataset: String,
    pub platform: String,
    pub units: String,
    pub derivation: Derivation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub meta: ColumnMeta,
    pub values: Vec<Option<f64>>,
}

impl Column {
    pub fn non_missing(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

/// Wide table: one row per key, one named series per column. Columns are kept
/// in name order; the field records carry context (district, season, yield, window).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MasterTable {
    pub rows: Vec<RowKey>,
    pub columns: BTreeMap<String, Column>,
    pub fields: BTreeMap<String, FieldRecord>,
}

impl MasterTable {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Row indices per field_id, in row order.
    pub fn rows_by_field(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut out: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            out.entry(r.field_id.as_str()).or_default().push(i);
        }
        out
    }

    fn non_missing_in_row(&self, row: usize) -> usize {
        self.columns.values().filter(|c| c.values[row].is_some()).count()
    }

    /// Adds or replaces a column. Values must line up with `rows`.
    pub fn insert_column(&mut self, name: impl Into<String>, column: Column) -> Result<()> {
        if column.values.len() != self.rows.len() {
            return Err(Error::LengthMismatch(column.values.len(), self.rows.len()));
        }
        self.columns.insert(name.into(), column);
        Ok(())
    }

    fn select_rows(&self, keep: &[usize]) -> MasterTable {
        MasterTable {
            rows: keep.iter().map(|&i| self.rows[i].clone()).collect(),
            columns: self
                .columns
                .iter()
                .map(|(n, c)| {
                    (n.clone(), Column { meta: c.meta.clone(), values: keep.iter().map(|&i| c.values[i]).collect() })
                })
                .collect(),
            fields: self.fields.clone(),
        }
    }
}

/// Restores canonical topography names (`elevation`, `slope`, `aspect`) whatever
/// the fetcher called them; `renames` maps any other key variable explicitly.
pub fn canonical_column_name(key_variable: &str, family: Family, renames: &BTreeMap<String, String>) -> String {
    if let Some(r) = renames.get(key_variable) {
        return r.clone();
    }
    if family == Family::Topography {
        let lower = key_variable.to_ascii_lowercase();
        for canon in ["elevation", "slope", "aspect"] {
            if lower.starts_with(&canon[..4]) {
                return canon.to_string();
            }
        }
    }
    key_variable.to_string()
}

#[derive(Debug, Clone, Default)]
pub struct MergeOptions {
    pub renames: BTreeMap<String, String>,
}

/// Pivots long-form fetch results into the wide master table.
///
/// Failed results still contribute their (all-missing) column. Repeated dates
/// inside one series become extra rows so that [`dedup_rows`] can arbitrate.
pub fn merge_sources(results: &[FetchResult], fields: &[FieldRecord], opts: &MergeOptions) -> Result<MasterTable> {
    let field_map: BTreeMap<String, FieldRecord> = fields.iter().map(|f| (f.field_id.clone(), f.clone())).collect();

    let mut origin: HashMap<String, String> = HashMap::new();
    let mut metas: BTreeMap<String, ColumnMeta> = BTreeMap::new();
    // (field_id, date, occurrence) -> column -> value
    let mut cells: BTreeMap<(String, NaiveDate, usize), BTreeMap<String, Option<f64>>> = BTreeMap::new();

    for r in results {
        let t = &r.task;
        if !field_map.contains_key(&t.field_id) {
            return Err(Error::UnknownFieldId(t.field_id.clone()));
        }
        let name = canonical_column_name(&t.key_variable, t.family, &opts.renames);
        match origin.get(&name) {
            Some(prev) if prev != &t.key_variable => {
                return Err(Error::ColumnNameCollision { a: prev.clone(), b: t.key_variable.clone(), column: name })
            }
            Some(_) => {}
            None => {
                origin.insert(name.clone(), t.key_variable.clone());
            }
        }
        let meta = metas.entry(name.clone()).or_insert_with(|| ColumnMeta {
            family: t.family,
            source_dataset: t.source_dataset.clone(),
            platform: t.platform.clone(),
            units: r.units.clone(),
            derivation: t.derivation.clone(),
        });
        if meta.units.is_empty() && !r.units.is_empty() {
            meta.units = r.units.clone();
        }
        let mut seen: HashMap<NaiveDate, usize> = HashMap::new();
        for (date, value) in &r.values.points {
            let occ = seen.entry(*date).or_insert(0);
            cells
                .entry((t.field_id.clone(), *date, *occ))
                .or_default()
                .insert(name.clone(), value.map(|v| round_to(v, VALUE_DECIMALS)));
            *occ += 1;
        }
    }
    // every field keeps at least one row so it survives to modelling
    for f in field_map.values() {
        if !cells.keys().any(|(id, _, _)| id == &f.field_id) {
            cells.insert((f.field_id.clone(), f.window_start, 0), BTreeMap::new());
        }
    }

    let mut table = MasterTable { fields: field_map, ..Default::default() };
    let mut columns: BTreeMap<String, Vec<Option<f64>>> = metas.keys().map(|k| (k.clone(), Vec::new())).collect();
    for ((field_id, date, _), row) in &cells {
        let f = &table.fields[field_id];
        table.rows.push(RowKey { field_id: field_id.clone(), lat: f.lat, lon: f.lon, date: *date });
        for (name, col) in columns.iter_mut() {
            col.push(row.get(name).copied().flatten());
        }
    }
    for (name, values) in columns {
        let meta = metas.remove(&name).expect("meta per column");
        table.columns.insert(name, Column { meta, values });
    }
    Ok(table)
}

/// Keeps, for each (lat, lon, date) key, the row with the most non-missing
/// cells; ties go to the earliest row. Returns the table and an audit log.
pub fn dedup_rows(table: &MasterTable) -> (MasterTable, Vec<String>) {
    let mut best: HashMap<(u64, u64, NaiveDate), usize> = HashMap::new();
    let mut audit = Vec::new();
    for i in 0..table.rows.len() {
        let key = table.rows[i].triple();
        match best.get(&key).copied() {
            None => {
                best.insert(key, i);
            }
            Some(j) => {
                let (ni, nj) = (table.non_missing_in_row(i), table.non_missing_in_row(j));
                let r = &table.rows[i];
                let (kept, dropped) = if ni > nj { (i, j) } else { (j, i) };
                audit.push(format!(
                    "duplicate key ({}, {}, {}): kept row {} ({} cells), dropped row {} ({} cells){}",
                    format_f64(r.lat),
                    format_f64(r.lon),
                    format_date(r.date),
                    kept,
                    ni.max(nj),
                    dropped,
                    ni.min(nj),
                    if ni == nj { " [tie: earliest kept]" } else { "" }
                ));
                best.insert(key, kept);
            }
        }
    }
    let mut keep: Vec<usize> = best.into_values().collect();
    keep.sort_unstable();
    (table.select_rows(&keep), audit)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub name: String,
    pub family: Family,
    pub source_dataset: String,
    pub platform: String,
    pub units: String,
    pub derivation: Derivation,
    pub non_missing: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ColumnManifest {
    pub rows: Vec<ManifestRow>,
}

impl ColumnManifest {
    pub fn get(&self, name: &str) -> Option<&ManifestRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn family_of(&self, name: &str) -> Option<Family> {
        self.get(name).map(|r| r.family)
    }
}

/// One manifest row per column, provenance joined from the specs. Engineered and
/// diagnostic columns carry their own provenance.
pub fn emit_manifest(table: &MasterTable, specs: &[FeatureSpec], renames: &BTreeMap<String, String>) -> Result<ColumnManifest> {
    let by_column: BTreeMap<String, &FeatureSpec> = specs
        .iter()
        .map(|s| (canonical_column_name(&s.key_variable, s.family, renames), s))
        .collect();
    let mut rows = Vec::with_capacity(table.columns.len());
    for (name, col) in &table.columns {
        let row = match (&col.meta.derivation, by_column.get(name)) {
            (Derivation::Engineered | Derivation::Diagnostic, _) => ManifestRow {
                name: name.clone(),
                family: col.meta.family,
                source_dataset: col.meta.source_dataset.clone(),
                platform: col.meta.platform.clone(),
                units: col.meta.units.clone(),
                derivation: col.meta.derivation.clone(),
                non_missing: col.non_missing(),
            },
            (_, Some(spec)) => ManifestRow {
                name: name.clone(),
                family: spec.family,
                source_dataset: spec.source_dataset.clone(),
                platform: spec.platform.clone(),
                units: col.meta.units.clone(),
                derivation: spec.derivation.clone(),
                non_missing: col.non_missing(),
            },
            (_, None) => return Err(Error::SpecMissingForColumn(name.clone())),
        };
        rows.push(row);
    }
    Ok(ColumnManifest { rows })
}

const KEY_COLUMNS: [&str; 7] = ["field_id", "lat", "lon", "date", "district", "season", "yield_kg_ha"];

/// Writes key columns, context columns, then value columns alphabetically.
pub fn write_master_table(path: &Path, table: &MasterTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header: Vec<String> = KEY_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(table.columns.keys().cloned());
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for (i, r) in table.rows.iter().enumerate() {
        let f = table.fields.get(&r.field_id);
        let mut rec = vec![
            r.field_id.clone(),
            format_f64(r.lat),
            format_f64(r.lon),
            format_date(r.date),
            f.and_then(|f| f.district.clone()).unwrap_or_default(),
            f.and_then(|f| f.season.clone()).unwrap_or_default(),
            format_value(f.and_then(|f| f.yield_kg_ha)),
        ];
        rec.extend(table.columns.values().map(|c| format_value(c.values[i])));
        w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_manifest(path: &Path, manifest: &ColumnManifest) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["name", "family", "source_dataset", "platform", "units", "derivation", "non_missing"])
        .map_err(|e| Error::csv(path, e))?;
    for r in &manifest.rows {
        w.write_record([
            r.name.clone(),
            r.family.to_string(),
            r.source_dataset.clone(),
            r.platform.clone(),
            r.units.clone(),
            r.derivation.to_string(),
            r.non_missing.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<ColumnManifest> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let c = |k: usize| rec.get(k).unwrap_or("").to_string();
        rows.push(ManifestRow {
            name: c(0),
            family: c(1).parse()?,
            source_dataset: c(2),
            platform: c(3),
            units: c(4),
            derivation: c(5).parse()?,
            non_missing: c(6).parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                message: "non_missing".into(),
            })?,
        });
    }
    Ok(ColumnManifest { rows })
}

/// Reads a table written by [`write_master_table`]; column provenance comes from
/// the manifest and field context from `fields`.
pub fn read_master_table(path: &Path, manifest: &ColumnManifest, fields: &[FieldRecord]) -> Result<MasterTable> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header: Vec<String> = rdr.headers().map_err(|e| Error::csv(path, e))?.iter().map(String::from).collect();
    if header.len() < KEY_COLUMNS.len() || header[..KEY_COLUMNS.len()] != KEY_COLUMNS {
        return Err(Error::MissingHeader { path: path.to_path_buf(), column: KEY_COLUMNS.join(",") });
    }
    let names = &header[KEY_COLUMNS.len()..];
    let mut table = MasterTable {
        fields: fields.iter().map(|f| (f.field_id.clone(), f.clone())).collect(),
        ..Default::default()
    };
    let mut values: Vec<Vec<Option<f64>>> = vec![Vec::new(); names.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let bad = |m: &str| Error::Parse { path: path.to_path_buf(), line: i + 2, message: m.to_string() };
        table.rows.push(RowKey {
            field_id: rec.get(0).unwrap_or("").to_string(),
            lat: rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| bad("lat"))?,
            lon: rec.get(2).and_then(|s| s.parse().ok()).ok_or_else(|| bad("lon"))?,
            date: rec.get(3).and_then(parse_date).ok_or_else(|| bad("date"))?,
        });
        for (k, col) in values.iter_mut().enumerate() {
            col.push(rec.get(KEY_COLUMNS.len() + k).and_then(parse_value));
        }
    }
    for (name, vals) in names.iter().zip(values) {
        let m = manifest.get(name).ok_or_else(|| Error::SpecMissingForColumn(name.clone()))?;
        table.columns.insert(
            name.clone(),
            Column {
                meta: ColumnMeta {
                    family: m.family,
                    source_dataset: m.source_dataset.clone(),
                    platform: m.platform.clone(),
                    units: m.units.clone(),
                    derivation: m.derivation.clone(),
                },
                values: vals,
            },
        );
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquire::FetchStatus;
    use crate::schema::FetchTask;
    use crate::series::TimeSeries;

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2022, 6, day).unwrap()
    }

    fn field(id: &str, lat: f64) -> FieldRecord {
        FieldRecord {
            field_id: id.into(),
            lat,
            lon: 105.0,
            window_start: d(1),
            window_end: d(30),
            yield_kg_ha: Some(5000.0),
            district: Some("D1".into()),
            season: Some("S1".into()),
        }
    }

    fn result(field: &FieldRecord, key: &str, family: Family, pts: &[(u32, Option<f64>)]) -> FetchResult {
        FetchResult {
            task: FetchTask {
                field_id: field.field_id.clone(),
                key_variable: key.into(),
                source_dataset: "src".into(),
                platform: "plat".into(),
                api_parameter: key.into(),
                window_start: field.window_start,
                window_end: field.window_end,
                lat: field.lat,
                lon: field.lon,
                family,
                derivation: Derivation::None,
            },
            values: TimeSeries::new(pts.iter().map(|(day, v)| (d(*day), *v)).collect()),
            units: "u".into(),
            retrieved_at: String::new(),
            source_tag: "t".into(),
            status: FetchStatus::Ok,
        }
    }

    #[test]
    fn pivot_cardinality() {
        let fields = vec![field("a", 10.0), field("b", 11.0)];
        let mut results = Vec::new();
        for f in &fields {
            for key in ["T2M", "NDVI"] {
                results.push(result(f, key, Family::Meteorology, &[(1, Some(1.0)), (2, Some(2.0)), (3, None)]));
            }
        }
        let t = merge_sources(&results, &fields, &MergeOptions::default()).unwrap();
        assert_eq!(t.n_rows(), 6);
        assert_eq!(t.columns.len(), 2);
        // lossless: every (task, date, value) appears once
        assert_eq!(t.columns["T2M"].non_missing(), 4);
    }

    #[test]
    fn topography_suffix_restoration() {
        let fields = vec![field("a", 10.0)];
        let results = vec![
            result(&fields[0], "elev", Family::Topography, &[(1, Some(12.0))]),
            result(&fields[0], "Slope_deg", Family::Topography, &[(1, Some(2.0))]),
        ];
        let t = merge_sources(&results, &fields, &MergeOptions::default()).unwrap();
        assert!(t.columns.contains_key("elevation"));
        assert!(t.columns.contains_key("slope"));
    }

    #[test]
    fn collision_and_unknown_field() {
        let fields = vec![field("a", 10.0)];
        let results = vec![
            result(&fields[0], "elev", Family::Topography, &[(1, Some(12.0))]),
            result(&fields[0], "elevation_m", Family::Topography, &[(1, Some(12.0))]),
        ];
        assert!(matches!(
            merge_sources(&results, &fields, &MergeOptions::default()),
            Err(Error::ColumnNameCollision { .. })
        ));
        let stray = result(&field("zz", 1.0), "T2M", Family::Meteorology, &[(1, Some(1.0))]);
        assert!(matches!(
            merge_sources(&[stray], &fields, &MergeOptions::default()),
            Err(Error::UnknownFieldId(id)) if id == "zz"
        ));
    }

    #[test]
    fn precision_policy() {
        let fields = vec![field("a", 10.0)];
        let results = vec![result(&fields[0], "T2M", Family::Meteorology, &[(1, Some(12.3456789))])];
        let t = merge_sources(&results, &fields, &MergeOptions::default()).unwrap();
        assert_eq!(t.columns["T2M"].values[0], Some(12.345679));
    }

    #[test]
    fn dedup_prefers_completeness() {
        // two fields at identical coordinates produce a duplicate key triple
        let fields = vec![field("a", 10.0), field("b", 10.0)];
        let mut results = Vec::new();
        for (k, key) in ["V1", "V2", "V3", "V4", "V5"].iter().enumerate() {
            let va = if k < 3 { Some(1.0) } else { None };
            results.push(result(&fields[0], key, Family::Meteorology, &[(1, va)]));
            results.push(result(&fields[1], key, Family::Meteorology, &[(1, Some(2.0))]));
        }
        let t = merge_sources(&results, &fields, &MergeOptions::default()).unwrap();
        assert_eq!(t.n_rows(), 2);
        let (dd, audit) = dedup_rows(&t);
        assert_eq!(dd.n_rows(), 1);
        assert_eq!(dd.rows[0].field_id, "b");
        assert_eq!(audit.len(), 1);
        let (again, audit2) = dedup_rows(&dd);
        assert_eq!(again, dd);
        assert!(audit2.is_empty());
    }

    #[test]
    fn dedup_identical_rows_and_identity() {
        let fields = vec![field("a", 10.0)];
        // same date twice in one series: identical rows
        let results = vec![result(&fields[0], "T2M", Family::Meteorology, &[(1, Some(3.0)), (1, Some(3.0)), (2, Some(4.0))])];
        let t = merge_sources(&results, &fields, &MergeOptions::default()).unwrap();
        assert_eq!(t.n_rows(), 3);
        let (dd, audit) = dedup_rows(&t);
        assert_eq!(dd.n_rows(), 2);
        assert!(audit[0].contains("tie"));
        let (same, _) = dedup_rows(&dd);
        assert_eq!(same, dd);
    }

    #[test]
    fn manifest_counts_and_missing_spec() {
        let fields = vec![field("a", 10.0)];
        let pts: Vec<(u32, Option<f64>)> = (1..=30).map(|i| (i, if i % 3 == 0 { None } else { Some(1.0) })).collect();
        let results = vec![result(&fields[0], "T2M", Family::Meteorology, &pts)];
        let mut t = merge_sources(&results, &fields, &MergeOptions::default()).unwrap();
        let spec = FeatureSpec {
            key_variable: "T2M".into(),
            api_parameter: "T2M".into(),
            source_dataset: "NASA POWER".into(),
            platform: "POWER".into(),
            notes: String::new(),
            derivation: Derivation::None,
            family: Family::Meteorology,
        };
        let m = emit_manifest(&t, std::slice::from_ref(&spec), &BTreeMap::new()).unwrap();
        assert_eq!(m.rows.len(), 1);
        assert_eq!(m.rows[0].non_missing, 20);
        assert_eq!(m.rows[0].source_dataset, "NASA POWER");

        let n = t.n_rows();
        t.insert_column(
            "mystery",
            Column {
                meta: ColumnMeta {
                    family: Family::Soil,
                    source_dataset: String::new(),
                    platform: String::new(),
                    units: String::new(),
                    derivation: Derivation::None,
                },
                values: vec![None; n],
            },
        )
        .unwrap();
        assert!(matches!(emit_manifest(&t, &[spec.clone()], &BTreeMap::new()), Err(Error::SpecMissingForColumn(_))));
        t.columns.get_mut("mystery").unwrap().meta.derivation = Derivation::Engineered;
        assert_eq!(emit_manifest(&t, &[spec], &BTreeMap::new()).unwrap().rows.len(), 2);
    }

    #[test]
    fn table_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let fields = vec![field("a", 10.0), field("b", 11.5)];
        let results = vec![
            result(&fields[0], "T2M", Family::Meteorology, &[(1, Some(1.25)), (2, None)]),
            result(&fields[1], "clay", Family::Soil, &[(1, Some(0.3))]),
        ];
        let t = merge_sources(&results, &fields, &MergeOptions::default()).unwrap();
        let m = ColumnManifest {
            rows: t
                .columns
                .iter()
                .map(|(n, c)| ManifestRow {
                    name: n.clone(),
                    family: c.meta.family,
                    source_dataset: c.meta.source_dataset.clone(),
                    platform: c.meta.platform.clone(),
                    units: c.meta.units.clone(),
                    derivation: c.meta.derivation.clone(),
                    non_missing: c.non_missing(),
                })
                .collect(),
        };
        let tp = dir.path().join("master_table.csv");
        let mp = dir.path().join("manifest.csv");
        write_master_table(&tp, &t).unwrap();
        write_manifest(&mp, &m).unwrap();
        let m2 = read_manifest(&mp).unwrap();
        assert_eq!(m2, m);
        assert_eq!(read_master_table(&tp, &m2, &fields).unwrap(), t);
        let text = std::fs::read_to_string(&tp).unwrap();
        assert!(text.starts_with("field_id,lat,lon,date,district,season,yield_kg_ha,T2M,clay\n"));
        assert!(!text.contains("NaN"));
    }
}
