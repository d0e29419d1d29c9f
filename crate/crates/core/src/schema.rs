//! Feature mapping, field table and fetch plan.
//!
//! The feature mapping declares every variable the pipeline needs; the field
//! table lists the seed observations. Their Cartesian product is the fetch plan.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::family::{Derivation, Family};
use crate::series::{format_date, parse_date, parse_value};

/// One declarative row of the feature mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub key_variable: String,
    pub api_parameter: String,
    pub source_dataset: String,
    pub platform: String,
    pub notes: String,
    pub derivation: Derivation,
    pub family: Family,
}

/// One seed observation.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRecord {
    pub field_id: String,
    pub lat: f64,
    pub lon: f64,
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    pub yield_kg_ha: Option<f64>,
    pub district: Option<String>,
    pub season: Option<String>,
}

/// One concrete retrieval: a field crossed with a feature spec.
///
/// Besides the retrieval coordinates the task carries the spec's family and
/// derivation so that acquisition and harmonisation need not re-join the mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct FetchTask {
    pub field_id: String,
    pub key_variable: String,
    pub source_dataset: String,
    pub platform: String,
    pub api_parameter: String,
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    pub lat: f64,
    pub lon: f64,
    pub family: Family,
    pub derivation: Derivation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropReason {
    Malformed,
    InvalidCoordinate,
    InvalidDate,
    InvalidYield,
    DuplicateId,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropReason::Malformed => "MALFORMED",
            DropReason::InvalidCoordinate => "INVALID_COORDINATE",
            DropReason::InvalidDate => "INVALID_DATE",
            DropReason::InvalidYield => "INVALID_YIELD",
            DropReason::DuplicateId => "DUPLICATE_ID",
        })
    }
}

/// What `parse_fields` threw away and why.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CleaningReport {
    pub dropped: BTreeMap<DropReason, usize>,
    pub warnings: Vec<String>,
}

impl CleaningReport {
    pub fn count(&self, reason: DropReason) -> usize {
        self.dropped.get(&reason).copied().unwrap_or(0)
    }

    pub fn total_dropped(&self) -> usize {
        self.dropped.values().sum()
    }

    fn drop_row(&mut self, reason: DropReason, line: usize, detail: impl fmt::Display) {
        *self.dropped.entry(reason).or_default() += 1;
        self.warnings.push(format!("line {line}: dropped ({reason}): {detail}"));
    }
}

fn normalise_header(h: &str) -> String {
    let lowered: String = h
        .trim()
        .trim_start_matches('\u{feff}')
        .to_ascii_lowercase()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    let squeezed = lowered
        .split('_')
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join("_");
    match squeezed.as_str() {
        "key_variable" | "variable" | "key" => "key_variable",
        "api_parameter" | "api_param" | "parameter" => "api_parameter",
        "source_dataset" | "source" | "dataset" => "source_dataset",
        "notes" | "notes_derivation" | "note" => "notes",
        "lat" | "latitude" => "lat",
        "lon" | "lng" | "long" | "longitude" => "lon",
        "yield" | "yield_kg_ha" => "yield_kg_ha",
        other => return other.to_string(),
    }
    .to_string()
}

struct Header {
    index: BTreeMap<String, usize>,
}

impl Header {
    fn new(record: &csv::StringRecord) -> Self {
        let mut index = BTreeMap::new();
        for (i, h) in record.iter().enumerate() {
            index.entry(normalise_header(h)).or_insert(i);
        }
        Self { index }
    }

    fn require(&self, path: &Path, column: &str) -> Result<usize> {
        self.index.get(column).copied().ok_or_else(|| Error::MissingHeader {
            path: path.to_path_buf(),
            column: column.to_string(),
        })
    }

    fn optional(&self, column: &str) -> Option<usize> {
        self.index.get(column).copied()
    }
}

fn cell(record: &csv::StringRecord, idx: Option<usize>) -> &str {
    idx.and_then(|i| record.get(i)).map(str::trim).unwrap_or("")
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::None)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))
}

const MAPPING_COLUMNS: [&str; 5] = ["key_variable", "api_parameter", "source_dataset", "platform", "notes"];

/// Reads the feature mapping CSV.
pub fn parse_feature_mapping(path: &Path) -> Result<Vec<FeatureSpec>> {
    let mut rdr = csv_reader(path)?;
    let header = Header::new(rdr.headers().map_err(|e| Error::csv(path, e))?);
    let cols: Vec<usize> = MAPPING_COLUMNS
        .iter()
        .map(|c| header.require(path, c))
        .collect::<Result<_>>()?;
    let family_col = header.optional("family");

    let mut seen = HashSet::new();
    let mut specs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        if rec.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let key = cell(&rec, Some(cols[0])).to_string();
        let api = cell(&rec, Some(cols[1])).to_string();
        let source = cell(&rec, Some(cols[2])).to_string();
        let platform = cell(&rec, Some(cols[3])).to_string();
        let notes = cell(&rec, Some(cols[4])).to_string();

        if key.is_empty() {
            return Err(Error::InvalidSpec { key, reason: "empty key_variable".into() });
        }
        if !seen.insert(key.clone()) {
            return Err(Error::DuplicateKeyVariable(key));
        }
        let derivation = match notes.strip_prefix("CUSTOM:") {
            Some(id) if !id.trim().is_empty() => Derivation::Custom(id.trim().to_string()),
            _ => Derivation::infer_from_notes(&notes),
        };
        if derivation == Derivation::None && api.is_empty() {
            return Err(Error::InvalidSpec { key, reason: "api_parameter required when derivation is NONE".into() });
        }
        let explicit = cell(&rec, family_col);
        let family = if explicit.is_empty() {
            Family::infer_from_source(&source)
                .ok_or_else(|| Error::UnknownFamily { key: key.clone(), source_dataset: source.clone() })?
        } else {
            explicit.parse()?
        };
        specs.push(FeatureSpec {
            key_variable: key,
            api_parameter: api,
            source_dataset: source,
            platform,
            notes,
            derivation,
            family,
        });
    }
    Ok(specs)
}

/// Writes the mapping in canonical column order, always including `family`.
pub fn write_feature_mapping(path: &Path, specs: &[FeatureSpec]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut write = |row: &[&str]| w.write_record(row).map_err(|e| Error::csv(path, e));
    write(&["key_variable", "api_parameter", "source_dataset", "platform", "notes", "family"])?;
    for s in specs {
        write(&[
            &s.key_variable,
            &s.api_parameter,
            &s.source_dataset,
            &s.platform,
            &s.notes,
            s.family.as_str(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads and cleans the field table.
///
/// Invalid rows are dropped and counted per reason rather than failing the
/// whole file. Duplicate `field_id`s keep the first occurrence.
pub fn parse_fields(path: &Path) -> Result<(Vec<FieldRecord>, CleaningReport)> {
    let mut rdr = csv_reader(path)?;
    let header = Header::new(rdr.headers().map_err(|e| Error::csv(path, e))?);
    let id_col = header.require(path, "field_id")?;
    let lat_col = header.require(path, "lat")?;
    let lon_col = header.require(path, "lon")?;
    // A single `date` column stands in for a one-day window.
    let (start_col, end_col) = match (header.optional("window_start"), header.optional("date")) {
        (Some(s), _) => (s, header.optional("window_end").unwrap_or(s)),
        (None, Some(d)) => (d, d),
        (None, None) => {
            return Err(Error::MissingHeader { path: path.to_path_buf(), column: "window_start".into() })
        }
    };
    let yield_col = header.optional("yield_kg_ha");
    let district_col = header.optional("district");
    let season_col = header.optional("season");

    let mut report = CleaningReport::default();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                report.drop_row(DropReason::Malformed, line, e);
                continue;
            }
        };
        let field_id = cell(&rec, Some(id_col)).to_string();
        if field_id.is_empty() {
            report.drop_row(DropReason::Malformed, line, "empty field_id");
            continue;
        }
        let lat = cell(&rec, Some(lat_col)).parse::<f64>().ok();
        let lon = cell(&rec, Some(lon_col)).parse::<f64>().ok();
        let (lat, lon) = match (lat, lon) {
            (Some(a), Some(o)) if (-90.0..=90.0).contains(&a) && (-180.0..=180.0).contains(&o) => (a, o),
            _ => {
                report.drop_row(DropReason::InvalidCoordinate, line, &field_id);
                continue;
            }
        };
        let start = parse_date(cell(&rec, Some(start_col)));
        let end = parse_date(cell(&rec, Some(end_col)));
        let (window_start, window_end) = match (start, end) {
            (Some(s), Some(e)) if s <= e => (s, e),
            _ => {
                report.drop_row(DropReason::InvalidDate, line, &field_id);
                continue;
            }
        };
        let raw_yield = cell(&rec, yield_col);
        let yield_kg_ha = if raw_yield.is_empty() {
            None
        } else {
            match parse_value(raw_yield) {
                Some(y) if y >= 0.0 => Some(y),
                _ => {
                    report.drop_row(DropReason::InvalidYield, line, &field_id);
                    continue;
                }
            }
        };
        if !seen.insert(field_id.clone()) {
            report.drop_row(DropReason::DuplicateId, line, &field_id);
            continue;
        }
        let opt = |idx| Some(cell(&rec, idx).to_string()).filter(|s| !s.is_empty());
        out.push(FieldRecord {
            field_id,
            lat,
            lon,
            window_start,
            window_end,
            yield_kg_ha,
            district: opt(district_col),
            season: opt(season_col),
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyAfterCleaning);
    }
    Ok((out, report))
}

/// Writes a field table in the canonical layout.
pub fn write_fields(path: &Path, fields: &[FieldRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["field_id", "lat", "lon", "window_start", "window_end", "yield_kg_ha", "district", "season"])
        .map_err(|e| Error::csv(path, e))?;
    for f in fields {
        w.write_record([
            f.field_id.clone(),
            crate::series::format_f64(f.lat),
            crate::series::format_f64(f.lon),
            format_date(f.window_start),
            format_date(f.window_end),
            crate::series::format_value(f.yield_kg_ha),
            f.district.clone().unwrap_or_default(),
            f.season.clone().unwrap_or_default(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Expands fields × specs into retrieval tasks, sorted by (field_id, key_variable).
pub fn build_fetch_plan(fields: &[FieldRecord], specs: &[FeatureSpec]) -> Result<Vec<FetchTask>> {
    let mut uniq_fields: BTreeMap<&str, &FieldRecord> = BTreeMap::new();
    for f in fields {
        uniq_fields.entry(&f.field_id).or_insert(f);
    }
    let mut uniq_specs: BTreeMap<&str, &FeatureSpec> = BTreeMap::new();
    for s in specs {
        uniq_specs.entry(&s.key_variable).or_insert(s);
    }
    if uniq_fields.is_empty() || uniq_specs.is_empty() {
        return Err(Error::EmptyPlan);
    }
    let mut plan = Vec::with_capacity(uniq_fields.len() * uniq_specs.len());
    for f in uniq_fields.values() {
        for s in uniq_specs.values() {
            plan.push(FetchTask {
                field_id: f.field_id.clone(),
                key_variable: s.key_variable.clone(),
                source_dataset: s.source_dataset.clone(),
                platform: s.platform.clone(),
                api_parameter: s.api_parameter.clone(),
                window_start: f.window_start,
                window_end: f.window_end,
                lat: f.lat,
                lon: f.lon,
                family: s.family,
                derivation: s.derivation.clone(),
            });
        }
    }
    Ok(plan)
}

const PLAN_HEADER: [&str; 11] = [
    "field_id",
    "key_variable",
    "source_dataset",
    "platform",
    "api_parameter",
    "window_start",
    "window_end",
    "lat",
    "lon",
    "family",
    "derivation",
];

pub fn write_fetch_plan(path: &Path, plan: &[FetchTask]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(PLAN_HEADER).map_err(|e| Error::csv(path, e))?;
    for t in plan {
        w.write_record([
            t.field_id.clone(),
            t.key_variable.clone(),
            t.source_dataset.clone(),
            t.platform.clone(),
            t.api_parameter.clone(),
            format_date(t.window_start),
            format_date(t.window_end),
            crate::series::format_f64(t.lat),
            crate::series::format_f64(t.lon),
            t.family.to_string(),
            t.derivation.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_fetch_plan(path: &Path) -> Result<Vec<FetchTask>> {
    let mut rdr = csv_reader(path)?;
    let header = Header::new(rdr.headers().map_err(|e| Error::csv(path, e))?);
    let cols: Vec<usize> = PLAN_HEADER.iter().map(|c| header.require(path, c)).collect::<Result<_>>()?;
    let mut plan = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let bad = |message: &str| Error::Parse { path: path.to_path_buf(), line: i + 2, message: message.into() };
        let c = |k: usize| cell(&rec, Some(cols[k]));
        plan.push(FetchTask {
            field_id: c(0).to_string(),
            key_variable: c(1).to_string(),
            source_dataset: c(2).to_string(),
            platform: c(3).to_string(),
            api_parameter: c(4).to_string(),
            window_start: parse_date(c(5)).ok_or_else(|| bad("window_start"))?,
            window_end: parse_date(c(6)).ok_or_else(|| bad("window_end"))?,
            lat: c(7).parse().map_err(|_| bad("lat"))?,
            lon: c(8).parse().map_err(|_| bad("lon"))?,
            family: c(9).parse()?,
            derivation: c(10).parse()?,
        });
    }
    Ok(plan)
}
