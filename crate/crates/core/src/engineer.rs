//! Agronomic features computed per field over its growing window.

use std::collections::BTreeMap;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::family::{Derivation, Family};
use crate::harmonize::{Column, ColumnMeta, MasterTable, VALUE_DECIMALS};
use crate::series::{round_to, TimeSeries};
use crate::stats;

pub const GDD_BASE_C: f64 = 10.0;
pub const CHILL_THRESHOLD_C: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GddSummary {
    pub gdd: f64,
    /// Days where both inputs were present.
    pub valid_days: usize,
    /// Distinct dates seen in either input.
    pub total_days: usize,
}

impl GddSummary {
    pub fn coverage(&self) -> f64 {
        if self.total_days == 0 {
            0.0
        } else {
            self.valid_days as f64 / self.total_days as f64
        }
    }
}

/// Sum over days of max(0, (Tmax + Tmin)/2 - 10). Days with either input
/// missing contribute nothing and lower the coverage.
pub fn compute_gdd(tmax: &TimeSeries, tmin: &TimeSeries) -> Result<GddSummary> {
    let mut days: BTreeMap<NaiveDate, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for (d, v) in &tmax.points {
        days.entry(*d).or_default().0 = *v;
    }
    for (d, v) in &tmin.points {
        days.entry(*d).or_default().1 = *v;
    }
    if days.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let mut gdd = 0.0;
    let mut valid = 0;
    for (hi, lo) in days.values() {
        if let (Some(hi), Some(lo)) = (hi, lo) {
            gdd += ((hi + lo) / 2.0 - GDD_BASE_C).max(0.0);
            valid += 1;
        }
    }
    Ok(GddSummary { gdd, valid_days: valid, total_days: days.len() })
}

/// Days with Tmin strictly below 15 °C; missing days are skipped.
pub fn count_chill_nights(tmin: &TimeSeries) -> usize {
    tmin.values().flatten().filter(|t| *t < CHILL_THRESHOLD_C).count()
}

/// max - min of the present values; `None` below two values.
pub fn seasonal_amplitude(index: &TimeSeries) -> Option<f64> {
    let v = index.present();
    if v.len() < 2 {
        return None;
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    Some(max - min)
}

/// Sample standard deviation of backscatter; `None` below two values.
pub fn sar_texture(backscatter: &TimeSeries) -> Option<f64> {
    stats::sample_std(&backscatter.present())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interactions {
    pub clay_x_radiation: Option<f64>,
    pub elevation_x_temperature: Option<f64>,
}

pub fn interaction_terms(
    clay: Option<f64>,
    radiation: Option<f64>,
    elevation: Option<f64>,
    temperature: Option<f64>,
) -> Interactions {
    Interactions {
        clay_x_radiation: clay.zip(radiation).map(|(a, b)| a * b),
        elevation_x_temperature: elevation.zip(temperature).map(|(a, b)| a * b),
    }
}

/// Which master-table columns feed each engineered feature.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineerConfig {
    pub tmax: String,
    pub tmin: String,
    pub temperature: String,
    pub ndvi: String,
    pub evi: String,
    pub vv: String,
    pub vh: String,
    pub clay: String,
    pub radiation: String,
    pub elevation: String,
}

impl Default for EngineerConfig {
    fn default() -> Self {
        Self {
            tmax: "T2M_MAX".into(),
            tmin: "T2M_MIN".into(),
            temperature: "T2M".into(),
            ndvi: "NDVI".into(),
            evi: "EVI".into(),
            vv: "VV".into(),
            vh: "VH".into(),
            clay: "clay".into(),
            radiation: "ALLSKY_SFC_SW_DWN".into(),
            elevation: "elevation".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EngineerReport {
    pub added: Vec<String>,
    pub skipped: Vec<String>,
}

/// Per-field engineered values and their coverage ratios.
#[derive(Debug, Clone, Default)]
struct FeatureValues {
    family: Option<Family>,
    per_field: BTreeMap<String, (Option<f64>, f64)>,
}

fn window_days(table: &MasterTable, field_id: &str, fallback: usize) -> usize {
    table
        .fields
        .get(field_id)
        .map(|f| (f.window_end - f.window_start).num_days() as usize + 1)
        .unwrap_or(fallback)
        .max(1)
}

/// Computes every engineered feature and appends it to the table.
///
/// Each per-field value is written on every row of that field, tagged
/// `ENGINEERED`; a `<name>_coverage` column (`DIAGNOSTIC`) records the share of
/// window days with usable inputs. Features whose source columns are absent
/// from the table are skipped and reported.
pub fn engineer_table(table: &mut MasterTable, cfg: &EngineerConfig) -> Result<EngineerReport> {
    let by_field: Vec<(String, Vec<usize>)> =
        table.rows_by_field().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    let series_of = |name: &str, rows: &[usize]| -> Option<TimeSeries> {
        let col = table.columns.get(name)?;
        Some(TimeSeries::new(rows.iter().map(|&r| (table.rows[r].date, col.values[r])).collect()))
    };
    let window_mean = |name: &str, rows: &[usize]| -> Option<f64> {
        let s = series_of(name, rows)?;
        stats::mean(&s.present())
    };
    let has = |name: &str| table.columns.contains_key(name);

    let mut report = EngineerReport::default();
    let mut features: BTreeMap<&'static str, FeatureValues> = BTreeMap::new();
    let mut put = |name: &'static str, family: Family, field: &str, value: Option<f64>, coverage: f64| {
        let f = features.entry(name).or_default();
        f.family = Some(family);
        f.per_field.insert(field.to_string(), (value.map(|v| round_to(v, VALUE_DECIMALS)), coverage));
    };

    let gdd_ok = has(&cfg.tmax) && has(&cfg.tmin);
    let chill_ok = has(&cfg.tmin);
    let single_inputs: [(&'static str, &String, Family, fn(&TimeSeries) -> Option<f64>); 4] = [
        ("ndvi_amplitude", &cfg.ndvi, Family::Vegetation, seasonal_amplitude),
        ("evi_amplitude", &cfg.evi, Family::Vegetation, seasonal_amplitude),
        ("sar_texture_vv", &cfg.vv, Family::Sar, sar_texture),
        ("sar_texture_vh", &cfg.vh, Family::Sar, sar_texture),
    ];
    let cxr_ok = has(&cfg.clay) && has(&cfg.radiation);
    let ext_ok = has(&cfg.elevation) && has(&cfg.temperature);

    for (field, rows) in &by_field {
        let days = window_days(table, field, rows.len());
        let cover = |n: usize| (n as f64 / days as f64).min(1.0);
        if gdd_ok {
            let tmax = series_of(&cfg.tmax, rows).unwrap_or_default();
            let tmin = series_of(&cfg.tmin, rows).unwrap_or_default();
            match compute_gdd(&tmax, &tmin) {
                Ok(s) if s.valid_days > 0 => put("gdd_base10", Family::Meteorology, field, Some(s.gdd), cover(s.valid_days)),
                _ => put("gdd_base10", Family::Meteorology, field, None, 0.0),
            }
        }
        if chill_ok {
            let tmin = series_of(&cfg.tmin, rows).unwrap_or_default();
            let valid = tmin.present().len();
            // a field with no usable Tmin at all is missing rather than zero
            let v = (valid > 0).then(|| count_chill_nights(&tmin) as f64);
            put("chill_nights", Family::Meteorology, field, v, cover(valid));
        }
        for (name, source, family, f) in &single_inputs {
            if let Some(s) = series_of(source, rows) {
                put(name, *family, field, f(&s), cover(s.present().len()));
            }
        }
        let clay = window_mean(&cfg.clay, rows);
        let rad = window_mean(&cfg.radiation, rows);
        let elev = window_mean(&cfg.elevation, rows);
        let temp = window_mean(&cfg.temperature, rows);
        let inter = interaction_terms(clay, rad, elev, temp);
        let both = |a: Option<f64>, b: Option<f64>| if a.is_some() && b.is_some() { 1.0 } else { 0.0 };
        if cxr_ok {
            put("clay_x_radiation", Family::Soil, field, inter.clay_x_radiation, both(clay, rad));
        }
        if ext_ok {
            put("elevation_x_temperature", Family::Topography, field, inter.elevation_x_temperature, both(elev, temp));
        }
    }

    for (name, ok) in [
        ("gdd_base10", gdd_ok),
        ("chill_nights", chill_ok),
        ("clay_x_radiation", cxr_ok),
        ("elevation_x_temperature", ext_ok),
    ] {
        if !ok {
            report.skipped.push(name.to_string());
        }
    }
    for (name, source, _, _) in &single_inputs {
        if !has(source) {
            report.skipped.push(name.to_string());
        }
    }

    let n = table.n_rows();
    for (name, fv) in features {
        let family = fv.family.expect("family set with every value");
        let mut values = vec![None; n];
        let mut coverage = vec![None; n];
        for (field, rows) in &by_field {
            if let Some((v, c)) = fv.per_field.get(field) {
                for &r in rows {
                    values[r] = *v;
                    coverage[r] = Some(round_to(*c, VALUE_DECIMALS));
                }
            }
        }
        let meta = |derivation| ColumnMeta {
            family,
            source_dataset: "engineered".into(),
            platform: "unicrop".into(),
            units: String::new(),
            derivation,
        };
        table.insert_column(name, Column { meta: meta(Derivation::Engineered), values })?;
        table.insert_column(format!("{name}_coverage"), Column { meta: meta(Derivation::Diagnostic), values: coverage })?;
        report.added.push(name.to_string());
    }
    report.skipped.sort();
    Ok(report)
}
