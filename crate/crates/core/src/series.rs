//! Dated numeric series with explicit missing values.

use chrono::NaiveDate;

/// One observation; `None` is missing.
pub type Obs = (NaiveDate, Option<f64>);

/// A dated series. Missing entries are explicit `None`, never a sentinel number.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeries {
    pub points: Vec<Obs>,
}

impl TimeSeries {
    pub fn new(points: Vec<Obs>) -> Self {
        Self { points }
    }

    pub fn from_values(dates: &[NaiveDate], values: &[Option<f64>]) -> Self {
        Self { points: dates.iter().copied().zip(values.iter().copied()).collect() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn values(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        self.points.iter().map(|p| p.1)
    }

    /// Non-missing values in date order.
    pub fn present(&self) -> Vec<f64> {
        self.points.iter().filter_map(|p| p.1).collect()
    }

    pub fn all_missing(dates: impl IntoIterator<Item = NaiveDate>) -> Self {
        Self { points: dates.into_iter().map(|d| (d, None)).collect() }
    }
}

const DATE_FORMATS: &[&str] = &["%Y-%m-%d", "%Y/%m/%d", "%Y.%m.%d", "%Y%m%d"];

/// Parses a date in one of the accepted layouts (ISO, slash, dot, compact, or an
/// ISO timestamp whose date part is used).
pub fn parse_date(raw: &str) -> Option<NaiveDate> {
    let s = raw.trim();
    let s = match s.find(['T', ' ']) {
        Some(idx) if idx >= 8 => &s[..idx],
        _ => s,
    };
    DATE_FORMATS.iter().find_map(|fmt| NaiveDate::parse_from_str(s, fmt).ok())
}

pub fn format_date(d: NaiveDate) -> String {
    d.format("%Y-%m-%d").to_string()
}

/// Parses a numeric cell. Empty, `NaN`, `NA`, `null` and non-finite values are missing.
pub fn parse_value(raw: &str) -> Option<f64> {
    let s = raw.trim();
    if s.is_empty() {
        return None;
    }
    match s.to_ascii_lowercase().as_str() {
        "nan" | "na" | "n/a" | "null" | "none" => None,
        _ => s.parse::<f64>().ok().filter(|v| v.is_finite()),
    }
}

/// Renders a value for file output; missing becomes the empty cell.
pub fn format_value(v: Option<f64>) -> String {
    match v {
        Some(x) => format_f64(x),
        None => String::new(),
    }
}

/// Shortest round-trip rendering of a finite float, with `-0` folded to `0`.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

/// Rounds to `decimals` decimal places.
pub fn round_to(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let r = (x * scale).round() / scale;
    if r.is_finite() {
        r
    } else {
        x
    }
}
