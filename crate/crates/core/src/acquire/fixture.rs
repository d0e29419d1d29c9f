use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::schema::FetchTask;
use crate::series::{parse_date, parse_value, TimeSeries};

use super::{Fetcher, RawSeries, Support};

/// Serves pre-sampled series from `<root>/<platform>/<key_variable>/<field_id>.csv`.
///
/// Each file holds `date,value` rows (an optional third `units` column is
/// honoured). With no explicit platform list the fetcher claims every platform
/// as a fallback; explicit claims by other fetchers take precedence.
#[derive(Debug, Clone)]
pub struct LocalFixtureFetcher {
    root: PathBuf,
    platforms: Option<BTreeSet<String>>,
}

pub const LOCAL_FIXTURE_PLATFORM: &str = "LOCAL_FIXTURE";

/// Filesystem-safe form of a platform identifier.
pub fn sanitise_platform(platform: &str) -> String {
    platform
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

pub fn fixture_path(root: &Path, platform: &str, key_variable: &str, field_id: &str) -> PathBuf {
    root.join(sanitise_platform(platform))
        .join(sanitise_platform(key_variable))
        .join(format!("{}.csv", sanitise_platform(field_id)))
}

pub fn register_local_fixture_fetcher(root: impl Into<PathBuf>) -> LocalFixtureFetcher {
    LocalFixtureFetcher { root: root.into(), platforms: None }
}

impl LocalFixtureFetcher {
    pub fn with_platforms<I, S>(mut self, platforms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.platforms = Some(platforms.into_iter().map(Into::into).collect());
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

impl Fetcher for LocalFixtureFetcher {
    fn name(&self) -> &str {
        "local_fixture"
    }

    fn supports(&self, platform: &str) -> Support {
        match &self.platforms {
            Some(set) if set.contains(platform) => Support::Explicit,
            Some(_) => Support::No,
            None if platform == LOCAL_FIXTURE_PLATFORM => Support::Explicit,
            None => Support::Fallback,
        }
    }

    fn fetch(&self, task: &FetchTask) -> Result<RawSeries> {
        let path = fixture_path(&self.root, &task.platform, &task.key_variable, &task.field_id);
        let mut rdr = csv::ReaderBuilder::new()
            .flexible(true)
            .from_path(&path)
            .map_err(|e| Error::csv(&path, e))?;
        let mut points = Vec::new();
        let mut units = String::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::csv(&path, e))?;
            let date = rec.get(0).and_then(parse_date).ok_or_else(|| Error::Parse {
                path: path.clone(),
                line: i + 2,
                message: "bad date".into(),
            })?;
            let value = rec.get(1).and_then(parse_value);
            if units.is_empty() {
                if let Some(u) = rec.get(2) {
                    units = u.trim().to_string();
                }
            }
            points.push((date, value));
        }
        Ok(RawSeries { values: TimeSeries::new(points), units })
    }
}
