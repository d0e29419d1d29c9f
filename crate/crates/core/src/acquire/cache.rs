//! On-disk fetch cache: one CSV per task key plus a SHA-256 sidecar.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::schema::FetchTask;
use crate::series::{format_date, format_value, parse_date, parse_value, TimeSeries};

use super::{FetchResult, FetchStatus};

#[derive(Debug, Clone)]
pub struct Cache {
    root: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of (platform, key_variable, field_id, window, api_parameter).
pub fn cache_key(task: &FetchTask) -> String {
    let material = format!(
        "{}\u{1f}{}\u{1f}{}\u{1f}{}\u{1f}{}\u{1f}{}",
        task.platform,
        task.key_variable,
        task.field_id,
        format_date(task.window_start),
        format_date(task.window_end),
        task.api_parameter
    );
    sha256_hex(material.as_bytes())[..32].to_string()
}

impl Cache {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn paths(&self, key: &str) -> (PathBuf, PathBuf) {
        (self.root.join(format!("{key}.csv")), self.root.join(format!("{key}.sha256")))
    }

    /// Looks up a task. A checksum mismatch evicts the entry and reports
    /// `CacheCorruption`; the caller refetches.
    pub fn get(&self, task: &FetchTask) -> Result<Option<FetchResult>> {
        let key = cache_key(task);
        let (data, sum) = self.paths(&key);
        let (bytes, expected) = match (fs::read(&data), fs::read_to_string(&sum)) {
            (Ok(b), Ok(s)) => (b, s),
            _ => return Ok(None),
        };
        if sha256_hex(&bytes) != expected.trim() {
            self.evict(&key);
            return Err(Error::CacheCorruption(key));
        }
        match decode(task, &bytes) {
            Some(r) => Ok(Some(r)),
            None => {
                self.evict(&key);
                Err(Error::CacheCorruption(key))
            }
        }
    }

    /// Stores a successful result. Writes go through a temp file and a rename so
    /// concurrent writers of one key never expose a torn entry.
    pub fn put(&self, result: &FetchResult) -> Result<()> {
        let key = cache_key(&result.task);
        let (data, sum) = self.paths(&key);
        let bytes = encode(result);
        write_atomic(&data, &bytes)?;
        write_atomic(&sum, sha256_hex(&bytes).as_bytes())
    }

    pub fn evict(&self, key: &str) {
        let (data, sum) = self.paths(key);
        let _ = fs::remove_file(data);
        let _ = fs::remove_file(sum);
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn encode(r: &FetchResult) -> Vec<u8> {
    let mut s = String::new();
    s.push_str(&format!("#units={}\n", r.units));
    s.push_str(&format!("#source_tag={}\n", r.source_tag));
    s.push_str(&format!("#retrieved_at={}\n", r.retrieved_at));
    s.push_str("date,value\n");
    for (d, v) in &r.values.points {
        s.push_str(&format!("{},{}\n", format_date(*d), format_value(*v)));
    }
    s.into_bytes()
}

fn decode(task: &FetchTask, bytes: &[u8]) -> Option<FetchResult> {
    let text = std::str::from_utf8(bytes).ok()?;
    let mut units = String::new();
    let mut source_tag = String::new();
    let mut retrieved_at = String::new();
    let mut points = Vec::new();
    for line in text.lines() {
        if let Some(meta) = line.strip_prefix('#') {
            let (k, v) = meta.split_once('=')?;
            match k {
                "units" => units = v.to_string(),
                "source_tag" => source_tag = v.to_string(),
                "retrieved_at" => retrieved_at = v.to_string(),
                _ => {}
            }
        } else if line == "date,value" || line.is_empty() {
            continue;
        } else {
            let (d, v) = line.split_once(',')?;
            points.push((parse_date(d)?, parse_value(v)));
        }
    }
    Some(FetchResult {
        task: task.clone(),
        values: TimeSeries::new(points),
        units,
        retrieved_at,
        source_tag,
        status: FetchStatus::Ok,
    })
}
