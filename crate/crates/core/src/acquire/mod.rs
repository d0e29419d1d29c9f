//! Executes a fetch plan through pluggable fetchers with caching and provenance.

mod cache;
mod derive;
mod fixture;
#[cfg(feature = "http")]
mod http;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub use cache::{cache_key, sha256_hex, Cache};
pub use derive::{derive_variable, evi, irrigation, EVI_DENOMINATOR_FLOOR};
pub use fixture::{fixture_path, register_local_fixture_fetcher, sanitise_platform, LocalFixtureFetcher, LOCAL_FIXTURE_PLATFORM};
#[cfg(feature = "http")]
pub use http::{parse_payload, register_http_fetcher, HttpFetcher};

use crate::error::{Error, Result};
use crate::schema::FetchTask;
use crate::series::{format_date, format_value, parse_date, parse_value, TimeSeries};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchStatus {
    Ok,
    /// Retrieval failed after retries; values are all missing.
    Failed(String),
}

impl FetchStatus {
    pub fn is_failed(&self) -> bool {
        matches!(self, FetchStatus::Failed(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchResult {
    pub task: FetchTask,
    pub values: TimeSeries,
    pub units: String,
    pub retrieved_at: String,
    pub source_tag: String,
    pub status: FetchStatus,
}

/// What a fetcher hands back for one task, before window clipping and derivation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub values: TimeSeries,
    pub units: String,
}

/// How strongly a fetcher claims a platform. Explicit claims win over fallbacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Explicit,
    Fallback,
    No,
}

/// A retrieval backend. Must be deterministic for identical task and backing data
/// and safe to call from several threads at once.
pub trait Fetcher: Send + Sync {
    fn name(&self) -> &str;
    fn supports(&self, platform: &str) -> Support;
    fn fetch(&self, task: &FetchTask) -> Result<RawSeries>;
}

#[derive(Default)]
pub struct FetcherRegistry {
    fetchers: Vec<Box<dyn Fetcher>>,
}

impl FetcherRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, fetcher: impl Fetcher + 'static) -> &mut Self {
        self.fetchers.push(Box::new(fetcher));
        self
    }

    pub fn len(&self) -> usize {
        self.fetchers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fetchers.is_empty()
    }

    /// The unique fetcher for `platform`: the single explicit claimant, or
    /// failing that the single fallback claimant.
    pub fn resolve(&self, platform: &str) -> Result<&dyn Fetcher> {
        for level in [Support::Explicit, Support::Fallback] {
            let mut hits = self.fetchers.iter().filter(|f| f.supports(platform) == level);
            if let Some(first) = hits.next() {
                if hits.next().is_some() {
                    return Err(Error::AmbiguousFetcher(platform.to_string()));
                }
                return Ok(first.as_ref());
            }
        }
        Err(Error::NoFetcherForPlatform(platform.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    /// Maximum in-flight fetches.
    pub parallelism: usize,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self { parallelism: 8 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchReport {
    pub cache_hits: usize,
    pub fetched: usize,
    pub failed: usize,
    pub warnings: Vec<String>,
}

impl BatchReport {
    pub fn failed_fraction(&self, total: usize) -> f64 {
        if total == 0 {
            0.0
        } else {
            self.failed as f64 / total as f64
        }
    }
}

pub(crate) fn now_timestamp() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0);
    chrono::DateTime::from_timestamp(secs, 0)
        .map(|t| t.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_default()
}

fn failed_result(task: &FetchTask, source_tag: &str, reason: String) -> FetchResult {
    FetchResult {
        task: task.clone(),
        values: TimeSeries::default(),
        units: String::new(),
        retrieved_at: now_timestamp(),
        source_tag: source_tag.to_string(),
        status: FetchStatus::Failed(reason),
    }
}

fn clip_to_window(task: &FetchTask, series: TimeSeries) -> TimeSeries {
    let mut points: Vec<_> = series
        .points
        .into_iter()
        .filter(|(d, _)| *d >= task.window_start && *d <= task.window_end)
        .collect();
    points.sort_by_key(|p| p.0);
    TimeSeries::new(points)
}

/// Fetches one task, composing input bands for EVI/irrigation derivations.
fn fetch_one(fetcher: &dyn Fetcher, task: &FetchTask) -> Result<RawSeries> {
    if !task.derivation.is_fetched_derivation() {
        let raw = fetcher.fetch(task)?;
        return Ok(RawSeries { values: clip_to_window(task, raw.values), units: raw.units });
    }
    let mut inputs = BTreeMap::new();
    for name in task.derivation.inputs() {
        let sub = FetchTask { key_variable: name.to_string(), api_parameter: name.to_string(), ..task.clone() };
        let raw = fetcher.fetch(&sub)?;
        inputs.insert(name.to_string(), clip_to_window(task, raw.values));
    }
    let values = derive_variable(&task.derivation, &inputs)?;
    Ok(RawSeries { values, units: String::new() })
}

/// Runs every task of the plan. Cache hits bypass the fetcher; failed tasks come
/// back as all-missing `FAILED` results instead of aborting the batch. Results
/// are returned in plan order.
pub fn fetch_batch(
    plan: &[FetchTask],
    registry: &FetcherRegistry,
    cache: Option<&Cache>,
    opts: &BatchOptions,
) -> Result<(Vec<FetchResult>, BatchReport)> {
    let routes: Vec<&dyn Fetcher> = plan.iter().map(|t| registry.resolve(&t.platform)).collect::<Result<_>>()?;

    let slots: Vec<Mutex<Option<FetchResult>>> = plan.iter().map(|_| Mutex::new(None)).collect();
    let report = Mutex::new(BatchReport::default());
    let next = AtomicUsize::new(0);

    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        if i >= plan.len() {
            break;
        }
        let task = &plan[i];
        let fetcher = routes[i];
        let mut warnings = Vec::new();
        let mut hit = None;
        if let Some(c) = cache {
            match c.get(task) {
                Ok(found) => hit = found,
                Err(e) => warnings.push(format!("{e}; evicted and refetching")),
            }
        }
        let from_cache = hit.is_some();
        let result = match hit {
            Some(r) => r,
            None => match fetch_one(fetcher, task) {
                Ok(raw) => {
                    let r = FetchResult {
                        task: task.clone(),
                        values: raw.values,
                        units: raw.units,
                        retrieved_at: now_timestamp(),
                        source_tag: fetcher.name().to_string(),
                        status: FetchStatus::Ok,
                    };
                    if let Some(c) = cache {
                        if let Err(e) = c.put(&r) {
                            warnings.push(format!("cache write failed: {e}"));
                        }
                    }
                    r
                }
                Err(e) => {
                    warnings.push(format!("{}/{}: FAILED: {e}", task.field_id, task.key_variable));
                    failed_result(task, fetcher.name(), e.to_string())
                }
            },
        };
        {
            let mut rep = report.lock().expect("report lock");
            if from_cache {
                rep.cache_hits += 1;
            } else if result.status.is_failed() {
                rep.failed += 1;
            } else {
                rep.fetched += 1;
            }
            rep.warnings.extend(warnings);
        }
        *slots[i].lock().expect("slot lock") = Some(result);
    };

    let threads = opts.parallelism.max(1).min(plan.len().max(1));
    if threads == 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(worker);
            }
        });
    }

    let results = slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every task processed"))
        .collect();
    let mut report = report.into_inner().expect("report lock");
    report.warnings.sort();
    Ok((results, report))
}

const ACQUIRED_HEADER: [&str; 7] = ["field_id", "key_variable", "date", "value", "units", "source_tag", "status"];

/// Long-form dump of fetch results (one row per observation, one marker row per
/// empty result). Timestamps are left out so the file is reproducible.
pub fn write_acquired(path: &Path, results: &[FetchResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(ACQUIRED_HEADER).map_err(|e| Error::csv(path, e))?;
    for r in results {
        let status = match &r.status {
            FetchStatus::Ok => "OK",
            FetchStatus::Failed(_) => "FAILED",
        };
        let base = |date: String, value: String| {
            [
                r.task.field_id.clone(),
                r.task.key_variable.clone(),
                date,
                value,
                r.units.clone(),
                r.source_tag.clone(),
                status.to_string(),
            ]
        };
        if r.values.is_empty() {
            w.write_record(base(String::new(), String::new())).map_err(|e| Error::csv(path, e))?;
        }
        for (d, v) in &r.values.points {
            w.write_record(base(format_date(*d), format_value(*v))).map_err(|e| Error::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a long-form dump back against the plan it was produced from.
pub fn read_acquired(path: &Path, plan: &[FetchTask]) -> Result<Vec<FetchResult>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut by_key: BTreeMap<(String, String), FetchResult> = BTreeMap::new();
    for t in plan {
        by_key.insert(
            (t.field_id.clone(), t.key_variable.clone()),
            FetchResult {
                task: t.clone(),
                values: TimeSeries::default(),
                units: String::new(),
                retrieved_at: String::new(),
                source_tag: String::new(),
                status: FetchStatus::Failed("absent from acquired dump".into()),
            },
        );
    }
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let bad = |m: &str| Error::Parse { path: path.to_path_buf(), line: i + 2, message: m.to_string() };
        let key = (rec.get(0).unwrap_or("").to_string(), rec.get(1).unwrap_or("").to_string());
        let entry = by_key.get_mut(&key).ok_or_else(|| bad("row not in fetch plan"))?;
        entry.units = rec.get(4).unwrap_or("").to_string();
        entry.source_tag = rec.get(5).unwrap_or("").to_string();
        entry.status = match rec.get(6) {
            Some("OK") => FetchStatus::Ok,
            _ => FetchStatus::Failed("FAILED".into()),
        };
        let date = rec.get(2).unwrap_or("");
        if !date.is_empty() {
            let d = parse_date(date).ok_or_else(|| bad("bad date"))?;
            entry.values.points.push((d, rec.get(3).and_then(parse_value)));
        }
    }
    Ok(plan
        .iter()
        .map(|t| by_key.remove(&(t.field_id.clone(), t.key_variable.clone())).expect("seeded from plan"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{Derivation, Family};
    use chrono::NaiveDate;
    use std::sync::atomic::AtomicUsize;
    use std::sync::Arc;

    fn task(field: &str, key: &str, platform: &str) -> FetchTask {
        FetchTask {
            field_id: field.into(),
            key_variable: key.into(),
            source_dataset: "NASA POWER".into(),
            platform: platform.into(),
            api_parameter: key.into(),
            window_start: NaiveDate::from_ymd_opt(2022, 6, 1).unwrap(),
            window_end: NaiveDate::from_ymd_opt(2022, 6, 10).unwrap(),
            lat: 10.0,
            lon: 105.0,
            family: Family::Meteorology,
            derivation: Derivation::None,
        }
    }

    struct Counting {
        calls: Arc<AtomicUsize>,
    }

    impl Fetcher for Counting {
        fn name(&self) -> &str {
            "counting"
        }
        fn supports(&self, p: &str) -> Support {
            if p == "COUNT" {
                Support::Explicit
            } else {
                Support::No
            }
        }
        fn fetch(&self, t: &FetchTask) -> Result<RawSeries> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(RawSeries {
                values: TimeSeries::new(vec![(t.window_start, Some(1.0)), (t.window_end, None)]),
                units: "mm".into(),
            })
        }
    }

    fn write_fixture(root: &Path, platform: &str, key: &str, field: &str, body: &str) {
        let p = fixture_path(root, platform, key, field);
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(p, body).unwrap();
    }

    fn ten_rows() -> String {
        let mut s = String::from("date,value\n");
        for d in 1..=10 {
            s.push_str(&format!("2022-06-{d:02},{}\n", if d == 3 { "NaN".to_string() } else { d.to_string() }));
        }
        s
    }

    #[test]
    fn fixture_passthrough_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), LOCAL_FIXTURE_PLATFORM, "T2M", "f1", &ten_rows());
        let mut reg = FetcherRegistry::new();
        reg.register(register_local_fixture_fetcher(dir.path()));
        let plan = vec![task("f1", "T2M", LOCAL_FIXTURE_PLATFORM), task("f2", "T2M", LOCAL_FIXTURE_PLATFORM)];
        let (res, rep) = fetch_batch(&plan, &reg, None, &BatchOptions::default()).unwrap();
        assert_eq!(res[0].values.len(), 10);
        assert_eq!(res[0].values.points[2].1, None);
        assert_eq!(res[0].values.points[9].1, Some(10.0));
        assert_eq!(res[0].status, FetchStatus::Ok);
        assert!(res[1].status.is_failed());
        assert!(res[1].values.values().all(|v| v.is_none()));
        assert_eq!(rep.failed, 1);
    }

    #[test]
    fn cache_serves_second_call() {
        let dir = tempfile::tempdir().unwrap();
        let calls = Arc::new(AtomicUsize::new(0));
        let mut reg = FetcherRegistry::new();
        reg.register(Counting { calls: calls.clone() });
        let cache = Cache::open(dir.path().join("cache")).unwrap();
        let plan = vec![task("f1", "PREC", "COUNT")];
        let (a, ra) = fetch_batch(&plan, &reg, Some(&cache), &BatchOptions::default()).unwrap();
        let (b, rb) = fetch_batch(&plan, &reg, Some(&cache), &BatchOptions::default()).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        assert_eq!((ra.fetched, rb.cache_hits), (1, 1));
        assert_eq!(a, b);
    }

    #[test]
    fn corrupted_cache_entry_is_refetched() {
        let dir = tempfile::tempdir().unwrap();
        let calls = Arc::new(AtomicUsize::new(0));
        let mut reg = FetcherRegistry::new();
        reg.register(Counting { calls: calls.clone() });
        let cache = Cache::open(dir.path().join("cache")).unwrap();
        let plan = vec![task("f1", "PREC", "COUNT")];
        fetch_batch(&plan, &reg, Some(&cache), &BatchOptions::default()).unwrap();
        let data = cache.root().join(format!("{}.csv", cache_key(&plan[0])));
        let mut bytes = std::fs::read(&data).unwrap();
        bytes.extend_from_slice(b"2022-06-05,99\n");
        std::fs::write(&data, bytes).unwrap();
        assert!(matches!(cache.get(&plan[0]), Err(Error::CacheCorruption(_))));
        // evicted by the failed lookup, so the next batch refetches
        let (res, rep) = fetch_batch(&plan, &reg, Some(&cache), &BatchOptions::default()).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 2);
        assert_eq!(rep.fetched, 1);
        assert_eq!(res[0].values.len(), 2);
    }

    #[test]
    fn unregistered_platform() {
        let reg = FetcherRegistry::new();
        let plan = vec![task("f1", "T2M", "GEE")];
        assert!(matches!(
            fetch_batch(&plan, &reg, None, &BatchOptions::default()),
            Err(Error::NoFetcherForPlatform(p)) if p == "GEE"
        ));
    }

    #[test]
    fn explicit_claim_beats_fallback() {
        let dir = tempfile::tempdir().unwrap();
        let mut reg = FetcherRegistry::new();
        reg.register(register_local_fixture_fetcher(dir.path()));
        reg.register(Counting { calls: Arc::new(AtomicUsize::new(0)) });
        assert_eq!(reg.resolve("COUNT").unwrap().name(), "counting");
        assert_eq!(reg.resolve("ANY").unwrap().name(), "local_fixture");
        reg.register(register_local_fixture_fetcher(dir.path()));
        assert!(matches!(reg.resolve("ANY"), Err(Error::AmbiguousFetcher(_))));
    }

    #[test]
    fn derived_task_composes_inputs() {
        let dir = tempfile::tempdir().unwrap();
        for (band, v) in [("NIR", "0.5"), ("RED", "0.1"), ("BLUE", "0.05")] {
            write_fixture(dir.path(), "S2", band, "f1", &format!("date,value\n2022-06-02,{v}\n2022-06-04,NaN\n"));
        }
        let mut t = task("f1", "EVI", "S2");
        t.derivation = Derivation::Evi;
        t.family = Family::Vegetation;
        let mut reg = FetcherRegistry::new();
        reg.register(register_local_fixture_fetcher(dir.path()));
        let (res, _) = fetch_batch(&[t], &reg, None, &BatchOptions::default()).unwrap();
        assert!((res[0].values.points[0].1.unwrap() - 1.0 / 1.725).abs() < 1e-15);
        assert_eq!(res[0].values.points[1].1, None);
    }

    #[test]
    fn window_clipping() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "P", "T2M", "f1", "date,value\n2022-05-31,1\n2022-06-01,2\n2022-06-11,3\n");
        let mut reg = FetcherRegistry::new();
        reg.register(register_local_fixture_fetcher(dir.path()));
        let (res, _) = fetch_batch(&[task("f1", "T2M", "P")], &reg, None, &BatchOptions::default()).unwrap();
        assert_eq!(res[0].values.present(), vec![2.0]);
    }

    #[test]
    fn order_independent_and_parallel_safe() {
        let dir = tempfile::tempdir().unwrap();
        let mut plan = Vec::new();
        for f in 0..12 {
            let field = format!("f{f:02}");
            write_fixture(dir.path(), "P", "T2M", &field, &format!("date,value\n2022-06-01,{f}\n"));
            plan.push(task(&field, "T2M", "P"));
        }
        let mut reg = FetcherRegistry::new();
        reg.register(register_local_fixture_fetcher(dir.path()));
        let opts = BatchOptions { parallelism: 4 };
        let (a, _) = fetch_batch(&plan, &reg, None, &opts).unwrap();
        plan.reverse();
        let (mut b, _) = fetch_batch(&plan, &reg, None, &opts).unwrap();
        b.reverse();
        let strip = |v: Vec<FetchResult>| v.into_iter().map(|r| (r.task, r.values)).collect::<Vec<_>>();
        assert_eq!(strip(a), strip(b));
    }

    #[test]
    fn acquired_dump_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "P", "T2M", "f1", &ten_rows());
        let mut reg = FetcherRegistry::new();
        reg.register(register_local_fixture_fetcher(dir.path()));
        let plan = vec![task("f1", "T2M", "P"), task("f2", "T2M", "P")];
        let (res, _) = fetch_batch(&plan, &reg, None, &BatchOptions::default()).unwrap();
        let p = dir.path().join("acquired.csv");
        write_acquired(&p, &res).unwrap();
        let back = read_acquired(&p, &plan).unwrap();
        assert_eq!(back[0].values, res[0].values);
        assert!(back[1].status.is_failed());
    }
}
