//! Generic HTTP fetcher driven by a URL template.

use std::io::Read;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::schema::FetchTask;
use crate::series::{format_date, parse_date, parse_value, TimeSeries};

use super::{Fetcher, RawSeries, Support};

const PLACEHOLDERS: [&str; 5] = ["{lat}", "{lon}", "{start}", "{end}", "{param}"];

pub struct HttpFetcher {
    template: String,
    auth: Option<String>,
    platforms: Vec<String>,
    attempts: u32,
    base_delay: Duration,
    factor: u32,
    min_interval: Option<Duration>,
    next_slot: Mutex<Instant>,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpFetcher {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpFetcher")
            .field("template", &self.template)
            .field("platforms", &self.platforms)
            .field("attempts", &self.attempts)
            .finish_non_exhaustive()
    }
}

/// Builds an HTTP fetcher. The template must contain `{lat} {lon} {start} {end} {param}`.
/// Optional extras: `{field_id}` and `{key}`.
pub fn register_http_fetcher(base_url: &str, auth: Option<String>) -> Result<HttpFetcher> {
    if let Some(missing) = PLACEHOLDERS.iter().find(|p| !base_url.contains(**p)) {
        return Err(Error::Config(format!("URL template lacks placeholder {missing}")));
    }
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(60)))
        .build()
        .into();
    Ok(HttpFetcher {
        template: base_url.to_string(),
        auth,
        platforms: Vec::new(),
        attempts: 3,
        base_delay: Duration::from_secs(1),
        factor: 2,
        min_interval: None,
        next_slot: Mutex::new(Instant::now()),
        agent,
    })
}

impl HttpFetcher {
    /// Platforms routed to this fetcher. Empty means it claims everything as a fallback.
    pub fn with_platforms(mut self, platforms: Vec<String>) -> Self {
        self.platforms = platforms;
        self
    }

    pub fn with_backoff(mut self, attempts: u32, base_delay: Duration, factor: u32) -> Self {
        self.attempts = attempts.max(1);
        self.base_delay = base_delay;
        self.factor = factor.max(1);
        self
    }

    /// Caps the request rate across all threads sharing this fetcher.
    pub fn with_rate_limit(mut self, requests_per_second: f64) -> Self {
        self.min_interval = (requests_per_second > 0.0).then(|| Duration::from_secs_f64(1.0 / requests_per_second));
        self
    }

    pub fn url_for(&self, task: &FetchTask) -> String {
        self.template
            .replace("{lat}", &task.lat.to_string())
            .replace("{lon}", &task.lon.to_string())
            .replace("{start}", &format_date(task.window_start))
            .replace("{end}", &format_date(task.window_end))
            .replace("{param}", &task.api_parameter)
            .replace("{field_id}", &task.field_id)
            .replace("{key}", &task.key_variable)
    }

    fn wait_for_slot(&self) {
        let Some(interval) = self.min_interval else { return };
        let wait = {
            let mut next = self.next_slot.lock().expect("rate limiter poisoned");
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + interval;
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }

    fn attempt(&self, url: &str) -> Result<Option<String>> {
        self.wait_for_slot();
        let mut req = self.agent.get(url);
        if let Some(token) = &self.auth {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let resp = req.call().map_err(|e| Error::ParsePayload(format!("transport error: {e}")))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            // retryable
            return Ok(None);
        }
        if !(200..300).contains(&status) {
            return Err(Error::HttpStatus { status, url: url.to_string() });
        }
        let mut body = String::new();
        resp.into_body()
            .into_reader()
            .read_to_string(&mut body)
            .map_err(|e| Error::ParsePayload(e.to_string()))?;
        Ok(Some(body))
    }
}

impl Fetcher for HttpFetcher {
    fn name(&self) -> &str {
        "http"
    }

    fn supports(&self, platform: &str) -> Support {
        if self.platforms.is_empty() {
            Support::Fallback
        } else if self.platforms.iter().any(|p| p == platform) {
            Support::Explicit
        } else {
            Support::No
        }
    }

    fn fetch(&self, task: &FetchTask) -> Result<RawSeries> {
        let url = self.url_for(task);
        let mut delay = self.base_delay;
        let mut last_err = Error::HttpStatus { status: 0, url: url.clone() };
        for attempt in 0..self.attempts {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= self.factor;
            }
            match self.attempt(&url) {
                Ok(Some(body)) => return parse_payload(&body).map(|values| RawSeries { values, units: String::new() }),
                Ok(None) => last_err = Error::HttpStatus { status: 503, url: url.clone() },
                Err(e @ Error::HttpStatus { .. }) => return Err(e),
                Err(e) => last_err = e,
            }
        }
        Err(last_err)
    }
}

/// Parses a `date,value` CSV body or a flat JSON array of `{date, value}` objects
/// or `[date, value]` pairs.
pub fn parse_payload(body: &str) -> Result<TimeSeries> {
    let trimmed = body.trim_start();
    if trimmed.starts_with('[') {
        let json: serde_json::Value =
            serde_json::from_str(trimmed).map_err(|e| Error::ParsePayload(e.to_string()))?;
        let items = json.as_array().ok_or_else(|| Error::ParsePayload("expected array".into()))?;
        let mut points = Vec::with_capacity(items.len());
        for item in items {
            let (d, v) = match item {
                serde_json::Value::Object(m) => (m.get("date"), m.get("value")),
                serde_json::Value::Array(a) => (a.first(), a.get(1)),
                _ => (None, None),
            };
            let date = d
                .and_then(|d| d.as_str())
                .and_then(parse_date)
                .ok_or_else(|| Error::ParsePayload(format!("bad date in {item}")))?;
            let value = match v {
                Some(serde_json::Value::Number(n)) => n.as_f64().filter(|x| x.is_finite()),
                Some(serde_json::Value::String(s)) => parse_value(s),
                _ => None,
            };
            points.push((date, value));
        }
        return Ok(TimeSeries::new(points));
    }
    let mut points = Vec::new();
    for (i, line) in body.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("date")) {
            continue;
        }
        let (d, v) = line.split_once(',').ok_or_else(|| Error::ParsePayload(format!("line {}: {line}", i + 1)))?;
        let date = parse_date(d).ok_or_else(|| Error::ParsePayload(format!("line {}: bad date", i + 1)))?;
        points.push((date, parse_value(v.split(',').next().unwrap_or(""))));
    }
    Ok(TimeSeries::new(points))
}
