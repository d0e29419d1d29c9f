#![cfg(feature = "http")]

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use chrono::NaiveDate;
use unicrop::acquire::{fetch_batch, register_http_fetcher, BatchOptions, Fetcher, FetcherRegistry};
use unicrop::schema::FetchTask;
use unicrop::{Derivation, Family};

/// Serves one scripted response per connection and records request lines and
/// Authorization headers.
fn serve(script: Vec<(u16, &'static str)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let log = Arc::new(Mutex::new(Vec::new()));
    let seen = Arc::clone(&log);
    thread::spawn(move || {
        for (status, body) in script {
            let Ok((mut stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let mut auth = String::new();
            loop {
                let mut h = String::new();
                if reader.read_line(&mut h).unwrap() == 0 || h == "\r\n" {
                    break;
                }
                if h.to_ascii_lowercase().starts_with("authorization:") {
                    auth = h.trim().to_string();
                }
            }
            seen.lock().unwrap().push(format!("{} {auth}", line.trim()));
            let reason = if status == 200 { "OK" } else { "Err" };
            let resp = format!(
                "HTTP/1.1 {status} {reason}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(resp.as_bytes()).unwrap();
        }
    });
    (format!("http://{addr}/series?lat={{lat}}&lon={{lon}}&start={{start}}&end={{end}}&param={{param}}"), log)
}

fn task(field: &str) -> FetchTask {
    let d = |day| NaiveDate::from_ymd_opt(2022, 6, day).unwrap();
    FetchTask {
        field_id: field.into(),
        key_variable: "T2M".into(),
        source_dataset: "NASA POWER".into(),
        platform: "NASA_POWER".into(),
        api_parameter: "T2M".into(),
        window_start: d(1),
        window_end: d(2),
        lat: 10.5,
        lon: 105.25,
        family: Family::Meteorology,
        derivation: Derivation::None,
    }
}

const BODY: &str = "date,value\n2022-06-01,27.5\n2022-06-02,\n2022-06-03,30\n";

#[test]
fn retries_server_errors_then_succeeds() {
    let (url, log) = serve(vec![(503, ""), (429, ""), (200, BODY)]);
    let f = register_http_fetcher(&url, Some("secret".into()))
        .unwrap()
        .with_backoff(4, Duration::from_millis(5), 2);
    let raw = f.fetch(&task("F1")).unwrap();
    assert_eq!(raw.values.len(), 3);
    assert_eq!(raw.values.points[0].1, Some(27.5));
    assert_eq!(raw.values.points[1].1, None);
    let log = log.lock().unwrap();
    assert_eq!(log.len(), 3);
    assert!(log[0].contains("lat=10.5&lon=105.25&start=2022-06-01&end=2022-06-02&param=T2M"), "{}", log[0]);
    assert!(log.iter().all(|l| l.ends_with("Bearer secret")));
}

#[test]
fn client_errors_are_not_retried() {
    let (url, log) = serve(vec![(404, "nope"), (200, BODY)]);
    let f = register_http_fetcher(&url, None).unwrap().with_backoff(3, Duration::from_millis(5), 2);
    let err = f.fetch(&task("F1")).unwrap_err();
    assert!(err.to_string().contains("404"), "{err}");
    assert_eq!(log.lock().unwrap().len(), 1);
}

#[test]
fn exhausted_retries_become_failed_results_in_a_batch() {
    let (url, _log) = serve(vec![(500, ""), (500, "")]);
    let f = register_http_fetcher(&url, None).unwrap().with_backoff(2, Duration::from_millis(5), 2);
    let mut reg = FetcherRegistry::new();
    reg.register(f);
    let (results, report) = fetch_batch(&[task("F1")], &reg, None, &BatchOptions { parallelism: 1 }).unwrap();
    assert!(results[0].status.is_failed());
    assert_eq!(report.failed, 1);
    // batch results clip to the task window
    let (url, _log) = serve(vec![(200, BODY)]);
    let mut reg = FetcherRegistry::new();
    reg.register(register_http_fetcher(&url, None).unwrap());
    let (results, _) = fetch_batch(&[task("F2")], &reg, None, &BatchOptions { parallelism: 1 }).unwrap();
    assert_eq!(results[0].values.len(), 2);
}
