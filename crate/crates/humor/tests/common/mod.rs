#![allow(dead_code)]

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::thread;

use humor::ingest::{Clock, HttpClient, HttpResponse};
use humor_core::record::JokeRecord;

pub const FIXTURE_RECORDS: usize = 15_909;
pub const FIXTURE_FUNNY: usize = 2_025;

/// `FIXTURE_RECORDS` jokes of which exactly `FIXTURE_FUNNY` score 200 or
/// more, spread through the file by a fixed permutation.
pub fn fixture_records() -> Vec<JokeRecord> {
    (0..FIXTURE_RECORDS)
        .map(|i| {
            let rank = (i * 7919) % FIXTURE_RECORDS;
            let score = if rank < FIXTURE_FUNNY {
                200 + (rank as u64 * 37) % 30_000
            } else {
                (rank as u64 * 13) % 200
            };
            JokeRecord {
                id: format!("j{i:05}"),
                body: format!("why did joke {} cross the road {}", i % 97, i % 13),
                punchline: format!("to reach punchline {}", i % 89),
                score,
                created_at: 1_552_000_000 + i as i64,
                last_refreshed: 1_555_000_000,
            }
        })
        .collect()
}

pub fn write_store(path: &Path, records: &[JokeRecord]) {
    humor::store::persist(path, records).unwrap();
}

/// Virtual time: `sleep` advances `now` instantly.
#[derive(Default)]
pub struct FakeClock {
    pub t: Cell<f64>,
}

impl FakeClock {
    pub fn at(t: f64) -> Self {
        Self { t: Cell::new(t) }
    }
}

impl Clock for FakeClock {
    fn now(&self) -> f64 {
        self.t.get()
    }

    fn sleep(&self, secs: f64) {
        if secs > 0.0 {
            self.t.set(self.t.get() + secs);
        }
    }
}

type Route = Box<dyn Fn(&str) -> std::result::Result<HttpResponse, String>>;

/// In-process client answering from a closure and logging request times.
pub struct ScriptedClient<'a> {
    pub clock: &'a FakeClock,
    pub route: Route,
    pub log: RefCell<Vec<(f64, String)>>,
}

impl<'a> ScriptedClient<'a> {
    pub fn new(
        clock: &'a FakeClock,
        route: impl Fn(&str) -> std::result::Result<HttpResponse, String> + 'static,
    ) -> Self {
        Self {
            clock,
            route: Box::new(route),
            log: RefCell::new(Vec::new()),
        }
    }
}

impl HttpClient for ScriptedClient<'_> {
    fn get(&self, url: &str, _user_agent: &str) -> std::result::Result<HttpResponse, String> {
        self.log
            .borrow_mut()
            .push((self.clock.now(), url.to_string()));
        (self.route)(url)
    }
}

pub fn ok(body: String) -> std::result::Result<HttpResponse, String> {
    Ok(HttpResponse { status: 200, body })
}

pub fn post_json(
    id: &str,
    title: &str,
    selftext: &str,
    score: i64,
    created: i64,
) -> serde_json::Value {
    serde_json::json!({"kind": "t3", "data": {
        "id": id, "title": title, "selftext": selftext, "score": score, "created_utc": created as f64
    }})
}

pub fn listing(posts: Vec<serde_json::Value>, after: Option<&str>) -> String {
    serde_json::json!({"kind": "Listing", "data": {"after": after, "children": posts}}).to_string()
}

/// Minimal HTTP/1.1 server on 127.0.0.1 answering `GET path` from a table
/// of `(status, body)`; unknown paths get 404. Requests are logged.
pub struct MockServer {
    pub base: String,
    pub requests: Arc<Mutex<Vec<String>>>,
    pub routes: Arc<Mutex<HashMap<String, (u16, String)>>>,
}

impl MockServer {
    pub fn start(routes: HashMap<String, (u16, String)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let routes = Arc::new(Mutex::new(routes));
        let (req_log, table) = (requests.clone(), routes.clone());
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut first = String::new();
                if reader.read_line(&mut first).is_err() {
                    continue;
                }
                loop {
                    let mut h = String::new();
                    if reader.read_line(&mut h).is_err() || h == "\r\n" || h.is_empty() {
                        break;
                    }
                }
                let path = first.split_whitespace().nth(1).unwrap_or("/").to_string();
                req_log.lock().unwrap().push(path.clone());
                let (status, body) = table
                    .lock()
                    .unwrap()
                    .get(&path)
                    .cloned()
                    .unwrap_or((404, "{}".into()));
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
            }
        });
        Self {
            base,
            requests,
            routes,
        }
    }
}
