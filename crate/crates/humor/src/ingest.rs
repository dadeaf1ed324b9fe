//! Polling client for a Reddit-style listing API and the score-refresh pass.
//!
//! Endpoints, relative to `api_base_url`:
//! - `GET /new.json?limit=N[&after=CURSOR]` returns a listing page;
//! - `GET /by_id/ID.json` returns a listing holding that one post, or an
//!   empty listing / 404 when the post is gone.
//!
//! A listing is `{"data": {"after": CURSOR|null, "children": [{"data": POST}]}}`
//! where a post carries `id`, `title` (body), `selftext` (punchline),
//! `score` and `created_utc`.

use std::collections::VecDeque;
use std::path::Path;
use std::time::Duration;

use humor_core::record::JokeRecord;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::store::{self, JokeStore};

const WINDOW_SECS: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    /// Seconds between polls.
    pub poll_interval: u64,
    pub api_base_url: String,
    pub page_size: u32,
    /// Listing pages fetched per poll.
    pub max_pages: u32,
    /// Extra attempts after a failed request.
    pub max_retries: u32,
    /// Requests per minute.
    pub rate_limit: u32,
    pub user_agent: String,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            poll_interval: 3600,
            api_base_url: "https://www.reddit.com/r/Jokes".into(),
            page_size: 100,
            max_pages: 1,
            max_retries: 3,
            rate_limit: 60,
            user_agent: concat!("humor/", env!("CARGO_PKG_VERSION")).into(),
        }
    }
}

impl IngestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.poll_interval == 0 {
            return Err(Error::Config("poll_interval must be positive".into()));
        }
        if self.page_size == 0 {
            return Err(Error::Config("page_size must be at least 1".into()));
        }
        if self.rate_limit == 0 {
            return Err(Error::Config("rate_limit must be at least 1".into()));
        }
        if self.api_base_url.is_empty() {
            return Err(Error::Config("api_base_url is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Minimal blocking GET; `Err` is a transport failure.
pub trait HttpClient {
    fn get(&self, url: &str, user_agent: &str) -> std::result::Result<HttpResponse, String>;
}

pub struct UreqClient {
    agent: ureq::Agent,
}

impl UreqClient {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent }
    }
}

impl Default for UreqClient {
    fn default() -> Self {
        Self::new(Duration::from_secs(30))
    }
}

impl HttpClient for UreqClient {
    fn get(&self, url: &str, user_agent: &str) -> std::result::Result<HttpResponse, String> {
        let mut resp = self
            .agent
            .get(url)
            .header("User-Agent", user_agent)
            .call()
            .map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

/// Wall-clock seconds and sleeping, injectable for tests.
pub trait Clock {
    fn now(&self) -> f64;
    fn sleep(&self, secs: f64);
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> f64 {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0.0, |d| d.as_secs_f64())
    }

    fn sleep(&self, secs: f64) {
        if secs > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(secs));
        }
    }
}

/// At most `limit` requests in any half-open 60 s window.
#[derive(Debug, Clone)]
pub struct RateLimiter {
    limit: usize,
    sent: VecDeque<f64>,
}

impl RateLimiter {
    pub fn new(per_minute: u32) -> Self {
        Self {
            limit: per_minute.max(1) as usize,
            sent: VecDeque::new(),
        }
    }

    /// Blocks until a request may be sent and records it.
    pub fn acquire(&mut self, clock: &dyn Clock) {
        loop {
            let now = clock.now();
            while self.sent.front().is_some_and(|&t| t + WINDOW_SECS <= now) {
                self.sent.pop_front();
            }
            if self.sent.len() < self.limit {
                self.sent.push_back(now);
                return;
            }
            let oldest = self.sent[0];
            clock.sleep(oldest + WINDOW_SECS - now);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Page {
    pub records: Vec<JokeRecord>,
    /// Unchanged from the request when the page is empty.
    pub cursor: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefreshReport {
    pub updated: usize,
    pub unchanged: usize,
    /// Posts no longer served upstream; kept with their last known score.
    pub absent: Vec<String>,
    pub failed: Vec<String>,
}

pub struct Api<'a> {
    config: IngestConfig,
    client: &'a dyn HttpClient,
    clock: &'a dyn Clock,
    limiter: RateLimiter,
}

impl<'a> Api<'a> {
    pub fn new(
        config: IngestConfig,
        client: &'a dyn HttpClient,
        clock: &'a dyn Clock,
    ) -> Result<Self> {
        config.validate()?;
        let limiter = RateLimiter::new(config.rate_limit);
        Ok(Self {
            config,
            client,
            clock,
            limiter,
        })
    }

    fn base(&self) -> &str {
        self.config.api_base_url.trim_end_matches('/')
    }

    /// GET with rate limiting and retries on transport errors, 429 and 5xx.
    fn request(&mut self, url: &str) -> Result<HttpResponse> {
        let attempts = self.config.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                self.clock.sleep(f64::from(1u32 << attempt.min(6)));
            }
            self.limiter.acquire(self.clock);
            match self.client.get(url, &self.config.user_agent) {
                Ok(r) if r.status == 429 || r.status >= 500 => last = format!("HTTP {}", r.status),
                Ok(r) => return Ok(r),
                Err(e) => last = e,
            }
        }
        Err(Error::Network {
            url: url.into(),
            attempts,
            message: last,
        })
    }

    pub fn fetch_new_jokes(&mut self, after: Option<&str>) -> Result<Page> {
        let mut url = format!("{}/new.json?limit={}", self.base(), self.config.page_size);
        if let Some(c) = after {
            url.push_str("&after=");
            url.push_str(c);
        }
        let resp = self.request(&url)?;
        if resp.status != 200 {
            return Err(Error::Network {
                url,
                attempts: 1,
                message: format!("HTTP {}", resp.status),
            });
        }
        let now = self.clock.now() as i64;
        let (records, next) = decode_listing(&url, &resp.body, now)?;
        let cursor = if records.is_empty() {
            after.map(String::from)
        } else {
            next.or_else(|| after.map(String::from))
        };
        Ok(Page { records, cursor })
    }

    /// Latest upstream score, or `None` when the post is gone.
    pub fn fetch_score(&mut self, id: &str) -> Result<Option<u64>> {
        let url = format!("{}/by_id/{}.json", self.base(), id);
        let resp = self.request(&url)?;
        if resp.status == 404 {
            return Ok(None);
        }
        if resp.status != 200 {
            return Err(Error::Network {
                url,
                attempts: 1,
                message: format!("HTTP {}", resp.status),
            });
        }
        let (records, _) = decode_listing(&url, &resp.body, 0)?;
        Ok(records.into_iter().find(|r| r.id == id).map(|r| r.score))
    }
}

fn decode_err(url: &str, field: &str, message: &str) -> Error {
    Error::Decode {
        url: url.into(),
        field: field.into(),
        message: message.into(),
    }
}

/// Parses a listing. `fetched_at` becomes `last_refreshed` (never earlier
/// than `created_at`). Negative scores are clamped to 0.
pub fn decode_listing(
    url: &str,
    body: &str,
    fetched_at: i64,
) -> Result<(Vec<JokeRecord>, Option<String>)> {
    let v: Value =
        serde_json::from_str(body).map_err(|e| decode_err(url, "<body>", &e.to_string()))?;
    let data = v
        .get("data")
        .ok_or_else(|| decode_err(url, "data", "missing"))?;
    let children = data
        .get("children")
        .and_then(Value::as_array)
        .ok_or_else(|| decode_err(url, "data.children", "missing or not an array"))?;
    let after = data.get("after").and_then(Value::as_str).map(String::from);
    let mut out = Vec::with_capacity(children.len());
    for (i, child) in children.iter().enumerate() {
        let post = child
            .get("data")
            .ok_or_else(|| decode_err(url, &format!("children[{i}].data"), "missing"))?;
        let field = |name: &str| format!("children[{i}].data.{name}");
        let id = post
            .get("id")
            .and_then(Value::as_str)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| decode_err(url, &field("id"), "missing or not a string"))?;
        let text = |name: &str| -> Result<String> {
            match post.get(name) {
                None | Some(Value::Null) => Ok(String::new()),
                Some(Value::String(s)) => Ok(s.clone()),
                Some(_) => Err(decode_err(url, &field(name), "not a string")),
            }
        };
        let body = text("title")?;
        let punchline = text("selftext")?;
        let score = post
            .get("score")
            .and_then(Value::as_f64)
            .filter(|s| s.is_finite())
            .ok_or_else(|| decode_err(url, &field("score"), "missing or not a number"))?;
        let created = post
            .get("created_utc")
            .and_then(Value::as_f64)
            .filter(|s| s.is_finite())
            .ok_or_else(|| decode_err(url, &field("created_utc"), "missing or not a number"))?;
        let created_at = created as i64;
        let record = JokeRecord {
            id: id.into(),
            body,
            punchline,
            score: score.max(0.0) as u64,
            created_at,
            last_refreshed: fetched_at.max(created_at),
        };
        record
            .validate()
            .map_err(|e| decode_err(url, &field("title"), &e.to_string()))?;
        out.push(record);
    }
    Ok((out, after))
}

/// Re-fetches every record's score. Partial failures update what succeeded.
pub fn refresh_scores(store: &mut JokeStore, api: &mut Api<'_>) -> RefreshReport {
    let mut report = RefreshReport::default();
    for id in store.ids() {
        match api.fetch_score(&id) {
            Ok(Some(score)) => {
                let now = api.clock.now() as i64;
                let r = store.get_mut(&id).expect("id from store");
                if r.score == score {
                    report.unchanged += 1;
                } else {
                    r.score = score;
                    report.updated += 1;
                }
                r.last_refreshed = r.last_refreshed.max(now).max(r.created_at);
            }
            Ok(None) => report.absent.push(id),
            Err(_) => report.failed.push(id),
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PollReport {
    pub poll: u64,
    pub fetched: usize,
    pub new_records: usize,
    pub cursor: Option<String>,
    pub refresh: RefreshReport,
    pub store_size: usize,
}

/// One poll: fetch new listing pages, append unseen records, refresh all
/// scores, then rewrite the store compactly.
pub fn poll_once(store_path: &Path, api: &mut Api<'_>, poll: u64) -> Result<PollReport> {
    let mut store = store::load_or_empty(store_path)?;
    let mut cursor: Option<String> = None;
    let mut fresh = Vec::new();
    let mut fetched = 0;
    for _ in 0..api.config.max_pages.max(1) {
        let page = api.fetch_new_jokes(cursor.as_deref())?;
        fetched += page.records.len();
        let done = page.records.is_empty() || page.cursor == cursor;
        for r in page.records {
            if !store.contains(&r.id) {
                store.upsert(r.clone());
                fresh.push(r);
            }
        }
        cursor = page.cursor;
        if done {
            break;
        }
    }
    store::persist(store_path, &fresh)?;
    let refresh = refresh_scores(&mut store, api);
    store::rewrite(store_path, &store)?;
    Ok(PollReport {
        poll,
        fetched,
        new_records: fresh.len(),
        cursor,
        refresh,
        store_size: store.len(),
    })
}

/// Polls forever (or once), sleeping `poll_interval` between polls.
pub fn run<F>(store_path: &Path, api: &mut Api<'_>, once: bool, mut on_poll: F) -> Result<()>
where
    F: FnMut(&PollReport) -> Result<()>,
{
    let mut poll = 0;
    loop {
        poll += 1;
        let report = poll_once(store_path, api, poll)?;
        on_poll(&report)?;
        if once {
            return Ok(());
        }
        api.clock.sleep(api.config.poll_interval as f64);
    }
}
