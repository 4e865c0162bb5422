//! Hit counts from a JSON search endpoint.
//!
//! One GET per lambda call. The URL comes from a template whose `{query}`
//! placeholder receives the space-joined terms, form-encoded. Requests pass
//! through a token bucket shared by every clone of the provider. HTTP 429,
//! HTTP 5xx and connection failures are retried with exponential backoff;
//! 401 and 403 are reported at once.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{HitCountProvider, NgdError, DEFAULT_TOTAL};

/// Hard cap on retries per request.
pub const MAX_RETRIES: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    /// URL with a `{query}` placeholder.
    pub endpoint: String,
    /// Dot path to the count in the JSON body; numeric segments index arrays.
    pub count_field: String,
    pub auth_header: Option<String>,
    #[serde(skip_serializing)]
    pub auth_token: Option<String>,
    pub requests_per_second: f64,
    /// Υ reported by this provider.
    pub total: u64,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub timeout_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            count_field: "count".into(),
            auth_header: None,
            auth_token: None,
            requests_per_second: 1.0,
            total: DEFAULT_TOTAL,
            max_retries: MAX_RETRIES,
            backoff_ms: 500,
            timeout_ms: 10_000,
        }
    }
}

/// Environment variables read by [`HttpConfig::apply_env`].
pub const ENV_VARS: &[&str] = &[
    "NCDKIT_HTTP_ENDPOINT",
    "NCDKIT_HTTP_COUNT_FIELD",
    "NCDKIT_HTTP_AUTH_HEADER",
    "NCDKIT_HTTP_AUTH_TOKEN",
    "NCDKIT_HTTP_RPS",
    "NCDKIT_TOTAL",
];

impl HttpConfig {
    /// Overrides fields from variables found by `lookup` (see [`ENV_VARS`]).
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), NgdError> {
        if let Some(v) = lookup("NCDKIT_HTTP_ENDPOINT") {
            self.endpoint = v;
        }
        if let Some(v) = lookup("NCDKIT_HTTP_COUNT_FIELD") {
            self.count_field = v;
        }
        if let Some(v) = lookup("NCDKIT_HTTP_AUTH_HEADER") {
            self.auth_header = Some(v);
        }
        if let Some(v) = lookup("NCDKIT_HTTP_AUTH_TOKEN") {
            self.auth_token = Some(v);
        }
        if let Some(v) = lookup("NCDKIT_HTTP_RPS") {
            self.requests_per_second = v
                .parse()
                .map_err(|_| NgdError::Config(format!("NCDKIT_HTTP_RPS=`{v}` is not a number")))?;
        }
        if let Some(v) = lookup("NCDKIT_TOTAL") {
            self.total = parse_total(&v).ok_or_else(|| NgdError::Config(format!("NCDKIT_TOTAL=`{v}` is not a count")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), NgdError> {
        let bad = |m: String| Err(NgdError::Config(m));
        if !self.endpoint.contains("{query}") {
            return bad(format!("endpoint `{}` has no {{query}} placeholder", self.endpoint));
        }
        if let Err(e) = url::Url::parse(&self.endpoint.replace("{query}", "q")) {
            return bad(format!("endpoint `{}`: {e}", self.endpoint));
        }
        if self.count_field.is_empty() {
            return bad("count_field is empty".into());
        }
        if !(self.requests_per_second.is_finite() && self.requests_per_second > 0.0) {
            return bad(format!("requests_per_second must be positive, got {}", self.requests_per_second));
        }
        if self.max_retries > MAX_RETRIES {
            return bad(format!("max_retries is capped at {MAX_RETRIES}"));
        }
        if self.auth_header.is_some() != self.auth_token.is_some() {
            return bad("auth_header and auth_token must be set together".into());
        }
        Ok(())
    }

    fn url_for(&self, terms: &[String]) -> String {
        let query: String = url::form_urlencoded::byte_serialize(terms.join(" ").as_bytes()).collect();
        self.endpoint.replace("{query}", &query)
    }
}

/// Accepts plain integers and scientific notation such as `8e9`.
pub fn parse_total(s: &str) -> Option<u64> {
    if let Ok(v) = s.parse::<u64>() {
        return Some(v);
    }
    let f: f64 = s.parse().ok()?;
    (f.is_finite() && f >= 1.0 && f.fract() == 0.0 && f < u64::MAX as f64).then_some(f as u64)
}

/// Token bucket: `rate` tokens per second, holding at most `max(1, rate)`.
#[derive(Debug)]
pub struct TokenBucket {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(rate: f64) -> Self {
        let capacity = rate.max(1.0);
        Self {
            rate,
            capacity,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Blocks until a token is available and takes it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut s = self.state.lock().expect("bucket lock poisoned");
                let now = Instant::now();
                s.0 = (s.0 + now.duration_since(s.1).as_secs_f64() * self.rate).min(self.capacity);
                s.1 = now;
                if s.0 >= 1.0 {
                    s.0 -= 1.0;
                    return;
                }
                (1.0 - s.0) / self.rate
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

#[derive(Clone)]
pub struct HttpProvider {
    config: Arc<HttpConfig>,
    agent: ureq::Agent,
    bucket: Arc<TokenBucket>,
    requests: Arc<AtomicU64>,
}

enum Attempt {
    Body(String),
    Status(u16),
}

fn extract_count(body: &str, path: &str) -> Result<u64, NgdError> {
    let root: Value = serde_json::from_str(body).map_err(|e| NgdError::Parse(format!("body is not JSON: {e}")))?;
    let mut v = &root;
    for seg in path.split('.') {
        v = match v {
            Value::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get(i)),
            Value::Object(map) => map.get(seg),
            _ => None,
        }
        .ok_or_else(|| NgdError::Parse(format!("field `{path}` not found at `{seg}`")))?;
    }
    match v {
        Value::Number(n) => n.as_u64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
    .ok_or_else(|| NgdError::Parse(format!("field `{path}` is not a non-negative integer: {v}")))
}

impl HttpProvider {
    pub fn new(config: HttpConfig) -> Result<Self, NgdError> {
        config.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .build()
            .into();
        Ok(Self {
            bucket: Arc::new(TokenBucket::new(config.requests_per_second)),
            config: Arc::new(config),
            agent,
            requests: Arc::new(AtomicU64::new(0)),
        })
    }

    /// HTTP requests sent so far, retries included.
    pub fn requests(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }

    fn attempt(&self, url: &str) -> Result<Attempt, String> {
        self.bucket.acquire();
        self.requests.fetch_add(1, Ordering::SeqCst);
        let mut req = self.agent.get(url).header("Accept", "application/json");
        if let (Some(h), Some(t)) = (&self.config.auth_header, &self.config.auth_token) {
            req = req.header(h.as_str(), t.as_str());
        }
        let mut resp = req.call().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Ok(Attempt::Status(status));
        }
        resp.body_mut().read_to_string().map(Attempt::Body).map_err(|e| e.to_string())
    }
}

impl HitCountProvider for HttpProvider {
    fn id(&self) -> &str {
        "http"
    }

    fn lambda(&self, terms: &[String]) -> Result<u64, NgdError> {
        if terms.is_empty() {
            return Err(NgdError::EmptyTerms);
        }
        let url = self.config.url_for(terms);
        let attempts = self.config.max_retries + 1;
        let mut last = NgdError::Transport("no attempt made".into());
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(self.config.backoff_ms << (attempt - 1)));
            }
            match self.attempt(&url) {
                Ok(Attempt::Body(body)) => return extract_count(&body, &self.config.count_field),
                Ok(Attempt::Status(s @ (401 | 403))) => return Err(NgdError::AuthFailure(s)),
                Ok(Attempt::Status(429)) => last = NgdError::RateLimited { attempts },
                Ok(Attempt::Status(s)) if s >= 500 => last = NgdError::Transport(format!("HTTP {s} from {url}")),
                Ok(Attempt::Status(s)) => return Err(NgdError::Transport(format!("HTTP {s} from {url}"))),
                Err(e) => last = NgdError::Transport(e),
            }
        }
        Err(last)
    }

    fn total(&self) -> Result<u64, NgdError> {
        Ok(self.config.total)
    }
}
