//! Timestamped hit-count store in front of another provider.
//!
//! The store is JSON lines, one [`HitCountRecord`] per line, append-only.
//! Opening a store drops a torn final line (no trailing newline) by
//! truncating the file. A malformed complete line is `StoreCorrupt`;
//! [`repair_store`] truncates the file at the first such line.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::{canonical_terms, HitCountProvider, NgdError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitCountRecord {
    /// Canonical: lowercased, sorted, deduplicated.
    pub terms: Vec<String>,
    pub count: u64,
    pub total_at_query: u64,
    pub provider_id: String,
    pub timestamp: DateTime<Utc>,
}

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

type Key = (String, Vec<String>);

pub struct CachedProvider<P> {
    inner: P,
    id: String,
    path: PathBuf,
    max_age: Duration,
    clock: Clock,
    latest: Mutex<HashMap<Key, HitCountRecord>>,
    log: Mutex<File>,
    inner_calls: AtomicU64,
}

enum Scan {
    Clean(Vec<HitCountRecord>),
    Torn { records: Vec<HitCountRecord>, good_len: u64 },
    Corrupt { good_len: u64, line: usize, message: String },
}

fn scan(path: &Path) -> Result<Scan, NgdError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Scan::Clean(Vec::new())),
        Err(e) => return Err(e.into()),
    };
    let mut reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut good_len = 0u64;
    let mut buf = String::new();
    let mut line = 0;
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf)?;
        if n == 0 {
            return Ok(Scan::Clean(records));
        }
        line += 1;
        if !buf.ends_with('\n') {
            return Ok(Scan::Torn { records, good_len });
        }
        let body = buf.trim_end();
        if !body.is_empty() {
            match serde_json::from_str::<HitCountRecord>(body) {
                Ok(r) => records.push(r),
                Err(e) => {
                    return Ok(Scan::Corrupt {
                        good_len,
                        line,
                        message: e.to_string(),
                    })
                }
            }
        }
        good_len += n as u64;
    }
}

fn truncate(path: &Path, len: u64) -> Result<(), NgdError> {
    OpenOptions::new().write(true).open(path)?.set_len(len)?;
    Ok(())
}

/// Truncates the store at its first malformed line. Returns the number of
/// bytes removed.
pub fn repair_store(path: &Path) -> Result<u64, NgdError> {
    let size = std::fs::metadata(path)?.len();
    match scan(path)? {
        Scan::Clean(_) => Ok(0),
        Scan::Torn { good_len, .. } | Scan::Corrupt { good_len, .. } => {
            truncate(path, good_len)?;
            Ok(size - good_len)
        }
    }
}

impl<P: HitCountProvider> CachedProvider<P> {
    /// Opens (or creates) the store at `path`; records older than `max_age`
    /// are ignored on lookup.
    pub fn open(inner: P, path: &Path, max_age: Duration) -> Result<Self, NgdError> {
        Self::with_clock(inner, path, max_age, Arc::new(Utc::now))
    }

    pub fn with_clock(inner: P, path: &Path, max_age: Duration, clock: Clock) -> Result<Self, NgdError> {
        let records = match scan(path)? {
            Scan::Clean(r) => r,
            Scan::Torn { records, good_len } => {
                truncate(path, good_len)?;
                records
            }
            Scan::Corrupt { line, message, .. } => {
                return Err(NgdError::StoreCorrupt {
                    path: path.to_path_buf(),
                    line,
                    message,
                })
            }
        };
        let mut latest: HashMap<Key, HitCountRecord> = HashMap::new();
        for r in records {
            let key = (r.provider_id.clone(), r.terms.clone());
            match latest.get(&key) {
                Some(old) if old.timestamp > r.timestamp => {}
                _ => {
                    latest.insert(key, r);
                }
            }
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let log = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            id: format!("cached:{}", inner.id()),
            inner,
            path: path.to_path_buf(),
            max_age,
            clock,
            latest: Mutex::new(latest),
            log: Mutex::new(log),
            inner_calls: AtomicU64::new(0),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Lambda queries forwarded to the inner provider so far.
    pub fn inner_calls(&self) -> u64 {
        self.inner_calls.load(Ordering::SeqCst)
    }

    /// All records currently in the store file, in append order.
    pub fn records(&self) -> Result<Vec<HitCountRecord>, NgdError> {
        match scan(&self.path)? {
            Scan::Clean(r) | Scan::Torn { records: r, .. } => Ok(r),
            Scan::Corrupt { line, message, .. } => Err(NgdError::StoreCorrupt {
                path: self.path.clone(),
                line,
                message,
            }),
        }
    }
}

impl<P: HitCountProvider> HitCountProvider for CachedProvider<P> {
    fn id(&self) -> &str {
        &self.id
    }

    fn lambda(&self, terms: &[String]) -> Result<u64, NgdError> {
        if terms.is_empty() {
            return Err(NgdError::EmptyTerms);
        }
        let terms = canonical_terms(terms);
        let key = (self.inner.id().to_string(), terms);
        let now = (self.clock)();
        if let Some(r) = self.latest.lock().expect("store lock poisoned").get(&key) {
            if now - r.timestamp <= self.max_age {
                return Ok(r.count);
            }
        }
        self.inner_calls.fetch_add(1, Ordering::SeqCst);
        let count = self.inner.lambda(&key.1)?;
        let record = HitCountRecord {
            terms: key.1.clone(),
            count,
            total_at_query: self.inner.total()?,
            provider_id: key.0.clone(),
            timestamp: now,
        };
        let mut line = serde_json::to_string(&record).map_err(|e| NgdError::Parse(e.to_string()))?;
        line.push('\n');
        self.log
            .lock()
            .expect("store log lock poisoned")
            .write_all(line.as_bytes())?;
        self.latest.lock().expect("store lock poisoned").insert(key, record);
        Ok(count)
    }

    /// Υ is not cached; it comes from the inner provider on every call.
    fn total(&self) -> Result<u64, NgdError> {
        self.inner.total()
    }
}
