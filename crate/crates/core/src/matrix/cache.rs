//! Content-addressed Γ cache with an optional append-only log on disk.
//!
//! Log records are one per line: `compressor-key<TAB>sha256-hex<TAB>size`.
//! A torn final line (crash mid-append) is dropped and truncated on open; any
//! other malformed line is reported as corruption.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::compressor::CompressorProfile;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache log {path} line {line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Digest32 = [u8; 32];

pub fn digest(bytes: &[u8]) -> Digest32 {
    Sha256::digest(bytes).into()
}

/// Digest of `a` followed by `b`, without materializing the concatenation.
pub fn digest_concat(a: &[u8], b: &[u8]) -> Digest32 {
    let mut h = Sha256::new();
    h.update(a);
    h.update(b);
    h.finalize().into()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey {
    pub compressor: String,
    pub digest: Digest32,
}

impl CacheKey {
    pub fn new(profile: &CompressorProfile, digest: Digest32) -> Self {
        Self {
            compressor: sanitize(&profile.cache_key()),
            digest,
        }
    }
}

fn sanitize(key: &str) -> String {
    key.replace(['\t', '\n', '\r'], " ")
}

#[derive(Debug, Default)]
pub struct GammaCache {
    map: RwLock<HashMap<CacheKey, u64>>,
    log: Option<Mutex<File>>,
    path: Option<PathBuf>,
    hits: AtomicU64,
    misses: AtomicU64,
}

fn parse_record(line: &str) -> Result<(CacheKey, u64), String> {
    let mut fields = line.split('\t');
    let (Some(key), Some(hash), Some(size), None) = (fields.next(), fields.next(), fields.next(), fields.next()) else {
        return Err("expected 3 tab-separated fields".into());
    };
    let bytes = hex::decode(hash).map_err(|e| format!("bad digest: {e}"))?;
    let digest: Digest32 = bytes.try_into().map_err(|_| "digest must be 32 bytes".to_string())?;
    let size = size.parse::<u64>().map_err(|e| format!("bad size: {e}"))?;
    Ok((
        CacheKey {
            compressor: key.to_string(),
            digest,
        },
        size,
    ))
}

fn format_record(key: &CacheKey, size: u64) -> String {
    format!("{}\t{}\t{}\n", key.compressor, hex::encode(key.digest), size)
}

/// Reads every record, truncating a torn final line in place.
fn read_log(path: &Path) -> Result<Vec<(CacheKey, u64)>, CacheError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut good_len = 0u64;
    let mut line_no = 0;
    let mut buf = String::new();
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let complete = buf.ends_with('\n');
        let body = buf.trim_end_matches(['\n', '\r']);
        if body.is_empty() && complete {
            good_len += n as u64;
            continue;
        }
        match parse_record(body) {
            Ok(rec) if complete => {
                records.push(rec);
                good_len += n as u64;
            }
            _ if !complete => {
                OpenOptions::new().write(true).open(path)?.set_len(good_len)?;
                break;
            }
            Err(message) => {
                return Err(CacheError::Corrupt {
                    path: path.to_path_buf(),
                    line: line_no,
                    message,
                })
            }
            Ok(_) => unreachable!(),
        }
    }
    Ok(records)
}

impl GammaCache {
    /// A process-local cache.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads the log at `path` (created on first insert) and appends to it.
    pub fn open(path: &Path) -> Result<Self, CacheError> {
        let records = read_log(path)?;
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            map: RwLock::new(records.into_iter().collect()),
            log: Some(Mutex::new(file)),
            path: Some(path.to_path_buf()),
            ..Self::default()
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Looks up a key and counts the hit or miss.
    pub fn lookup(&self, key: &CacheKey) -> Option<u64> {
        let found = self.map.read().expect("cache lock poisoned").get(key).copied();
        match found {
            Some(_) => self.hits.fetch_add(1, Ordering::Relaxed),
            None => self.misses.fetch_add(1, Ordering::Relaxed),
        };
        found
    }

    /// Stores a value. Values are deterministic per key, so a concurrent
    /// duplicate insert is harmless.
    pub fn insert(&self, key: CacheKey, size: u64) -> Result<(), CacheError> {
        let fresh = self
            .map
            .write()
            .expect("cache lock poisoned")
            .insert(key.clone(), size)
            .is_none();
        if fresh {
            if let Some(log) = &self.log {
                log.lock()
                    .expect("cache log lock poisoned")
                    .write_all(format_record(&key, size).as_bytes())?;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }
}

/// Outcome of [`compact`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Compaction {
    pub records_before: usize,
    pub records_after: usize,
}

/// Rewrites the log with one record per key, sorted, via a temp file and an
/// atomic rename.
pub fn compact(path: &Path) -> Result<Compaction, CacheError> {
    let records = read_log(path)?;
    let before = records.len();
    let unique: BTreeMap<CacheKey, u64> = records.into_iter().collect();
    let tmp = path.with_extension("compact.tmp");
    {
        let mut f = File::create(&tmp)?;
        for (k, v) in &unique {
            f.write_all(format_record(k, *v).as_bytes())?;
        }
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(Compaction {
        records_before: before,
        records_after: unique.len(),
    })
}
