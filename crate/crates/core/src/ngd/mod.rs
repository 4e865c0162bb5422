//! Normalized Google distance over pluggable hit-count providers.
//!
//! ```text
//! NGD(x, y) = (max(log Λx, log Λy) − log Λxy) / (log Υ − min(log Λx, log Λy))
//! ```
//!
//! Logs are base 2; the ratio does not depend on the base. A conjunction
//! with no hits yields [`NgdValue::Infinite`], which is a result, not an
//! error.

mod cached;
mod http;
mod offline;

use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::distances::{DistanceValue, MetricId};

pub use cached::{repair_store, CachedProvider, Clock, HitCountRecord};
pub use http::{parse_total, HttpConfig, HttpProvider, TokenBucket, ENV_VARS as HTTP_ENV_VARS, MAX_RETRIES};
pub use offline::OfflineProvider;

/// Index size used when none is configured.
pub const DEFAULT_TOTAL: u64 = 8_000_000_000;

#[derive(Debug, Error)]
pub enum NgdError {
    #[error("term `{0}` has no hits; NGD is undefined")]
    ZeroMarginal(String),
    #[error("index size {total} does not exceed the largest marginal count {max_marginal}")]
    DegenerateTotal { total: u64, max_marginal: u64 },
    #[error("a query needs at least one term")]
    EmptyTerms,
    #[error("the offline corpus has no documents")]
    EmptyCorpus,
    #[error("transport: {0}")]
    Transport(String),
    #[error("response parse: {0}")]
    Parse(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("authentication rejected with HTTP {0}")]
    AuthFailure(u16),
    #[error("hit-count store {path} line {line}: {message}")]
    StoreCorrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("provider config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Source of conjunctive hit counts Λ and the index size Υ.
///
/// Implementations are shared across threads.
pub trait HitCountProvider: Send + Sync {
    fn id(&self) -> &str;

    /// Number of indexed items matching every term.
    fn lambda(&self, terms: &[String]) -> Result<u64, NgdError>;

    fn total(&self) -> Result<u64, NgdError>;
}

impl<P: HitCountProvider + ?Sized> HitCountProvider for &P {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn lambda(&self, terms: &[String]) -> Result<u64, NgdError> {
        (**self).lambda(terms)
    }
    fn total(&self) -> Result<u64, NgdError> {
        (**self).total()
    }
}

impl<P: HitCountProvider + ?Sized> HitCountProvider for Box<P> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn lambda(&self, terms: &[String]) -> Result<u64, NgdError> {
        (**self).lambda(terms)
    }
    fn total(&self) -> Result<u64, NgdError> {
        (**self).total()
    }
}

/// Lowercased, sorted, deduplicated.
pub fn canonical_terms<S: AsRef<str>>(terms: &[S]) -> Vec<String> {
    let mut out: Vec<String> = terms.iter().map(|t| t.as_ref().to_lowercase()).collect();
    out.sort();
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum NgdValue {
    Finite(f64),
    Infinite,
}

impl fmt::Display for NgdValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NgdValue::Finite(v) => write!(f, "{v:.6}"),
            NgdValue::Infinite => f.write_str("INFINITE"),
        }
    }
}

/// The formula on raw counts with a caller-chosen logarithm.
pub fn ngd_with_log(
    lx: u64,
    ly: u64,
    lxy: u64,
    total: u64,
    log: impl Fn(f64) -> f64,
) -> Result<(NgdValue, bool), NgdError> {
    if lx == 0 || ly == 0 {
        let which = if lx == 0 { "x" } else { "y" };
        return Err(NgdError::ZeroMarginal(which.into()));
    }
    let max_marginal = lx.max(ly);
    if total <= max_marginal {
        return Err(NgdError::DegenerateTotal { total, max_marginal });
    }
    if lxy == 0 {
        return Ok((NgdValue::Infinite, false));
    }
    let (a, b) = (log(lx as f64), log(ly as f64));
    let num = a.max(b) - log(lxy as f64);
    let den = log(total as f64) - a.min(b);
    Ok((NgdValue::Finite(num / den), lxy > lx.min(ly)))
}

/// NGD on counts, base 2. The flag reports a negative numerator, which only
/// an inconsistent index (Λxy above a marginal) produces; the value is
/// returned unclamped.
pub fn ngd_from_counts(lx: u64, ly: u64, lxy: u64, total: u64) -> Result<(NgdValue, bool), NgdError> {
    ngd_with_log(lx, ly, lxy, total, f64::log2)
}

/// One NGD evaluation with the counts that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NgdRecord {
    pub x: String,
    pub y: String,
    pub lambda_x: u64,
    pub lambda_y: u64,
    pub lambda_xy: u64,
    pub total: u64,
    pub value: NgdValue,
    /// Λxy exceeded a marginal, so the numerator is negative.
    pub negative_numerator: bool,
    pub provider: String,
}

impl NgdRecord {
    /// The finite value as a generic distance record.
    pub fn distance(&self) -> Option<DistanceValue> {
        let NgdValue::Finite(value) = self.value else {
            return None;
        };
        let (a, b) = if self.x <= self.y { (&self.x, &self.y) } else { (&self.y, &self.x) };
        let mut h = Sha256::new();
        for t in [a, b] {
            h.update((t.len() as u64).to_le_bytes());
            h.update(t.as_bytes());
        }
        Some(DistanceValue {
            value,
            metric: MetricId::Ngd,
            inputs_hash: hex::encode(h.finalize()),
            source_id: self.provider.clone(),
            clamped: false,
        })
    }

    pub fn tsv_header() -> &'static str {
        "x\ty\tlambda_x\tlambda_y\tlambda_xy\ttotal\tngd\tnegative_numerator\tprovider"
    }

    pub fn to_tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.x,
            self.y,
            self.lambda_x,
            self.lambda_y,
            self.lambda_xy,
            self.total,
            self.value,
            self.negative_numerator,
            self.provider
        )
    }
}

impl fmt::Display for NgdRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "NGD({}, {}) = {}  [Λx={} Λy={} Λxy={} Υ={} provider={}]",
            self.x, self.y, self.value, self.lambda_x, self.lambda_y, self.lambda_xy, self.total, self.provider
        )?;
        if self.negative_numerator {
            f.write_str("  (negative numerator: Λxy exceeds a marginal)")?;
        }
        Ok(())
    }
}

/// Queries Λx, Λy, Λxy and Υ from `p` and applies the formula.
pub fn ngd(x: &str, y: &str, p: &dyn HitCountProvider) -> Result<NgdRecord, NgdError> {
    let lx = p.lambda(&[x.to_string()])?;
    let ly = p.lambda(&[y.to_string()])?;
    if lx == 0 {
        return Err(NgdError::ZeroMarginal(x.into()));
    }
    if ly == 0 {
        return Err(NgdError::ZeroMarginal(y.into()));
    }
    let lxy = p.lambda(&[x.to_string(), y.to_string()])?;
    let total = p.total()?;
    let (value, negative_numerator) = ngd_from_counts(lx, ly, lxy, total)?;
    Ok(NgdRecord {
        x: x.into(),
        y: y.into(),
        lambda_x: lx,
        lambda_y: ly,
        lambda_xy: lxy,
        total,
        value,
        negative_numerator,
        provider: p.id().into(),
    })
}
