//! Compressed-size functions.
//!
//! A [`Compressor`] maps a byte string to the size in bytes of its complete
//! compressed stream, header included. The crate ships one bit-exact
//! reference implementation ([`LzReference`]) and an adapter for external
//! tools that compress stdin to stdout ([`ExternalCompressor`]).

mod audit;
mod external;
pub mod lz;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use audit::{normality_audit, NormalityReport};
pub use external::{ExternalCompressor, ExternalSpec};
pub use lz::LzReference;

#[derive(Debug, Error)]
pub enum CompressorError {
    #[error("unknown compressor `{0}`")]
    UnknownCompressor(String),
    #[error("compressor `{id}` failed: {message}")]
    CompressorFailure { id: String, message: String },
    #[error("normality audit needs at least 2 samples, got {0}")]
    InsufficientSamples(usize),
    #[error("registry line {line}: {message}")]
    Registry { line: usize, message: String },
    #[error("duplicate compressor id `{0}`")]
    DuplicateId(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Identity and parameters of a size function.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CompressorProfile {
    pub id: String,
    pub deterministic: bool,
    pub params: Vec<(String, String)>,
    pub version: String,
}

impl CompressorProfile {
    /// Key that separates cached sizes across ids, versions and parameters.
    pub fn cache_key(&self) -> String {
        let mut key = format!("{}@{}", self.id, self.version);
        for (k, v) in &self.params {
            key.push(';');
            key.push_str(k);
            key.push('=');
            key.push_str(v);
        }
        key
    }
}

impl fmt::Display for CompressorProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.id, self.version)
    }
}

/// A compressed-size function Γ.
///
/// Implementations must be callable from many threads at once and must
/// return identical sizes for identical input when the profile says
/// `deterministic`.
pub trait Compressor: Send + Sync {
    fn profile(&self) -> &CompressorProfile;

    fn compressed_size(&self, data: &[u8]) -> Result<u64, CompressorError>;

    fn id(&self) -> &str {
        &self.profile().id
    }
}

impl<C: Compressor + ?Sized> Compressor for Arc<C> {
    fn profile(&self) -> &CompressorProfile {
        (**self).profile()
    }

    fn compressed_size(&self, data: &[u8]) -> Result<u64, CompressorError> {
        (**self).compressed_size(data)
    }
}

impl<C: Compressor + ?Sized> Compressor for &C {
    fn profile(&self) -> &CompressorProfile {
        (**self).profile()
    }

    fn compressed_size(&self, data: &[u8]) -> Result<u64, CompressorError> {
        (**self).compressed_size(data)
    }
}

/// Γ(y|x) = Γ(xy) − Γ(x), with the clamped variant alongside.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConditionalSize {
    pub raw: i64,
    pub clamped: u64,
}

/// Raw concatenation, no separator.
pub fn concat(x: &[u8], y: &[u8]) -> Vec<u8> {
    let mut xy = Vec::with_capacity(x.len() + y.len());
    xy.extend_from_slice(x);
    xy.extend_from_slice(y);
    xy
}

/// Size of `y` given `x`: Γ(xy) − Γ(x).
pub fn conditional_size<C: Compressor + ?Sized>(
    x: &[u8],
    y: &[u8],
    c: &C,
) -> Result<ConditionalSize, CompressorError> {
    let gx = c.compressed_size(x)? as i64;
    let gxy = c.compressed_size(&concat(x, y))? as i64;
    let raw = gxy - gx;
    Ok(ConditionalSize {
        raw,
        clamped: raw.max(0) as u64,
    })
}

/// Compressors addressable by id.
#[derive(Clone)]
pub struct Registry {
    entries: BTreeMap<String, Arc<dyn Compressor>>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("ids", &self.entries.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl Registry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// A registry holding only the reference compressor.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(LzReference::new()))
            .expect("empty registry");
        r
    }

    pub fn register(&mut self, c: Arc<dyn Compressor>) -> Result<(), CompressorError> {
        let id = c.id().to_string();
        if self.entries.contains_key(&id) {
            return Err(CompressorError::DuplicateId(id));
        }
        self.entries.insert(id, c);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<Arc<dyn Compressor>, CompressorError> {
        self.entries
            .get(id)
            .cloned()
            .ok_or_else(|| CompressorError::UnknownCompressor(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn compressed_size(&self, data: &[u8], id: &str) -> Result<u64, CompressorError> {
        self.get(id)?.compressed_size(data)
    }

    /// Adds every adapter declared in a registry table.
    ///
    /// One record per line, tab separated: `id`, `command`, `version probe`,
    /// and optionally `deterministic` (`true`/`false`, default `true`).
    /// Blank lines and lines starting with `#` are skipped.
    pub fn load_table(&mut self, text: &str) -> Result<(), CompressorError> {
        for spec in ExternalSpec::parse_table(text)? {
            self.register(Arc::new(ExternalCompressor::new(spec)?))?;
        }
        Ok(())
    }

    pub fn load_table_file(&mut self, path: &Path) -> Result<(), CompressorError> {
        let text = std::fs::read_to_string(path)?;
        self.load_table(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bytes(seed: u64, n: usize) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = vec![0u8; n];
        rng.fill_bytes(&mut v);
        v
    }

    fn text_4k() -> Vec<u8> {
        let para = "Everyone has the right to life, liberty and security of person. \
                    No one shall be held in slavery or servitude; slavery and the slave \
                    trade shall be prohibited in all their forms. ";
        let mut out = Vec::new();
        let mut i = 0usize;
        while out.len() < 4096 {
            out.extend_from_slice(para.as_bytes());
            out.extend_from_slice(format!("[{i}] ").as_bytes());
            i += 1;
        }
        out.truncate(4096);
        out
    }

    #[test]
    fn empty_input_costs_the_header() {
        let c = LzReference::new();
        assert_eq!(c.compressed_size(b"").unwrap(), 4);
    }

    #[test]
    fn repetition_compresses_below_500() {
        let c = LzReference::new();
        let g = c.compressed_size(&vec![b'a'; 10_000]).unwrap();
        assert!(g < 500);
        assert_eq!(g, 10);
    }

    #[test]
    fn random_input_is_incompressible() {
        let c = LzReference::new();
        let g = c.compressed_size(&random_bytes(0x5eed, 4096)).unwrap();
        assert!(g as f64 >= 4096.0 * 0.95);
        assert_eq!(g, 4101);
    }

    #[test]
    fn stored_mode_bounds_the_size() {
        let c = LzReference::new();
        for n in [0usize, 1, 2, 3, 127, 128, 5000] {
            let g = c.compressed_size(&random_bytes(n as u64, n)).unwrap();
            assert!(g <= n as u64 + 3 + 10, "n={n} g={g}");
        }
    }

    #[test]
    fn conditional_of_self_is_small() {
        let c = LzReference::new();
        let x = text_4k();
        let gx = c.compressed_size(&x).unwrap();
        let cond = conditional_size(&x, &x, &c).unwrap();
        assert!((cond.clamped as f64) < 0.15 * gx as f64, "{cond:?} vs {gx}");
        let gxx = c.compressed_size(&concat(&x, &x)).unwrap();
        assert_eq!(cond.raw, gxx as i64 - gx as i64);
    }

    #[test]
    fn conditional_on_empty_suffix_is_zero() {
        let c = LzReference::new();
        let cond = conditional_size(&text_4k(), b"", &c).unwrap();
        assert_eq!(cond.raw, 0);
        assert_eq!(cond.clamped, 0);
    }

    #[test]
    fn conditional_of_independent_random_is_full() {
        let c = LzReference::new();
        let x = random_bytes(1, 4096);
        let y = random_bytes(2, 4096);
        let gy = c.compressed_size(&y).unwrap();
        let cond = conditional_size(&x, &y, &c).unwrap();
        assert!(cond.clamped as f64 >= 0.9 * gy as f64);
        // stored(8192) - stored(4096): the varint length grows by 0 bytes
        assert_eq!(cond.clamped, 4096);
    }

    #[test]
    fn registry_lookup() {
        let r = Registry::with_builtins();
        assert_eq!(r.ids().collect::<Vec<_>>(), vec!["lz-ref"]);
        assert_eq!(r.compressed_size(b"", "lz-ref").unwrap(), 4);
        assert!(matches!(
            r.compressed_size(b"", "gzip"),
            Err(CompressorError::UnknownCompressor(id)) if id == "gzip"
        ));
    }

    #[test]
    fn cache_keys_differ_across_versions() {
        let a = LzReference::new().profile().clone();
        let mut b = a.clone();
        b.version = "2".into();
        assert_ne!(a.cache_key(), b.cache_key());
    }
}
