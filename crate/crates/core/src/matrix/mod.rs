//! Pairwise distance matrices over a corpus.
//!
//! [`build_matrix`] computes every Γ it needs exactly once per distinct
//! content: one per document, one per unordered pair in canonical order and
//! one per self-pair for the diagonal. Jobs whose content digests coincide
//! are merged before dispatch, so the call count and the cache log are
//! independent of the worker count.

mod cache;

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::compressor::{Compressor, CompressorError};
use crate::corpus::Document;
use crate::distances::{canonical_pair, ncd_from_sizes, MetricId};

pub use cache::{compact, digest, digest_concat, CacheError, CacheKey, Compaction, Digest32, GammaCache};

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("a matrix needs at least 2 documents, got {0}")]
    TooFewDocuments(usize),
    #[error("worker count must be at least 1")]
    ZeroWorkers,
    #[error("compressor `{0}` is not deterministic; its sizes cannot be cached or compared")]
    NonDeterministic(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("label {0:?} contains a tab or newline")]
    BadLabel(String),
    #[error("Γ({job}) failed: {source}")]
    Compressor {
        job: String,
        #[source]
        source: CompressorError,
    },
    #[error("Γ({job}) is 0 for both operands; NCD is undefined")]
    Degenerate { job: String },
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("worker pool: {0}")]
    ThreadPool(String),
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid matrix: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How a matrix was produced. Not part of the TSV form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BuildMeta {
    /// RFC 3339, UTC.
    pub timestamp: String,
    pub workers: usize,
    /// Distinct Γ inputs answered by the cache.
    pub cache_hits: u64,
    /// Distinct Γ inputs sent to the compressor.
    pub compressor_calls: u64,
    /// Cells whose NCD numerator was negative and raised to 0.
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    /// Row-major, `n × n`.
    values: Vec<f64>,
    pub metric: MetricId,
    pub compressor_id: String,
    pub build_meta: Option<BuildMeta>,
}

fn check_label(label: &str) -> Result<(), MatrixError> {
    if label.is_empty() || label.contains(['\t', '\n', '\r']) {
        return Err(MatrixError::BadLabel(label.to_string()));
    }
    Ok(())
}

impl DistanceMatrix {
    /// Validates shape, labels, finiteness, non-negativity and exact symmetry.
    pub fn new(
        labels: Vec<String>,
        values: Vec<f64>,
        metric: MetricId,
        compressor_id: impl Into<String>,
    ) -> Result<Self, MatrixError> {
        let n = labels.len();
        if values.len() != n * n {
            return Err(MatrixError::Validation(format!(
                "{} labels need {} values, got {}",
                n,
                n * n,
                values.len()
            )));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            check_label(l)?;
            if !seen.insert(l.as_str()) {
                return Err(MatrixError::DuplicateLabel(l.clone()));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(MatrixError::Validation(format!(
                        "value at ({}, {}) is {v}; values must be finite and non-negative",
                        labels[i], labels[j]
                    )));
                }
                if v != values[j * n + i] {
                    return Err(MatrixError::Validation(format!(
                        "asymmetric: ({0}, {1}) = {v} but ({1}, {0}) = {2}",
                        labels[i],
                        labels[j],
                        values[j * n + i]
                    )));
                }
            }
        }
        Ok(Self {
            labels,
            values,
            metric,
            compressor_id: compressor_id.into(),
            build_meta: None,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.values[i * n..(i + 1) * n]
    }

    /// Rows and columns reordered so that new index `k` is old index `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n();
        assert_eq!(perm.len(), n, "permutation length");
        let labels = perm.iter().map(|&p| self.labels[p].clone()).collect();
        let mut values = Vec::with_capacity(n * n);
        for &a in perm {
            for &b in perm {
                values.push(self.get(a, b));
            }
        }
        Self {
            labels,
            values,
            metric: self.metric,
            compressor_id: self.compressor_id.clone(),
            build_meta: self.build_meta.clone(),
        }
    }

    /// `#metric<TAB>compressor`, the label row, then `n` rows with 6 decimals.
    pub fn to_tsv(&self) -> String {
        let n = self.n();
        let mut s = format!("#{}\t{}\n{}\n", self.metric, self.compressor_id, self.labels.join("\t"));
        for i in 0..n {
            for j in 0..n {
                if j > 0 {
                    s.push('\t');
                }
                let _ = write!(s, "{:.6}", self.get(i, j));
            }
            s.push('\n');
        }
        s
    }

    pub fn from_tsv(text: &str) -> Result<Self, MatrixError> {
        let parse_err = |line: usize, column: usize, message: String| MatrixError::Parse { line, column, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

        let (_, header) = lines.next().ok_or_else(|| parse_err(1, 1, "empty file".into()))?;
        let Some(header) = header.strip_prefix('#') else {
            return Err(parse_err(1, 1, "header must start with `#metric<TAB>compressor`".into()));
        };
        let fields: Vec<&str> = header.split('\t').collect();
        if fields.len() != 2 {
            return Err(parse_err(1, 1, format!("header has {} fields, expected 2", fields.len())));
        }
        let metric: MetricId = fields[0].parse().map_err(|e| parse_err(1, 2, e))?;
        let compressor_id = fields[1].to_string();

        let (_, label_line) = lines.next().ok_or_else(|| parse_err(2, 1, "missing label row".into()))?;
        let labels: Vec<String> = label_line.split('\t').map(str::to_string).collect();
        let n = labels.len();

        let mut values = Vec::with_capacity(n * n);
        for row in 0..n {
            let line_no = row + 3;
            let (_, line) = lines
                .next()
                .ok_or_else(|| parse_err(line_no, 1, format!("expected {n} data rows, found {row}")))?;
            let mut column = 1;
            let mut count = 0;
            for field in line.split('\t') {
                count += 1;
                if count > n {
                    return Err(parse_err(line_no, column, format!("row has more than {n} fields")));
                }
                let v: f64 = field
                    .parse()
                    .map_err(|e| parse_err(line_no, column, format!("`{field}`: {e}")))?;
                values.push(v);
                column += field.chars().count() + 1;
            }
            if count < n {
                return Err(parse_err(line_no, column, format!("row has {count} fields, expected {n}")));
            }
        }
        if let Some((line_no, extra)) = lines.find(|(_, l)| !l.is_empty()) {
            return Err(parse_err(line_no, 1, format!("unexpected trailing content `{extra}`")));
        }
        Self::new(labels, values, metric, compressor_id)
    }

    pub fn export(&self, path: &Path) -> Result<(), MatrixError> {
        std::fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn import(path: &Path) -> Result<Self, MatrixError> {
        Self::from_tsv(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy)]
enum Job {
    Single(usize),
    Pair(usize, usize),
}

impl Job {
    fn describe(self, docs: &[Document]) -> String {
        match self {
            Job::Single(i) => docs[i].id.clone(),
            Job::Pair(i, j) => format!("{}⊕{}", docs[i].id, docs[j].id),
        }
    }

    fn bytes(self, docs: &[Document]) -> Vec<u8> {
        match self {
            Job::Single(i) => docs[i].normalized_bytes.clone(),
            Job::Pair(i, j) => {
                let (a, b) = canonical_pair(&docs[i].normalized_bytes, &docs[j].normalized_bytes);
                [a, b].concat()
            }
        }
    }

    fn digest(self, docs: &[Document]) -> Digest32 {
        match self {
            Job::Single(i) => digest(&docs[i].normalized_bytes),
            Job::Pair(i, j) => {
                let (a, b) = canonical_pair(&docs[i].normalized_bytes, &docs[j].normalized_bytes);
                digest_concat(a, b)
            }
        }
    }
}

/// NCD over every pair of `docs`, diagonal included.
pub fn build_matrix(
    docs: &[Document],
    compressor: &dyn Compressor,
    cache: &GammaCache,
    workers: usize,
) -> Result<DistanceMatrix, MatrixError> {
    let n = docs.len();
    if n < 2 {
        return Err(MatrixError::TooFewDocuments(n));
    }
    if workers == 0 {
        return Err(MatrixError::ZeroWorkers);
    }
    let profile = compressor.profile();
    if !profile.deterministic {
        return Err(MatrixError::NonDeterministic(profile.id.clone()));
    }
    let mut seen = HashSet::new();
    for d in docs {
        check_label(&d.id)?;
        if !seen.insert(d.id.as_str()) {
            return Err(MatrixError::DuplicateLabel(d.id.clone()));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| MatrixError::ThreadPool(e.to_string()))?;

    let mut jobs: Vec<Job> = (0..n).map(Job::Single).collect();
    for i in 0..n {
        for j in i..n {
            jobs.push(Job::Pair(i, j));
        }
    }
    let keys: Vec<CacheKey> = pool.install(|| {
        jobs.par_iter()
            .map(|job| CacheKey::new(profile, job.digest(docs)))
            .collect()
    });

    // First job per distinct key, in job order.
    let mut first: HashMap<&CacheKey, usize> = HashMap::new();
    let mut unique = Vec::new();
    for (idx, key) in keys.iter().enumerate() {
        first.entry(key).or_insert_with(|| {
            unique.push(idx);
            idx
        });
    }

    let mut sizes: HashMap<&CacheKey, u64> = HashMap::with_capacity(unique.len());
    let mut missing = Vec::new();
    for &idx in &unique {
        match cache.lookup(&keys[idx]) {
            Some(v) => {
                sizes.insert(&keys[idx], v);
            }
            None => missing.push(idx),
        }
    }
    let cache_hits = (unique.len() - missing.len()) as u64;

    let computed: Vec<u64> = pool.install(|| {
        missing
            .par_iter()
            .map(|&idx| {
                let job = jobs[idx];
                compressor
                    .compressed_size(&job.bytes(docs))
                    .map_err(|source| MatrixError::Compressor {
                        job: job.describe(docs),
                        source,
                    })
            })
            .collect::<Result<_, _>>()
    })?;
    for (&idx, &size) in missing.iter().zip(&computed) {
        cache.insert(keys[idx].clone(), size)?;
        sizes.insert(&keys[idx], size);
    }

    let gamma = |idx: usize| sizes[&keys[idx]];
    let pair_index = |i: usize, j: usize| n + i * n - i * (i + 1) / 2 + j;
    let mut values = vec![0.0; n * n];
    let mut clamped = 0;
    for i in 0..n {
        for j in i..n {
            let (gx, gy) = (gamma(i), gamma(j));
            if gx.max(gy) == 0 {
                return Err(MatrixError::Degenerate {
                    job: Job::Pair(i, j).describe(docs),
                });
            }
            let (v, was_clamped) = ncd_from_sizes(gx, gy, gamma(pair_index(i, j)));
            clamped += usize::from(was_clamped);
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }

    let labels = docs.iter().map(|d| d.id.clone()).collect();
    let mut m = DistanceMatrix::new(labels, values, MetricId::Ncd, profile.id.clone())?;
    m.build_meta = Some(BuildMeta {
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        workers,
        cache_hits,
        compressor_calls: missing.len() as u64,
        clamped,
    });
    Ok(m)
}
