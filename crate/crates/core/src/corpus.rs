//! Manifest-driven ingestion of byte/text corpora.
//!
//! A manifest lists the documents and one normalization pipeline applied to
//! all of them, in order:
//!
//! ```json
//! {
//!   "normalization": [
//!     { "step": "decode-to-utf8", "encoding": "utf-16" },
//!     { "step": "newline-fold" },
//!     { "step": "strip-markup" },
//!     { "step": "whitespace-collapse" },
//!     { "step": "lowercase" }
//!   ],
//!   "entries": [
//!     { "id": "eng", "path": "eng.html", "tags": { "language": "English" } }
//!   ]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing file for `{id}`: {path}: {source}")]
    MissingFile {
        id: String,
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("unknown normalization step `{0}`")]
    UnknownStep(String),
    #[error("step `{step}`: {message}")]
    BadStepParam { step: String, message: String },
    #[error("`{id}`: cannot decode as {encoding} at byte offset {offset}")]
    DecodeError {
        id: String,
        encoding: String,
        offset: usize,
    },
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
}

/// One step as written in the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepSpec {
    pub step: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, String>,
}

impl StepSpec {
    pub fn named(step: &str) -> Self {
        Self {
            step: step.to_string(),
            params: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: String,
    #[serde(default)]
    pub tags: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    #[serde(default)]
    pub normalization: Vec<StepSpec>,
    pub entries: Vec<ManifestEntry>,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl CorpusManifest {
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let bad = |message: String| CorpusError::Manifest {
            path: path.to_path_buf(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
        let mut manifest: CorpusManifest = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        manifest.base_dir = path.parent().map(Path::to_path_buf);
        manifest.validate()?;
        Ok(manifest)
    }

    /// Rejects duplicate ids and unknown steps before touching any file.
    pub fn validate(&self) -> Result<Vec<NormStep>, CorpusError> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.id.as_str()) {
                return Err(CorpusError::DuplicateId(e.id.clone()));
            }
        }
        self.normalization.iter().map(NormStep::from_spec).collect()
    }

    fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Utf8,
    /// UTF-16 with a byte-order mark; little-endian when the mark is absent.
    Utf16,
    Utf16Le,
    Utf16Be,
    Latin1,
    Ascii,
}

impl Encoding {
    fn parse(name: &str) -> Option<Self> {
        Some(match name.to_ascii_lowercase().as_str() {
            "utf-8" | "utf8" => Encoding::Utf8,
            "utf-16" | "utf16" => Encoding::Utf16,
            "utf-16le" | "utf16le" => Encoding::Utf16Le,
            "utf-16be" | "utf16be" => Encoding::Utf16Be,
            "latin1" | "latin-1" | "iso-8859-1" => Encoding::Latin1,
            "ascii" | "us-ascii" => Encoding::Ascii,
            _ => return None,
        })
    }

    fn label(self) -> &'static str {
        match self {
            Encoding::Utf8 => "utf-8",
            Encoding::Utf16 => "utf-16",
            Encoding::Utf16Le => "utf-16le",
            Encoding::Utf16Be => "utf-16be",
            Encoding::Latin1 => "latin1",
            Encoding::Ascii => "ascii",
        }
    }
}

/// A registered normalization step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormStep {
    DecodeToUtf8(Encoding),
    /// CRLF and lone CR become LF.
    NewlineFold,
    /// Runs of ASCII whitespace become one space; leading/trailing runs are dropped.
    WhitespaceCollapse,
    /// Unicode lowercase for valid UTF-8, ASCII lowercase otherwise.
    Lowercase,
    /// Drops every `<...>` span; an unclosed `<` is kept.
    StripMarkup,
    None,
}

impl NormStep {
    pub fn from_spec(spec: &StepSpec) -> Result<Self, CorpusError> {
        let no_params = |step: NormStep| {
            if spec.params.is_empty() {
                Ok(step)
            } else {
                Err(CorpusError::BadStepParam {
                    step: spec.step.clone(),
                    message: "takes no parameters".into(),
                })
            }
        };
        match spec.step.as_str() {
            "decode-to-utf8" => {
                let name = spec.params.get("encoding").map(String::as_str).unwrap_or("utf-8");
                let enc = Encoding::parse(name).ok_or_else(|| CorpusError::BadStepParam {
                    step: spec.step.clone(),
                    message: format!("unsupported encoding `{name}`"),
                })?;
                if spec.params.keys().any(|k| k != "encoding") {
                    return Err(CorpusError::BadStepParam {
                        step: spec.step.clone(),
                        message: "only `encoding` is accepted".into(),
                    });
                }
                Ok(NormStep::DecodeToUtf8(enc))
            }
            "newline-fold" => no_params(NormStep::NewlineFold),
            "whitespace-collapse" => no_params(NormStep::WhitespaceCollapse),
            "lowercase" => no_params(NormStep::Lowercase),
            "strip-markup" => no_params(NormStep::StripMarkup),
            "none" => no_params(NormStep::None),
            other => Err(CorpusError::UnknownStep(other.to_string())),
        }
    }

    pub fn apply(self, id: &str, bytes: &[u8]) -> Result<Vec<u8>, CorpusError> {
        Ok(match self {
            NormStep::DecodeToUtf8(enc) => decode(id, bytes, enc)?,
            NormStep::NewlineFold => newline_fold(bytes),
            NormStep::WhitespaceCollapse => whitespace_collapse(bytes),
            NormStep::Lowercase => lowercase(bytes),
            NormStep::StripMarkup => strip_markup(bytes),
            NormStep::None => bytes.to_vec(),
        })
    }
}

impl fmt::Display for NormStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormStep::DecodeToUtf8(enc) => write!(f, "decode-to-utf8({})", enc.label()),
            NormStep::NewlineFold => f.write_str("newline-fold"),
            NormStep::WhitespaceCollapse => f.write_str("whitespace-collapse"),
            NormStep::Lowercase => f.write_str("lowercase"),
            NormStep::StripMarkup => f.write_str("strip-markup"),
            NormStep::None => f.write_str("none"),
        }
    }
}

fn decode(id: &str, bytes: &[u8], enc: Encoding) -> Result<Vec<u8>, CorpusError> {
    let err = |offset: usize| CorpusError::DecodeError {
        id: id.to_string(),
        encoding: enc.label().to_string(),
        offset,
    };
    match enc {
        Encoding::Utf8 => {
            let body = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
            let skipped = bytes.len() - body.len();
            std::str::from_utf8(body).map_err(|e| err(skipped + e.valid_up_to()))?;
            Ok(body.to_vec())
        }
        Encoding::Ascii => match bytes.iter().position(|&b| b >= 0x80) {
            Some(offset) => Err(err(offset)),
            None => Ok(bytes.to_vec()),
        },
        Encoding::Latin1 => Ok(bytes.iter().map(|&b| b as char).collect::<String>().into_bytes()),
        Encoding::Utf16 | Encoding::Utf16Le | Encoding::Utf16Be => {
            let (big_endian, start) = match (enc, bytes) {
                (Encoding::Utf16, [0xFE, 0xFF, ..]) => (true, 2),
                (Encoding::Utf16, [0xFF, 0xFE, ..]) => (false, 2),
                (Encoding::Utf16, _) => (false, 0),
                (Encoding::Utf16Be, _) => (true, 0),
                _ => (false, 0),
            };
            let body = &bytes[start..];
            if !body.len().is_multiple_of(2) {
                return Err(err(bytes.len() - 1));
            }
            let units = body.chunks_exact(2).map(|c| {
                if big_endian {
                    u16::from_be_bytes([c[0], c[1]])
                } else {
                    u16::from_le_bytes([c[0], c[1]])
                }
            });
            let mut out = String::with_capacity(body.len());
            let mut unit_index = 0usize;
            for r in char::decode_utf16(units) {
                match r {
                    Ok(c) => {
                        out.push(c);
                        unit_index += c.len_utf16();
                    }
                    Err(_) => return Err(err(start + 2 * unit_index)),
                }
            }
            // A BOM-less stream may still open with U+FEFF.
            Ok(out.strip_prefix('\u{FEFF}').unwrap_or(&out).as_bytes().to_vec())
        }
    }
}

fn newline_fold(bytes: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'\r' {
            out.push(b'\n');
            if bytes.get(i + 1) == Some(&b'\n') {
                i += 1;
            }
        } else {
            out.push(bytes[i]);
        }
        i += 1;
    }
    out
}

fn whitespace_collapse(bytes: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(bytes.len());
    let mut pending_space = false;
    for &b in bytes {
        if b.is_ascii_whitespace() || b == 0x0B {
            pending_space = !out.is_empty();
        } else {
            if pending_space {
                out.push(b' ');
                pending_space = false;
            }
            out.push(b);
        }
    }
    out
}

fn lowercase(bytes: &[u8]) -> Vec<u8> {
    match std::str::from_utf8(bytes) {
        Ok(s) => s.to_lowercase().into_bytes(),
        Err(_) => bytes.to_ascii_lowercase(),
    }
}

fn strip_markup(bytes: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'<' {
            if let Some(close) = bytes[i..].iter().position(|&b| b == b'>') {
                i += close + 1;
                continue;
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    out
}

/// Applies `steps` in order.
pub fn normalize(id: &str, raw: &[u8], steps: &[NormStep]) -> Result<Vec<u8>, CorpusError> {
    steps.iter().try_fold(raw.to_vec(), |bytes, step| step.apply(id, &bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Document {
    pub id: String,
    pub source_path: String,
    pub raw_bytes: Vec<u8>,
    pub normalized_bytes: Vec<u8>,
    pub tags: BTreeMap<String, String>,
    pub norm_steps: Vec<String>,
}

impl Document {
    /// A document built in memory, with no normalization.
    pub fn from_bytes(id: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        let bytes = bytes.into();
        Self {
            id: id.into(),
            source_path: String::new(),
            raw_bytes: bytes.clone(),
            normalized_bytes: bytes,
            tags: BTreeMap::new(),
            norm_steps: Vec::new(),
        }
    }
}

/// Reads and normalizes every entry. Output order follows the manifest.
pub fn ingest(manifest: &CorpusManifest) -> Result<Vec<Document>, CorpusError> {
    let steps = manifest.validate()?;
    let step_names: Vec<String> = steps.iter().map(ToString::to_string).collect();
    manifest
        .entries
        .par_iter()
        .map(|entry| {
            let path = manifest.resolve(&entry.path);
            let raw = std::fs::read(&path).map_err(|source| CorpusError::MissingFile {
                id: entry.id.clone(),
                path: path.clone(),
                source,
            })?;
            let normalized = normalize(&entry.id, &raw, &steps)?;
            Ok(Document {
                id: entry.id.clone(),
                source_path: path.to_string_lossy().into_owned(),
                raw_bytes: raw,
                normalized_bytes: normalized,
                tags: entry.tags.clone(),
                norm_steps: step_names.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write(dir: &Path, name: &str, bytes: &[u8]) -> String {
        std::fs::write(dir.join(name), bytes).unwrap();
        name.to_string()
    }

    fn manifest(dir: &Path, steps: &[&str], files: &[(&str, &str)]) -> CorpusManifest {
        CorpusManifest {
            normalization: steps.iter().map(|s| StepSpec::named(s)).collect(),
            entries: files
                .iter()
                .map(|(id, path)| ManifestEntry {
                    id: id.to_string(),
                    path: path.to_string(),
                    tags: BTreeMap::new(),
                })
                .collect(),
            base_dir: Some(dir.to_path_buf()),
        }
    }

    #[test]
    fn identical_files_normalize_identically() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a.txt", b"Hello <b>World</b>\r\n");
        let b = write(dir.path(), "b.txt", b"Hello <b>World</b>\r\n");
        let docs = ingest(&manifest(dir.path(), &["strip-markup", "lowercase"], &[("a", &a), ("b", &b)])).unwrap();
        assert_eq!(docs[0].normalized_bytes, docs[1].normalized_bytes);
        assert_eq!(docs[0].normalized_bytes, b"hello world\r\n");
        assert_eq!(docs[0].norm_steps, vec!["strip-markup", "lowercase"]);
    }

    #[test]
    fn newline_fold_equates_crlf_and_lf() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "crlf.txt", b"one\r\ntwo\rthree\r\n");
        let b = write(dir.path(), "lf.txt", b"one\ntwo\nthree\n");
        let docs = ingest(&manifest(dir.path(), &["newline-fold"], &[("crlf", &a), ("lf", &b)])).unwrap();
        assert_eq!(docs[0].normalized_bytes, docs[1].normalized_bytes);
    }

    #[test]
    fn errors_are_specific() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a.txt", b"x");
        let dup = manifest(dir.path(), &[], &[("a", &a), ("a", &a)]);
        assert!(matches!(ingest(&dup), Err(CorpusError::DuplicateId(id)) if id == "a"));
        let unknown = manifest(dir.path(), &["stem"], &[("a", &a)]);
        assert!(matches!(ingest(&unknown), Err(CorpusError::UnknownStep(s)) if s == "stem"));
        let missing = manifest(dir.path(), &[], &[("gone", "gone.txt")]);
        assert!(matches!(ingest(&missing), Err(CorpusError::MissingFile { .. })));
    }

    #[test]
    fn decode_error_reports_offset() {
        let steps = [NormStep::DecodeToUtf8(Encoding::Utf8)];
        let err = normalize("d", b"ok\xFFno", &steps).unwrap_err();
        assert!(matches!(err, CorpusError::DecodeError { offset: 2, .. }));
        let steps = [NormStep::DecodeToUtf8(Encoding::Utf16Le)];
        // unpaired high surrogate in the second unit
        let err = normalize("d", &[0x41, 0x00, 0x00, 0xD8, 0x41, 0x00], &steps).unwrap_err();
        assert!(matches!(err, CorpusError::DecodeError { offset: 2, .. }));
        let err = normalize("d", &[0x41, 0x00, 0x42], &steps).unwrap_err();
        assert!(matches!(err, CorpusError::DecodeError { offset: 2, .. }));
    }

    #[test]
    fn decodes_utf16_with_bom() {
        let steps = [NormStep::DecodeToUtf8(Encoding::Utf16)];
        let be = [0xFE, 0xFF, 0x00, 0x68, 0x00, 0xE9];
        let le = [0xFF, 0xFE, 0x68, 0x00, 0xE9, 0x00];
        assert_eq!(normalize("d", &be, &steps).unwrap(), "hé".as_bytes());
        assert_eq!(normalize("d", &le, &steps).unwrap(), "hé".as_bytes());
    }

    #[test]
    fn latin1_maps_bytes_to_code_points() {
        let steps = [NormStep::DecodeToUtf8(Encoding::Latin1)];
        assert_eq!(normalize("d", b"caf\xE9", &steps).unwrap(), "café".as_bytes());
    }

    #[test]
    fn markup_and_whitespace() {
        assert_eq!(strip_markup(b"<<a>b> x < y"), b"b> x < y");
        assert_eq!(whitespace_collapse(b"  a \t\n b  "), b"a b");
        assert_eq!(lowercase("ÉCOLE Über".as_bytes()), "école über".as_bytes());
    }

    #[test]
    fn parses_manifest_params() {
        let m: CorpusManifest = serde_json::from_str(
            r#"{"normalization":[{"step":"decode-to-utf8","encoding":"utf-16le"},{"step":"none"}],
                "entries":[{"id":"a","path":"a.txt"}]}"#,
        )
        .unwrap();
        assert_eq!(
            m.validate().unwrap(),
            vec![NormStep::DecodeToUtf8(Encoding::Utf16Le), NormStep::None]
        );
        let bad: CorpusManifest = serde_json::from_str(
            r#"{"normalization":[{"step":"decode-to-utf8","encoding":"ebcdic"}],"entries":[]}"#,
        )
        .unwrap();
        assert!(matches!(bad.validate(), Err(CorpusError::BadStepParam { .. })));
    }

    const TEXT_STEPS: [NormStep; 6] = [
        NormStep::NewlineFold,
        NormStep::WhitespaceCollapse,
        NormStep::Lowercase,
        NormStep::StripMarkup,
        NormStep::None,
        NormStep::DecodeToUtf8(Encoding::Utf8),
    ];

    proptest! {
        #[test]
        fn every_step_is_idempotent(s in "[a-zA-Z<> \t\r\nÉéß]{0,80}", which in 0usize..6) {
            let step = [TEXT_STEPS[which]];
            let once = normalize("p", s.as_bytes(), &step).unwrap();
            let twice = normalize("p", &once, &step).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn markup_first_pipeline_is_idempotent(s in "[a-zA-Z<> \t\r\nÉéß]{0,80}") {
            let pipeline = [
                NormStep::StripMarkup,
                NormStep::NewlineFold,
                NormStep::WhitespaceCollapse,
                NormStep::Lowercase,
            ];
            let once = normalize("p", s.as_bytes(), &pipeline).unwrap();
            let twice = normalize("p", &once, &pipeline).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn ascii_lowercase_fallback_is_idempotent(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let once = lowercase(&bytes);
            prop_assert_eq!(lowercase(&once), once.clone());
        }
    }
}
