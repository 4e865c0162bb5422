//! The in-repo reference compressor.
//!
//! A greedy-with-one-step-lookahead LZ77 parser over an unbounded window,
//! emitted with byte-aligned framing so the output length is a pure function
//! of the input bytes on every platform.
//!
//! Stream layout:
//!
//! ```text
//! magic "NZ" | mode (1 byte) | varint(original length) | body
//! ```
//!
//! `mode = 0` stores the input verbatim. `mode = 1` is a token stream: groups
//! of up to eight tokens, each group preceded by a flag byte whose bit `k`
//! (LSB first) marks token `k` as a match. A literal is one raw byte; a match
//! is `varint(len - MIN_MATCH) varint(distance - 1)`. The encoder picks
//! whichever mode is shorter, so the stream never exceeds the stored size.

use std::fmt;

use super::{Compressor, CompressorError, CompressorProfile};

const MAGIC: [u8; 2] = *b"NZ";
const MODE_STORED: u8 = 0;
const MODE_TOKENS: u8 = 1;

/// Shortest match the token stream can express.
pub const MIN_MATCH: usize = 3;
/// Longest match emitted; longer repeats are split.
pub const MAX_MATCH: usize = 1 << 16;
/// Candidates examined per position along the hash chain.
pub const MAX_CHAIN: usize = 1024;

const HASH_BITS: u32 = 16;
const NIL: usize = usize::MAX;

/// Version string baked into the profile; bump whenever a single output byte
/// could change.
pub const FORMAT_VERSION: &str = "1";

/// Compressed size of the empty input: magic, mode and a one-byte length.
pub const EMPTY_SIZE: u64 = 4;

/// The bit-exact reference compressor (`lz-ref`).
#[derive(Debug, Clone)]
pub struct LzReference {
    profile: CompressorProfile,
}

impl LzReference {
    pub const ID: &'static str = "lz-ref";

    pub fn new() -> Self {
        Self {
            profile: CompressorProfile {
                id: Self::ID.to_string(),
                deterministic: true,
                params: vec![
                    ("min_match".into(), MIN_MATCH.to_string()),
                    ("max_match".into(), MAX_MATCH.to_string()),
                    ("max_chain".into(), MAX_CHAIN.to_string()),
                    ("window".into(), "unbounded".into()),
                ],
                version: FORMAT_VERSION.to_string(),
            },
        }
    }
}

impl Default for LzReference {
    fn default() -> Self {
        Self::new()
    }
}

impl Compressor for LzReference {
    fn profile(&self) -> &CompressorProfile {
        &self.profile
    }

    fn compressed_size(&self, data: &[u8]) -> Result<u64, CompressorError> {
        Ok(compress(data).len() as u64)
    }
}

fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

fn varint_len(mut v: u64) -> usize {
    let mut n = 1;
    while v >= 0x80 {
        v >>= 7;
        n += 1;
    }
    n
}

fn get_varint(buf: &[u8], pos: &mut usize) -> Result<u64, DecodeError> {
    let mut v = 0u64;
    let mut shift = 0;
    loop {
        let b = *buf.get(*pos).ok_or(DecodeError::Truncated)?;
        *pos += 1;
        if shift >= 64 {
            return Err(DecodeError::BadVarint);
        }
        v |= u64::from(b & 0x7f) << shift;
        if b & 0x80 == 0 {
            return Ok(v);
        }
        shift += 7;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Token {
    Literal(u8),
    Match { len: usize, dist: usize },
}

impl Token {
    fn encoded_len(self) -> usize {
        match self {
            Token::Literal(_) => 1,
            Token::Match { len, dist } => {
                varint_len((len - MIN_MATCH) as u64) + varint_len((dist - 1) as u64)
            }
        }
    }
}

struct MatchFinder<'a> {
    data: &'a [u8],
    head: Vec<usize>,
    prev: Vec<usize>,
    inserted: usize,
}

impl<'a> MatchFinder<'a> {
    fn new(data: &'a [u8]) -> Self {
        Self {
            data,
            head: vec![NIL; 1 << HASH_BITS],
            prev: vec![NIL; data.len()],
            inserted: 0,
        }
    }

    fn hash(&self, pos: usize) -> usize {
        let d = self.data;
        let v = u32::from(d[pos]) | (u32::from(d[pos + 1]) << 8) | (u32::from(d[pos + 2]) << 16);
        (v.wrapping_mul(0x9E37_79B1) >> (32 - HASH_BITS)) as usize
    }

    /// Inserts every position below `upto` into the chains.
    fn insert_until(&mut self, upto: usize) {
        let last = self.data.len().saturating_sub(MIN_MATCH - 1);
        while self.inserted < upto.min(last) {
            let h = self.hash(self.inserted);
            self.prev[self.inserted] = self.head[h];
            self.head[h] = self.inserted;
            self.inserted += 1;
        }
        self.inserted = self.inserted.max(upto);
    }

    /// Longest profitable match at `pos` against earlier positions. Among
    /// equal lengths the nearest candidate wins.
    fn best_match(&self, pos: usize) -> Option<Token> {
        let d = self.data;
        if pos + MIN_MATCH > d.len() {
            return None;
        }
        let limit = (d.len() - pos).min(MAX_MATCH);
        let mut cand = self.head[self.hash(pos)];
        let mut best_len = 0;
        let mut best_dist = 0;
        let mut chain = 0;
        while cand != NIL && chain < MAX_CHAIN {
            debug_assert!(cand < pos);
            if d[cand + best_len.min(limit - 1)] == d[pos + best_len.min(limit - 1)] {
                let mut len = 0;
                while len < limit && d[cand + len] == d[pos + len] {
                    len += 1;
                }
                if len > best_len {
                    best_len = len;
                    best_dist = pos - cand;
                    if len == limit {
                        break;
                    }
                }
            }
            cand = self.prev[cand];
            chain += 1;
        }
        if best_len < MIN_MATCH {
            return None;
        }
        let tok = Token::Match {
            len: best_len,
            dist: best_dist,
        };
        // Only keep matches that are cheaper than spelling the bytes out.
        (tok.encoded_len() < best_len).then_some(tok)
    }
}

fn tokenize(data: &[u8]) -> Vec<Token> {
    let mut finder = MatchFinder::new(data);
    let mut tokens = Vec::new();
    let mut pos = 0;
    while pos < data.len() {
        finder.insert_until(pos);
        let here = finder.best_match(pos);
        let Some(Token::Match { len, .. }) = here else {
            tokens.push(Token::Literal(data[pos]));
            pos += 1;
            continue;
        };
        // One-step lazy evaluation: defer to a strictly longer match at pos+1.
        finder.insert_until(pos + 1);
        if let Some(Token::Match { len: next_len, .. }) = finder.best_match(pos + 1) {
            if next_len > len {
                tokens.push(Token::Literal(data[pos]));
                pos += 1;
                continue;
            }
        }
        tokens.push(here.expect("match checked above"));
        pos += len;
    }
    tokens
}

fn header(out: &mut Vec<u8>, mode: u8, len: usize) {
    out.extend_from_slice(&MAGIC);
    out.push(mode);
    put_varint(out, len as u64);
}

/// Compresses `data` into a self-describing stream.
pub fn compress(data: &[u8]) -> Vec<u8> {
    let tokens = tokenize(data);
    let body_len: usize = tokens.iter().map(|t| t.encoded_len()).sum::<usize>() + tokens.len().div_ceil(8);

    let mut out = Vec::with_capacity(8 + body_len.min(data.len()));
    if body_len >= data.len() {
        header(&mut out, MODE_STORED, data.len());
        out.extend_from_slice(data);
        return out;
    }
    header(&mut out, MODE_TOKENS, data.len());
    for group in tokens.chunks(8) {
        let flags = group
            .iter()
            .enumerate()
            .fold(0u8, |acc, (k, t)| match t {
                Token::Match { .. } => acc | (1 << k),
                Token::Literal(_) => acc,
            });
        out.push(flags);
        for t in group {
            match *t {
                Token::Literal(b) => out.push(b),
                Token::Match { len, dist } => {
                    put_varint(&mut out, (len - MIN_MATCH) as u64);
                    put_varint(&mut out, (dist - 1) as u64);
                }
            }
        }
    }
    out
}

/// Errors from [`decompress`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeError {
    BadMagic,
    BadMode(u8),
    Truncated,
    BadVarint,
    BadDistance { at: usize },
    LengthMismatch { declared: u64, actual: u64 },
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::BadMagic => write!(f, "bad magic"),
            DecodeError::BadMode(m) => write!(f, "unknown mode {m}"),
            DecodeError::Truncated => write!(f, "truncated stream"),
            DecodeError::BadVarint => write!(f, "overlong varint"),
            DecodeError::BadDistance { at } => write!(f, "match distance out of range at output offset {at}"),
            DecodeError::LengthMismatch { declared, actual } => {
                write!(f, "declared length {declared}, decoded {actual}")
            }
        }
    }
}

impl std::error::Error for DecodeError {}

/// Inverse of [`compress`]. Only used to keep the encoder honest.
pub fn decompress(stream: &[u8]) -> Result<Vec<u8>, DecodeError> {
    if stream.len() < 3 || stream[..2] != MAGIC {
        return Err(DecodeError::BadMagic);
    }
    let mode = stream[2];
    let mut pos = 3;
    let declared = get_varint(stream, &mut pos)?;
    let out = match mode {
        MODE_STORED => stream[pos..].to_vec(),
        MODE_TOKENS => {
            let mut out = Vec::with_capacity(declared as usize);
            while (out.len() as u64) < declared {
                let flags = *stream.get(pos).ok_or(DecodeError::Truncated)?;
                pos += 1;
                for k in 0..8 {
                    if out.len() as u64 >= declared {
                        break;
                    }
                    if flags & (1 << k) == 0 {
                        out.push(*stream.get(pos).ok_or(DecodeError::Truncated)?);
                        pos += 1;
                    } else {
                        let len = get_varint(stream, &mut pos)? as usize + MIN_MATCH;
                        let dist = get_varint(stream, &mut pos)? as usize + 1;
                        if dist > out.len() {
                            return Err(DecodeError::BadDistance { at: out.len() });
                        }
                        let start = out.len() - dist;
                        for i in 0..len {
                            let b = out[start + i];
                            out.push(b);
                        }
                    }
                }
            }
            out
        }
        m => return Err(DecodeError::BadMode(m)),
    };
    if out.len() as u64 != declared {
        return Err(DecodeError::LengthMismatch {
            declared,
            actual: out.len() as u64,
        });
    }
    Ok(out)
}
