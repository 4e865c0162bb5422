//! Normalized compression distance and the ideal distances it stands in for.
//!
//! All NCD entry points concatenate the operands in canonical order (shorter
//! first, ties broken by byte order), which makes Γ(x⊕y) a function of the
//! unordered pair and the distance exactly symmetric. [`ConcatOrder::Raw`]
//! is available for measuring how asymmetric a compressor really is.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::compressor::{concat, Compressor, CompressorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MetricId {
    Ncd,
    Nid,
    Id,
    Ngd,
}

impl MetricId {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::Ncd => "NCD",
            MetricId::Nid => "NID",
            MetricId::Id => "ID",
            MetricId::Ngd => "NGD",
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MetricId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "NCD" => Ok(MetricId::Ncd),
            "NID" => Ok(MetricId::Nid),
            "ID" => Ok(MetricId::Id),
            "NGD" => Ok(MetricId::Ngd),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}

/// One computed distance with enough provenance to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceValue {
    pub value: f64,
    pub metric: MetricId,
    /// Hex SHA-256 over the canonically ordered, length-prefixed operands.
    pub inputs_hash: String,
    pub source_id: String,
    /// The numerator came out negative and was raised to 0.
    pub clamped: bool,
}

#[derive(Debug, Error)]
pub enum DistanceError {
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error(transparent)]
    Compressor(#[from] CompressorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConcatOrder {
    /// Shorter operand first, ties by byte order.
    #[default]
    Canonical,
    /// `x` then `y` as given.
    Raw,
}

/// Orders a pair by (length, bytes).
pub fn canonical_pair<'a>(x: &'a [u8], y: &'a [u8]) -> (&'a [u8], &'a [u8]) {
    if (x.len(), x) <= (y.len(), y) {
        (x, y)
    } else {
        (y, x)
    }
}

/// x⊕y: concatenation in canonical order.
pub fn canonical_concat(x: &[u8], y: &[u8]) -> Vec<u8> {
    let (a, b) = canonical_pair(x, y);
    concat(a, b)
}

pub fn pair_hash(x: &[u8], y: &[u8]) -> String {
    let (a, b) = canonical_pair(x, y);
    let mut h = Sha256::new();
    h.update((a.len() as u64).to_le_bytes());
    h.update(a);
    h.update((b.len() as u64).to_le_bytes());
    h.update(b);
    hex::encode(h.finalize())
}

/// NCD from the three sizes: (Γ(x⊕y) − min) / max. Returns the value and
/// whether the numerator had to be clamped at zero.
pub fn ncd_from_sizes(gx: u64, gy: u64, gxy: u64) -> (f64, bool) {
    let lo = gx.min(gy);
    let hi = gx.max(gy);
    debug_assert!(hi > 0);
    let num = gxy as i128 - lo as i128;
    if num < 0 {
        (0.0, true)
    } else {
        (num as f64 / hi as f64, false)
    }
}

fn check_operands(x: &[u8], y: &[u8]) -> Result<(), DistanceError> {
    if x.is_empty() && y.is_empty() {
        return Err(DistanceError::DegenerateInput("both operands are empty"));
    }
    Ok(())
}

fn singles<C: Compressor + ?Sized>(x: &[u8], y: &[u8], c: &C) -> Result<(u64, u64), DistanceError> {
    let gx = c.compressed_size(x)?;
    let gy = c.compressed_size(y)?;
    if gx.max(gy) == 0 {
        return Err(DistanceError::DegenerateInput("both operands compress to 0 bytes"));
    }
    Ok((gx, gy))
}

/// Normalized compression distance, canonical concatenation.
pub fn ncd<C: Compressor + ?Sized>(x: &[u8], y: &[u8], c: &C) -> Result<DistanceValue, DistanceError> {
    ncd_with_order(x, y, c, ConcatOrder::Canonical)
}

pub fn ncd_with_order<C: Compressor + ?Sized>(
    x: &[u8],
    y: &[u8],
    c: &C,
    order: ConcatOrder,
) -> Result<DistanceValue, DistanceError> {
    check_operands(x, y)?;
    let (gx, gy) = singles(x, y, c)?;
    let joined = match order {
        ConcatOrder::Canonical => canonical_concat(x, y),
        ConcatOrder::Raw => concat(x, y),
    };
    let gxy = c.compressed_size(&joined)?;
    let (value, clamped) = ncd_from_sizes(gx, gy, gxy);
    Ok(DistanceValue {
        value,
        metric: MetricId::Ncd,
        inputs_hash: pair_hash(x, y),
        source_id: c.id().to_string(),
        clamped,
    })
}

/// NCD from the max-of-conditionals form:
/// max(Γ(yx) − Γ(y), Γ(xy) − Γ(x)) / max(Γ(x), Γ(y)).
pub fn ncd_max_form<C: Compressor + ?Sized>(
    x: &[u8],
    y: &[u8],
    c: &C,
) -> Result<DistanceValue, DistanceError> {
    ncd_max_form_with_order(x, y, c, ConcatOrder::Canonical)
}

pub fn ncd_max_form_with_order<C: Compressor + ?Sized>(
    x: &[u8],
    y: &[u8],
    c: &C,
    order: ConcatOrder,
) -> Result<DistanceValue, DistanceError> {
    check_operands(x, y)?;
    let (gx, gy) = singles(x, y, c)?;
    let (gxy, gyx) = match order {
        ConcatOrder::Canonical => {
            let g = c.compressed_size(&canonical_concat(x, y))?;
            (g, g)
        }
        ConcatOrder::Raw => (
            c.compressed_size(&concat(x, y))?,
            c.compressed_size(&concat(y, x))?,
        ),
    };
    let y_given_x = gxy as i128 - gx as i128;
    let x_given_y = gyx as i128 - gy as i128;
    let num = y_given_x.max(x_given_y);
    let clamped = num < 0;
    let value = if clamped { 0.0 } else { num as f64 / gx.max(gy) as f64 };
    Ok(DistanceValue {
        value,
        metric: MetricId::Ncd,
        inputs_hash: pair_hash(x, y),
        source_id: c.id().to_string(),
        clamped,
    })
}

/// NID = max(K(x|y), K(y|x)) / max(K(x), K(y)), from externally supplied
/// complexities (see [`crate::toyk`]).
pub fn nid_ideal(kx: u64, ky: u64, kx_given_y: u64, ky_given_x: u64) -> Result<DistanceValue, DistanceError> {
    let denom = kx.max(ky);
    if denom == 0 {
        return Err(DistanceError::DegenerateInput("max(K(x), K(y)) is 0"));
    }
    let mut h = Sha256::new();
    for v in [kx, ky, kx_given_y, ky_given_x] {
        h.update(v.to_le_bytes());
    }
    Ok(DistanceValue {
        value: kx_given_y.max(ky_given_x) as f64 / denom as f64,
        metric: MetricId::Nid,
        inputs_hash: hex::encode(h.finalize()),
        source_id: "ideal".to_string(),
        clamped: false,
    })
}
