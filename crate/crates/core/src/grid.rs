//! Grid-count index keys.
//!
//! The bounding box of a signature's minutiae is cut into an `n × n` grid of
//! equally sized blocks, the minutiae in each block are counted, and the counts
//! are emitted column by column (a column is one x-block, walked along y) and
//! joined with `-`. Prints that produce the same key form one cluster.

use std::fmt;

use crate::error::{Error, Result};
use crate::signature::{Minutia, Signature};

pub const DEFAULT_GRID_SIZE: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridParams {
    pub n: u32,
}

impl GridParams {
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("grid size must be at least 1".into()));
        }
        Ok(GridParams { n })
    }
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            n: DEFAULT_GRID_SIZE,
        }
    }
}

/// Inclusive pixel bounds of a set of minutiae.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl BoundingBox {
    pub fn width(&self) -> u64 {
        u64::from(self.x_max - self.x_min) + 1
    }

    pub fn height(&self) -> u64 {
        u64::from(self.y_max - self.y_min) + 1
    }

    pub fn contains(&self, m: &Minutia) -> bool {
        (self.x_min..=self.x_max).contains(&m.x) && (self.y_min..=self.y_max).contains(&m.y)
    }
}

pub fn bounding_box(s: &Signature) -> Result<BoundingBox> {
    let first = s
        .minutiae
        .first()
        .ok_or_else(|| Error::EmptySignature(s.record_id.clone()))?;
    let init = BoundingBox {
        x_min: first.x,
        y_min: first.y,
        x_max: first.x,
        y_max: first.y,
    };
    Ok(s.minutiae.iter().fold(init, |b, m| BoundingBox {
        x_min: b.x_min.min(m.x),
        y_min: b.y_min.min(m.y),
        x_max: b.x_max.max(m.x),
        y_max: b.y_max.max(m.y),
    }))
}

/// Whole part of `offset / (extent / n)`, clamped to the last block.
///
/// Evaluated as `offset * n / extent` in integers, which is the exact value of
/// the real-valued quotient's floor and cannot be pushed across a block
/// boundary by rounding.
fn block_along(offset: u64, extent: u64, n: u32) -> u32 {
    let block = offset * u64::from(n) / extent;
    block.min(u64::from(n) - 1) as u32
}

/// Block coordinates `(x_block, y_block)` of a minutia inside `bbox`.
pub fn block_of(m: &Minutia, bbox: &BoundingBox, p: GridParams) -> Result<(u32, u32)> {
    if !bbox.contains(m) {
        return Err(Error::OutsideBox { x: m.x, y: m.y });
    }
    let dx = u64::from(m.x - bbox.x_min);
    let dy = u64::from(m.y - bbox.y_min);
    Ok((
        block_along(dx, bbox.width(), p.n),
        block_along(dy, bbox.height(), p.n),
    ))
}

/// The per-block minutiae counts of a signature, and their `-`-joined text form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexKey {
    counts: Vec<u32>,
    text: String,
}

impl IndexKey {
    pub fn from_counts(counts: Vec<u32>) -> Self {
        let text = counts
            .iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join("-");
        IndexKey { counts, text }
    }

    /// Parses a key text back into counts; the number of fields must be a perfect square.
    pub fn parse(text: &str) -> Result<Self> {
        let counts = text
            .split('-')
            .map(|f| {
                if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(Error::InvalidParams(format!("malformed index key {text:?}")));
                }
                f.parse::<u32>()
                    .map_err(|_| Error::InvalidParams(format!("malformed index key {text:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let side = (counts.len() as f64).sqrt().round() as usize;
        if side * side != counts.len() {
            return Err(Error::InvalidParams(format!(
                "index key {text:?} has {} fields, not a square number",
                counts.len()
            )));
        }
        Ok(IndexKey::from_counts(counts))
    }

    /// Counts in emission order (column-major).
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }

    /// Total minutiae counted.
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }
}

impl fmt::Display for IndexKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

pub fn compute_index(s: &Signature, p: GridParams) -> Result<IndexKey> {
    let bbox = bounding_box(s)?;
    let n = p.n as usize;
    let mut counts = vec![0u32; n * n];
    for m in &s.minutiae {
        let (bx, by) = block_of(m, &bbox, p)?;
        counts[bx as usize * n + by as usize] += 1;
    }
    Ok(IndexKey::from_counts(counts))
}
