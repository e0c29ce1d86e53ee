//! Index key → record id buckets.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::grid::{compute_index, GridParams, IndexKey};
use crate::signature::{validate_record_id, Signature};
use rayon::prelude::*;

const TABLE_HEADER: &str = "#gridprint-table v1";

/// Sum of the byte values of `s`.
///
/// Anagram keys collide (`"1-0"` and `"0-1"` both give 142), which is why
/// every bucket holds a list. The table itself is keyed on the full key text.
pub fn additive_hash(s: &str) -> u64 {
    s.bytes().map(u64::from).sum()
}

/// Clusters of record ids sharing an index key. Keys iterate in first-seen
/// order and each bucket keeps insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClusterTable {
    buckets: IndexMap<String, Vec<String>>,
    size: usize,
}

impl ClusterTable {
    /// Builds the table in one pass over `(record_id, key)` pairs.
    pub fn load<I, K>(corpus: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, K)>,
        K: AsRef<str>,
    {
        let mut table = ClusterTable::default();
        let mut seen = HashSet::new();
        for (id, key) in corpus {
            validate_record_id(&id)?;
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateRecord(id));
            }
            table.push(key.as_ref(), id);
        }
        Ok(table)
    }

    fn push(&mut self, key: &str, id: String) {
        match self.buckets.get_mut(key) {
            Some(ids) => ids.push(id),
            None => {
                self.buckets.insert(key.to_string(), vec![id]);
            }
        }
        self.size += 1;
    }

    /// Record ids stored under `key`; empty when the key is absent.
    pub fn lookup(&self, key: &str) -> &[String] {
        self.buckets.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn lookup_key(&self, key: &IndexKey) -> &[String] {
        self.lookup(key.as_str())
    }

    pub fn buckets(&self) -> impl ExactSizeIterator<Item = (&str, &[String])> {
        self.buckets.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Number of records.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of distinct keys.
    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{TABLE_HEADER}");
        for (key, ids) in &self.buckets {
            let _ = writeln!(out, "{key}\t{}", ids.join(","));
        }
        out
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim_end() == TABLE_HEADER => {}
            Some(h) if h.starts_with("#gridprint-table") => {
                return Err(Error::format(origin, format!("unsupported table version {h:?}")))
            }
            _ => return Err(Error::format(origin, "missing table header")),
        }
        let mut pairs = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let (key, ids) = line.split_once('\t').ok_or_else(|| {
                Error::format(origin, format!("line {}: expected key<TAB>ids", i + 2))
            })?;
            IndexKey::parse(key)
                .map_err(|e| Error::format(origin, format!("line {}: {e}", i + 2)))?;
            for id in ids.split(',') {
                pairs.push((id.to_string(), key.to_string()));
            }
        }
        ClusterTable::load(pairs).map_err(|e| match e {
            Error::DuplicateRecord(_) | Error::InvalidRecordId(_) => {
                Error::format(origin, e.to_string())
            }
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ClusterTable::from_text(&text, path)
    }
}

/// Computes every signature's key in parallel, in input order.
pub fn index_signatures(signatures: &[Signature], grid: GridParams) -> Result<Vec<IndexKey>> {
    signatures
        .par_iter()
        .map(|s| compute_index(s, grid))
        .collect()
}

/// Indexes a corpus and loads the resulting keys into a table.
pub fn build_table(signatures: &[Signature], grid: GridParams) -> Result<ClusterTable> {
    let keys = index_signatures(signatures, grid)?;
    ClusterTable::load(
        signatures
            .iter()
            .zip(keys)
            .map(|(s, k)| (s.record_id.clone(), k.into_string())),
    )
}
