//! Identification of a query print against a loaded cluster table.

use crate::cluster::ClusterTable;
use crate::error::{Error, Result};
use crate::grid::{compute_index, GridParams, IndexKey};
use crate::matcher::{ordering_by_score_then_id, Matcher};
use crate::signature::{Signature, SignatureStore};

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub record_id: String,
    pub score: f64,
    pub is_match: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationResult {
    pub key: IndexKey,
    /// Every member of the query's bucket, best score first, ties by id.
    pub candidates: Vec<Candidate>,
    /// Share of the table forwarded to the matcher.
    pub penetration: f64,
}

impl IdentificationResult {
    pub fn matches(&self) -> impl Iterator<Item = &Candidate> {
        self.candidates.iter().filter(|c| c.is_match)
    }
}

/// Computes the query's key, fetches its bucket and scores the query against
/// each bucket member. No other record is compared.
pub fn identify<S, M>(
    query: &Signature,
    table: &ClusterTable,
    store: &S,
    grid: GridParams,
    matcher: &M,
) -> Result<IdentificationResult>
where
    S: SignatureStore + ?Sized,
    M: Matcher + ?Sized,
{
    query.ensure_non_empty()?;
    let key = compute_index(query, grid)?;
    let bucket = table.lookup_key(&key);
    let mut candidates = Vec::with_capacity(bucket.len());
    let prepared_query = if bucket.is_empty() {
        None
    } else {
        Some(matcher.prepare(query)?)
    };
    for id in bucket {
        let enrolled = store
            .signature(id)
            .ok_or_else(|| Error::UnknownRecord(id.clone()))?;
        let pq = prepared_query.as_ref().expect("bucket is non-empty");
        let r = matcher.compare_prepared(query, pq, enrolled, &matcher.prepare(enrolled)?)?;
        candidates.push(Candidate {
            record_id: id.clone(),
            score: r.score,
            is_match: matcher.accepts(&r),
        });
    }
    candidates.sort_by(|a, b| {
        ordering_by_score_then_id((&a.record_id, a.score), (&b.record_id, b.score))
    });
    let penetration = if table.size() == 0 {
        0.0
    } else {
        bucket.len() as f64 / table.size() as f64
    };
    Ok(IdentificationResult {
        key,
        candidates,
        penetration,
    })
}
