//! Grid-count clustering, identification and deduplication of fingerprint
//! minutiae signatures.
//!
//! A print's minutiae are counted over an `n × n` grid laid on their bounding
//! box; the joined counts form a cluster key. Identification compares a query
//! only with the records sharing its key, and deduplication sweeps each cluster
//! independently, so the pairwise matcher runs on a tiny fraction of the
//! database.

pub mod bench;
pub mod cli;
pub mod cluster;
pub mod config;
pub mod dedup;
pub mod error;
pub mod grid;
pub mod identify;
pub mod matcher;
pub mod signature;
pub mod stats;
pub mod synthgen;

pub use cluster::{additive_hash, build_table, index_signatures, ClusterTable};
pub use dedup::{comparison_count, deduplicate, exhaustive_dedup, DuplicateReport};
pub use error::{Error, Result};
pub use grid::{block_of, bounding_box, compute_index, BoundingBox, GridParams, IndexKey};
pub use identify::{identify, Candidate, IdentificationResult};
pub use matcher::{
    build_triplets, is_match, match_score, CountingMatcher, MatchParams, MatchResult, Matcher,
    Triplet, TripletMatcher,
};
pub use signature::{
    load_corpus, parse_signature, serialize_signature, Corpus, Minutia, Signature, SignatureStore,
};
pub use stats::{corpus_stats, estimate_workload, fit_regression, predict_avg, CorpusStats, RegressionFit};
pub use synthgen::{generate, GenSpec, SyntheticCorpus};
