//! Duplicate detection inside index clusters, and the all-pairs reference.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::time::Duration;

use indexmap::IndexMap;
use rayon::prelude::*;

use crate::cluster::ClusterTable;
use crate::error::{Error, Result};
use crate::matcher::Matcher;
use crate::signature::{Signature, SignatureStore};

pub const DEFAULT_ORACLE_CAP: usize = 5_000;

/// Per-key duplicate groups. Each group lists its members in sweep order;
/// the first member is the group representative.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DuplicateReport {
    pub groups_by_key: IndexMap<String, Vec<Vec<String>>>,
    /// Matcher invocations performed by the sweep.
    pub comparisons: u64,
}

impl DuplicateReport {
    pub fn groups(&self) -> impl Iterator<Item = &Vec<String>> {
        self.groups_by_key.values().flatten()
    }

    /// Groups with at least two members.
    pub fn duplicate_groups(&self) -> impl Iterator<Item = &Vec<String>> {
        self.groups().filter(|g| g.len() >= 2)
    }

    pub fn record_count(&self) -> usize {
        self.groups().map(Vec::len).sum()
    }

    /// Records beyond the representative in each duplicate group.
    pub fn duplicate_count(&self) -> usize {
        self.duplicate_groups().map(|g| g.len() - 1).sum()
    }

    /// `key<TAB>representative<TAB>members` lines, one per group, followed by
    /// `#`-prefixed summary lines.
    pub fn to_text(&self, bucket_count: usize, wall: Option<Duration>) -> String {
        self.render(bucket_count, wall, false)
    }

    /// As [`to_text`](Self::to_text) with comma separators; the member list
    /// is quoted.
    pub fn to_csv(&self, bucket_count: usize, wall: Option<Duration>) -> String {
        self.render(bucket_count, wall, true)
    }

    fn render(&self, bucket_count: usize, wall: Option<Duration>, csv: bool) -> String {
        let sep = if csv { "," } else { "\t" };
        let mut out = String::new();
        for (key, groups) in &self.groups_by_key {
            for g in groups {
                let members = g.join(",");
                if csv {
                    let _ = writeln!(out, "{key},{},\"{members}\"", g[0]);
                } else {
                    let _ = writeln!(out, "{key}\t{}\t{members}", g[0]);
                }
            }
        }
        let _ = writeln!(out, "# n{sep}{}", self.record_count());
        let _ = writeln!(out, "# buckets{sep}{bucket_count}");
        let _ = writeln!(out, "# duplicate_groups{sep}{}", self.duplicate_groups().count());
        let _ = writeln!(out, "# comparisons{sep}{}", self.comparisons);
        if let Some(w) = wall {
            let _ = writeln!(out, "# wall_seconds{sep}{:.4}", w.as_secs_f64());
        }
        out
    }
}

fn resolve<'a, S: SignatureStore + ?Sized>(store: &'a S, id: &str) -> Result<&'a Signature> {
    store
        .signature(id)
        .ok_or_else(|| Error::UnknownRecord(id.to_string()))
}

/// Runs the pop-head sweep over one bucket. Returns the groups and the number
/// of comparisons made.
pub fn sweep_bucket<S, M>(ids: &[String], store: &S, matcher: &M) -> Result<(Vec<Vec<String>>, u64)>
where
    S: SignatureStore + ?Sized,
    M: Matcher + ?Sized,
{
    if ids.len() <= 1 {
        return Ok((ids.iter().map(|id| vec![id.clone()]).collect(), 0));
    }
    let mut remaining = Vec::with_capacity(ids.len());
    for id in ids {
        let s = resolve(store, id)?;
        remaining.push((id, s, matcher.prepare(s)?));
    }
    let mut groups = Vec::new();
    let mut comparisons = 0u64;
    while !remaining.is_empty() {
        let (head_id, head, head_prep) = remaining.remove(0);
        let mut group = vec![head_id.clone()];
        let mut rest = Vec::with_capacity(remaining.len());
        for (id, s, prep) in remaining {
            comparisons += 1;
            let r = matcher.compare_prepared(head, &head_prep, s, &prep)?;
            if matcher.accepts(&r) {
                group.push(id.clone());
            } else {
                rest.push((id, s, prep));
            }
        }
        remaining = rest;
        groups.push(group);
    }
    Ok((groups, comparisons))
}

/// Sweeps every bucket of `table`. Buckets run in parallel; the report lists
/// keys in table order regardless of scheduling.
pub fn deduplicate<S, M>(table: &ClusterTable, store: &S, matcher: &M) -> Result<DuplicateReport>
where
    S: SignatureStore + Sync + ?Sized,
    M: Matcher + ?Sized,
{
    let buckets: Vec<(&str, &[String])> = table.buckets().collect();
    let swept = buckets
        .par_iter()
        .map(|&(key, ids)| sweep_bucket(ids, store, matcher).map(|r| (key, r)))
        .collect::<Result<Vec<_>>>()?;
    let mut report = DuplicateReport::default();
    for (key, (groups, n)) in swept {
        report.comparisons += n;
        report.groups_by_key.insert(key.to_string(), groups);
    }
    Ok(report)
}

/// Upper bound on sweep comparisons: Σ c(c−1)/2 over bucket sizes c.
pub fn comparison_count(table: &ClusterTable) -> u64 {
    table
        .buckets()
        .map(|(_, ids)| {
            let c = ids.len() as u64;
            c * c.saturating_sub(1) / 2
        })
        .sum()
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Compares all n(n−1)/2 pairs and returns the connected components of the
/// match graph, each in input order, ordered by first member.
pub fn exhaustive_dedup<M>(signatures: &[Signature], matcher: &M, cap: usize) -> Result<Vec<Vec<String>>>
where
    M: Matcher + ?Sized,
{
    let n = signatures.len();
    if n > cap {
        return Err(Error::CapExceeded { n, cap });
    }
    let prepared = signatures
        .par_iter()
        .map(|s| matcher.prepare(s))
        .collect::<Result<Vec<_>>>()?;
    let edges = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut local = Vec::new();
            for j in i + 1..n {
                let r = matcher.compare_prepared(
                    &signatures[i],
                    &prepared[i],
                    &signatures[j],
                    &prepared[j],
                )?;
                if matcher.accepts(&r) {
                    local.push((i, j));
                }
            }
            Ok(local)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ds = DisjointSet::new(n);
    for (i, j) in edges.into_iter().flatten() {
        ds.union(i, j);
    }
    let mut components: IndexMap<usize, Vec<String>> = IndexMap::new();
    for (i, s) in signatures.iter().enumerate() {
        let root = ds.find(i);
        components
            .entry(root)
            .or_default()
            .push(s.record_id.clone());
    }
    Ok(components.into_values().collect())
}

/// Record pairs placed in the same group, smaller id first.
pub fn grouped_pairs<'a, I>(groups: I) -> BTreeSet<(String, String)>
where
    I: IntoIterator<Item = &'a Vec<String>>,
{
    let mut pairs = BTreeSet::new();
    for g in groups {
        for (i, a) in g.iter().enumerate() {
            for b in &g[i + 1..] {
                let pair = if a <= b {
                    (a.clone(), b.clone())
                } else {
                    (b.clone(), a.clone())
                };
                pairs.insert(pair);
            }
        }
    }
    pairs
}

/// Pairwise agreement between the sweep and the all-pairs components,
/// restricted to pairs of records that share an index key.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OracleAgreement {
    pub shared_key_pairs: u64,
    /// Same group in the sweep, different components in the oracle.
    pub sweep_only: Vec<(String, String)>,
    /// Same oracle component, split by the sweep.
    pub oracle_only: Vec<(String, String)>,
}

impl OracleAgreement {
    pub fn agrees(&self) -> bool {
        self.sweep_only.is_empty() && self.oracle_only.is_empty()
    }
}

pub fn compare_with_oracle(
    table: &ClusterTable,
    report: &DuplicateReport,
    oracle: &[Vec<String>],
) -> OracleAgreement {
    let mut component: HashMap<&str, usize> = HashMap::new();
    for (c, members) in oracle.iter().enumerate() {
        for id in members {
            component.insert(id.as_str(), c);
        }
    }
    let mut group_of: HashMap<&str, (usize, usize)> = HashMap::new();
    for (k, groups) in report.groups_by_key.values().enumerate() {
        for (g, members) in groups.iter().enumerate() {
            for id in members {
                group_of.insert(id.as_str(), (k, g));
            }
        }
    }
    let mut out = OracleAgreement::default();
    for (_, ids) in table.buckets() {
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                out.shared_key_pairs += 1;
                let swept = group_of.get(a.as_str()) == group_of.get(b.as_str());
                let linked = component.get(a.as_str()) == component.get(b.as_str());
                match (swept, linked) {
                    (true, false) => out.sweep_only.push((a.clone(), b.clone())),
                    (false, true) => out.oracle_only.push((a.clone(), b.clone())),
                    _ => {}
                }
            }
        }
    }
    out
}

/// Pairwise precision and recall of detected groups against known clusters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkageQuality {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
}

/// `truth` holds `(duplicate_id, source_id)` links; records linked through a
/// common source count as one cluster. An empty prediction has precision 1,
/// an empty truth has recall 1.
pub fn linkage_quality<'a, I>(groups: I, truth: &[(String, String)]) -> LinkageQuality
where
    I: IntoIterator<Item = &'a Vec<String>>,
{
    let predicted = grouped_pairs(groups);
    let mut clusters: IndexMap<&str, Vec<String>> = IndexMap::new();
    for (dup, src) in truth {
        let c = clusters.entry(src.as_str()).or_insert_with(|| vec![src.clone()]);
        c.push(dup.clone());
    }
    let clusters: Vec<Vec<String>> = clusters.into_values().collect();
    let expected = grouped_pairs(&clusters);
    let tp = predicted.intersection(&expected).count();
    let fp = predicted.len() - tp;
    let fn_ = expected.len() - tp;
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    LinkageQuality {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        precision: ratio(tp, predicted.len()),
        recall: ratio(tp, expected.len()),
    }
}

/// Checks the partition invariants of a report against its table.
pub fn check_partition(table: &ClusterTable, report: &DuplicateReport) -> std::result::Result<(), String> {
    if report.groups_by_key.len() != table.bucket_count() {
        return Err("report and table have different key sets".into());
    }
    for (key, ids) in table.buckets() {
        let groups = report
            .groups_by_key
            .get(key)
            .ok_or_else(|| format!("key {key} missing from report"))?;
        let mut seen = HashSet::new();
        for g in groups {
            if g.is_empty() {
                return Err(format!("empty group under {key}"));
            }
            for id in g {
                if !seen.insert(id.as_str()) {
                    return Err(format!("{id} appears twice under {key}"));
                }
            }
        }
        let bucket: HashSet<&str> = ids.iter().map(String::as_str).collect();
        if seen != bucket {
            return Err(format!("groups under {key} do not partition its bucket"));
        }
    }
    Ok(())
}
