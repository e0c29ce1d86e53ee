//! Pairwise signature comparison with minutiae-triplet descriptors.
//!
//! Each minutia is joined with pairs drawn from its `k` nearest neighbours to
//! form triangles. A triangle is described by its sorted side lengths, its
//! interior angles and the orientation of each minutia measured against the
//! direction to the triangle's centroid, all of which survive translation and
//! rotation of the print. Two signatures are compared by greedily pairing
//! compatible triangles, closest first, and the score is the share of the
//! smaller triangle set that found a partner, on a 0–100 scale.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signature::Signature;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchParams {
    /// Shortest admissible triangle side, pixels.
    pub min_edge: f64,
    /// Longest admissible triangle side, pixels.
    pub max_edge: f64,
    pub neighbors_k: usize,
    /// Inclusive acceptance threshold on the 0–100 score.
    pub score_threshold: f64,
    /// Minimum number of paired triangles for a match; 0 disables the gate.
    pub min_matched_descriptors: usize,
    /// Pairing tolerance on each side length, pixels.
    pub side_tolerance: f64,
    /// Pairing tolerance on each angle, radians.
    pub angle_tolerance: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams {
            min_edge: 15.0,
            max_edge: 100.0,
            neighbors_k: 4,
            score_threshold: 90.0,
            min_matched_descriptors: 0,
            side_tolerance: 5.0,
            angle_tolerance: 0.2618,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if !(self.min_edge > 0.0 && self.min_edge < self.max_edge) || !self.max_edge.is_finite() {
            return bad("edge bounds must satisfy 0 < min_edge < max_edge");
        }
        if self.neighbors_k < 2 {
            return bad("neighbors_k must be at least 2");
        }
        if !(0.0..=100.0).contains(&self.score_threshold) {
            return bad("score_threshold must lie in [0, 100]");
        }
        if !(self.side_tolerance >= 0.0 && self.side_tolerance.is_finite())
            || !(self.angle_tolerance >= 0.0 && self.angle_tolerance.is_finite())
        {
            return bad("tolerances must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    pub score: f64,
    pub matched_descriptors: usize,
}

/// Inclusive on the score threshold.
pub fn is_match(r: &MatchResult, p: &MatchParams) -> bool {
    r.score >= p.score_threshold && r.matched_descriptors >= p.min_matched_descriptors
}

/// A triangle of three minutiae in canonical vertex order: vertex `i` faces
/// `sides[i]`, and sides ascend.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    /// Minutia indices in the source signature.
    pub vertices: [usize; 3],
    pub sides: [f64; 3],
    /// Interior angle at each vertex.
    pub angles: [f64; 3],
    /// Minutia direction minus the direction from the minutia to the centroid, in `[0, 2π)`.
    pub orientations: [f64; 3],
}

impl Triplet {
    fn index_set(&self) -> [usize; 3] {
        let mut v = self.vertices;
        v.sort_unstable();
        v
    }
}

fn dist2(a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - b.0).pow(2) + (a.1 - b.1).pow(2)
}

fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn describe(s: &Signature, idx: [usize; 3]) -> Triplet {
    let pt = |i: usize| {
        let m = &s.minutiae[i];
        (f64::from(m.x), f64::from(m.y))
    };
    let p = idx.map(pt);
    let len = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
    let opposite = [len(p[1], p[2]), len(p[0], p[2]), len(p[0], p[1])];

    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        opposite[a]
            .total_cmp(&opposite[b])
            .then(idx[a].cmp(&idx[b]))
    });

    let cx = (p[0].0 + p[1].0 + p[2].0) / 3.0;
    let cy = (p[0].1 + p[1].1 + p[2].1) / 3.0;

    let mut t = Triplet {
        vertices: [0; 3],
        sides: [0.0; 3],
        angles: [0.0; 3],
        orientations: [0.0; 3],
    };
    for (slot, &v) in order.iter().enumerate() {
        let (o1, o2) = ((v + 1) % 3, (v + 2) % 3);
        let u = (p[o1].0 - p[v].0, p[o1].1 - p[v].1);
        let w = (p[o2].0 - p[v].0, p[o2].1 - p[v].1);
        let cross = u.0 * w.1 - u.1 * w.0;
        let dot = u.0 * w.0 + u.1 * w.1;
        // a middle point of three evenly spaced collinear minutiae is the
        // centroid; use the next vertex instead
        let at_centroid = 3.0 * p[v].0 == p[0].0 + p[1].0 + p[2].0
            && 3.0 * p[v].1 == p[0].1 + p[1].1 + p[2].1;
        let to_centroid = if at_centroid {
            let next = order[(slot + 1) % 3];
            (p[next].1 - p[v].1).atan2(p[next].0 - p[v].0)
        } else {
            (cy - p[v].1).atan2(cx - p[v].0)
        };
        t.vertices[slot] = idx[v];
        t.sides[slot] = opposite[v];
        t.angles[slot] = cross.abs().atan2(dot);
        t.orientations[slot] = (s.minutiae[idx[v]].theta - to_centroid).rem_euclid(TAU);
    }
    t
}

/// Triangles over each minutia and pairs of its nearest neighbours, keeping
/// only those whose three sides all fall in `[min_edge, max_edge]`.
pub fn build_triplets(s: &Signature, p: &MatchParams) -> Vec<Triplet> {
    let n = s.minutiae.len();
    if n < 3 {
        return Vec::new();
    }
    let pts: Vec<(i64, i64)> = s
        .minutiae
        .iter()
        .map(|m| (i64::from(m.x), i64::from(m.y)))
        .collect();
    let lo = p.min_edge * p.min_edge;
    let hi = p.max_edge * p.max_edge;
    let edge_ok = |a: usize, b: usize| {
        let d = dist2(pts[a], pts[b]) as f64;
        d >= lo && d <= hi
    };

    let mut seen = BTreeSet::new();
    let mut by_dist: Vec<(i64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        by_dist.clear();
        by_dist.extend((0..n).filter(|&j| j != i).map(|j| (dist2(pts[i], pts[j]), j)));
        by_dist.sort_unstable();
        let near: Vec<usize> = by_dist.iter().take(p.neighbors_k).map(|&(_, j)| j).collect();
        for (a_pos, &a) in near.iter().enumerate() {
            for &b in &near[a_pos + 1..] {
                if edge_ok(i, a) && edge_ok(i, b) && edge_ok(a, b) {
                    let mut key = [i, a, b];
                    key.sort_unstable();
                    seen.insert(key);
                }
            }
        }
    }
    seen.into_iter().map(|key| describe(s, key)).collect()
}

/// Combined normalized feature distance, or `None` when any feature is out of tolerance.
fn pair_distance(a: &Triplet, b: &Triplet, p: &MatchParams) -> Option<f64> {
    let side_tol = p.side_tolerance.max(f64::MIN_POSITIVE);
    let ang_tol = p.angle_tolerance.max(f64::MIN_POSITIVE);
    let mut total = 0.0;
    for i in 0..3 {
        let ds = (a.sides[i] - b.sides[i]).abs();
        let da = (a.angles[i] - b.angles[i]).abs();
        let dor = angle_diff(a.orientations[i], b.orientations[i]);
        if ds > p.side_tolerance || da > p.angle_tolerance || dor > p.angle_tolerance {
            return None;
        }
        total += ds / side_tol + da / ang_tol + dor / ang_tol;
    }
    Some(total)
}

/// Greedy one-to-one pairing of compatible triplets, lowest distance first.
/// Returns the number of pairs formed.
pub fn pair_triplets(ta: &[Triplet], tb: &[Triplet], p: &MatchParams) -> usize {
    if ta.is_empty() || tb.is_empty() {
        return 0;
    }
    // b sorted by shortest side so each a only scans a tolerance window
    let mut b_order: Vec<usize> = (0..tb.len()).collect();
    b_order.sort_by(|&i, &j| tb[i].sides[0].total_cmp(&tb[j].sides[0]));
    let b_first: Vec<f64> = b_order.iter().map(|&i| tb[i].sides[0]).collect();

    struct Candidate {
        dist: f64,
        lo_key: [usize; 3],
        hi_key: [usize; 3],
        a: usize,
        b: usize,
    }
    let mut candidates = Vec::new();
    for (ia, a) in ta.iter().enumerate() {
        let start = b_first.partition_point(|&s| s < a.sides[0] - p.side_tolerance);
        for &ib in &b_order[start..] {
            let b = &tb[ib];
            if b.sides[0] > a.sides[0] + p.side_tolerance {
                break;
            }
            if let Some(dist) = pair_distance(a, b, p) {
                let (ka, kb) = (a.index_set(), b.index_set());
                candidates.push(Candidate {
                    dist,
                    lo_key: ka.min(kb),
                    hi_key: ka.max(kb),
                    a: ia,
                    b: ib,
                });
            }
        }
    }
    // the ordering key is symmetric in (a, b) so swapping the arguments pairs the same way
    candidates.sort_by(|x, y| {
        x.dist
            .total_cmp(&y.dist)
            .then_with(|| x.lo_key.cmp(&y.lo_key))
            .then_with(|| x.hi_key.cmp(&y.hi_key))
    });

    let mut used_a = vec![false; ta.len()];
    let mut used_b = vec![false; tb.len()];
    let mut matched = 0;
    for c in candidates {
        if !used_a[c.a] && !used_b[c.b] {
            used_a[c.a] = true;
            used_b[c.b] = true;
            matched += 1;
        }
    }
    matched
}

/// Sorted squared pairwise distances and sorted type codes; used to compare
/// prints too small to yield any triangle. Unchanged by translation and by
/// rotations that keep minutiae on the pixel lattice.
fn point_shape(s: &Signature) -> (Vec<u64>, Vec<i32>) {
    let m = &s.minutiae;
    let mut d = Vec::with_capacity(m.len() * m.len().saturating_sub(1) / 2);
    for (i, a) in m.iter().enumerate() {
        for b in &m[i + 1..] {
            let dx = i64::from(a.x) - i64::from(b.x);
            let dy = i64::from(a.y) - i64::from(b.y);
            d.push((dx * dx + dy * dy) as u64);
        }
    }
    d.sort_unstable();
    let mut types: Vec<i32> = m.iter().map(|x| x.type_code).collect();
    types.sort_unstable();
    (d, types)
}

fn score_triplet_sets(
    a: &Signature,
    ta: &[Triplet],
    b: &Signature,
    tb: &[Triplet],
    p: &MatchParams,
) -> MatchResult {
    if ta.is_empty() && tb.is_empty() {
        let same = point_shape(a) == point_shape(b);
        return MatchResult {
            score: if same { 100.0 } else { 0.0 },
            matched_descriptors: 0,
        };
    }
    let matched = pair_triplets(ta, tb, p);
    let denom = ta.len().min(tb.len());
    let score = if denom == 0 {
        0.0
    } else {
        100.0 * matched as f64 / denom as f64
    };
    MatchResult {
        score,
        matched_descriptors: matched,
    }
}

/// Scores two signatures on a 0–100 scale.
///
/// Prints with fewer than three minutiae, or whose minutiae never form an
/// admissible triangle, have no descriptors; two such prints score 100 only
/// when they have the same pairwise distances and type codes.
pub fn match_score(a: &Signature, b: &Signature, p: &MatchParams) -> Result<MatchResult> {
    a.ensure_non_empty()?;
    b.ensure_non_empty()?;
    let ta = build_triplets(a, p);
    let tb = build_triplets(b, p);
    Ok(score_triplet_sets(a, &ta, b, &tb, p))
}

/// A pairwise comparison function. Implementations must be deterministic and
/// safe to call from several threads at once.
///
/// `prepare` runs once per signature; its output is reused across every
/// comparison that signature takes part in.
pub trait Matcher: Sync {
    type Prepared: Send + Sync;

    fn params(&self) -> &MatchParams;

    fn prepare(&self, s: &Signature) -> Result<Self::Prepared>;

    fn compare_prepared(
        &self,
        a: &Signature,
        pa: &Self::Prepared,
        b: &Signature,
        pb: &Self::Prepared,
    ) -> Result<MatchResult>;

    fn compare(&self, a: &Signature, b: &Signature) -> Result<MatchResult> {
        let pa = self.prepare(a)?;
        let pb = self.prepare(b)?;
        self.compare_prepared(a, &pa, b, &pb)
    }

    fn accepts(&self, r: &MatchResult) -> bool {
        is_match(r, self.params())
    }
}

/// The built-in triplet matcher.
#[derive(Debug, Clone, Default)]
pub struct TripletMatcher {
    params: MatchParams,
}

impl TripletMatcher {
    pub fn new(params: MatchParams) -> Result<Self> {
        params.validate()?;
        Ok(TripletMatcher { params })
    }
}

impl Matcher for TripletMatcher {
    type Prepared = Vec<Triplet>;

    fn params(&self) -> &MatchParams {
        &self.params
    }

    fn prepare(&self, s: &Signature) -> Result<Vec<Triplet>> {
        s.ensure_non_empty()?;
        Ok(build_triplets(s, &self.params))
    }

    fn compare_prepared(
        &self,
        a: &Signature,
        pa: &Vec<Triplet>,
        b: &Signature,
        pb: &Vec<Triplet>,
    ) -> Result<MatchResult> {
        a.ensure_non_empty()?;
        b.ensure_non_empty()?;
        Ok(score_triplet_sets(a, pa, b, pb, &self.params))
    }
}

impl<M: Matcher + ?Sized> Matcher for &M {
    type Prepared = M::Prepared;

    fn params(&self) -> &MatchParams {
        (**self).params()
    }

    fn prepare(&self, s: &Signature) -> Result<Self::Prepared> {
        (**self).prepare(s)
    }

    fn compare_prepared(
        &self,
        a: &Signature,
        pa: &Self::Prepared,
        b: &Signature,
        pb: &Self::Prepared,
    ) -> Result<MatchResult> {
        (**self).compare_prepared(a, pa, b, pb)
    }
}

/// Wraps a matcher and records every comparison it performs.
pub struct CountingMatcher<M> {
    inner: M,
    calls: AtomicUsize,
    pairs: Mutex<Vec<(String, String)>>,
}

impl<M: Matcher> CountingMatcher<M> {
    pub fn new(inner: M) -> Self {
        CountingMatcher {
            inner,
            calls: AtomicUsize::new(0),
            pairs: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(AtomicOrdering::SeqCst)
    }

    /// Record-id pairs compared so far, in no particular order.
    pub fn pairs(&self) -> Vec<(String, String)> {
        self.pairs.lock().unwrap().clone()
    }

    pub fn reset(&self) {
        self.calls.store(0, AtomicOrdering::SeqCst);
        self.pairs.lock().unwrap().clear();
    }
}

impl<M: Matcher> Matcher for CountingMatcher<M> {
    type Prepared = M::Prepared;

    fn params(&self) -> &MatchParams {
        self.inner.params()
    }

    fn prepare(&self, s: &Signature) -> Result<Self::Prepared> {
        self.inner.prepare(s)
    }

    fn compare_prepared(
        &self,
        a: &Signature,
        pa: &Self::Prepared,
        b: &Signature,
        pb: &Self::Prepared,
    ) -> Result<MatchResult> {
        self.calls.fetch_add(1, AtomicOrdering::SeqCst);
        self.pairs
            .lock()
            .unwrap()
            .push((a.record_id.clone(), b.record_id.clone()));
        self.inner.compare_prepared(a, pa, b, pb)
    }
}

/// Sum of interior angles minus π; used by the triplet invariants.
pub fn angle_sum_error(t: &Triplet) -> f64 {
    (t.angles.iter().sum::<f64>() - PI).abs()
}

pub(crate) fn ordering_by_score_then_id(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::{parse_signature, Minutia};

    const SAMPLE: &str = include_str!("../testdata/sample_signature.txt");

    fn sig(id: &str, pts: &[(u32, u32, f64)]) -> Signature {
        Signature::new(
            id,
            pts.iter().map(|&(x, y, t)| Minutia::new(x, y, t, 1)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn too_few_minutiae_give_no_triplets() {
        let s = sig("A", &[(0, 0, 0.0), (30, 0, 0.0)]);
        assert!(build_triplets(&s, &MatchParams::default()).is_empty());
    }

    #[test]
    fn collinear_middle_point_turns_with_the_print() {
        let a = sig("A", &[(10, 10, 0.4), (40, 10, 1.0), (70, 10, 2.0)]);
        let b = sig("B", &[(10, 10, 0.4 + PI / 2.0), (10, 40, 1.0 + PI / 2.0), (10, 70, 2.0 + PI / 2.0)]);
        let (ta, tb) = (build_triplets(&a, &MatchParams::default()), build_triplets(&b, &MatchParams::default()));
        assert_eq!(ta.len(), 1);
        for i in 0..3 {
            assert!(angle_diff(ta[0].orientations[i], tb[0].orientations[i]) < 1e-12);
        }
        assert_eq!(match_score(&a, &b, &MatchParams::default()).unwrap().score, 100.0);
    }

    #[test]
    fn single_triangle() {
        // 30-40-50 right triangle scaled: sides 30, 40, 50
        let s = sig("A", &[(0, 0, 0.1), (30, 0, 0.2), (0, 40, 0.3)]);
        let t = build_triplets(&s, &MatchParams::default());
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].sides, [30.0, 40.0, 50.0]);
        assert!(angle_sum_error(&t[0]) < 1e-9);
        // vertex facing the hypotenuse carries the right angle
        assert!((t[0].angles[2] - PI / 2.0).abs() < 1e-12);
        assert_eq!(t[0].vertices[2], 0);

        // equilateral-ish at 50 px
        let s = sig("B", &[(0, 0, 0.0), (50, 0, 0.0), (25, 43, 0.0)]);
        assert_eq!(build_triplets(&s, &MatchParams::default()).len(), 1);
    }

    #[test]
    fn long_edges_are_dropped() {
        let s = sig("A", &[(0, 0, 0.0), (200, 0, 0.0), (100, 173, 0.0)]);
        assert!(build_triplets(&s, &MatchParams::default()).is_empty());
    }

    #[test]
    fn triplet_count_bounded_by_neighbours() {
        let pts: Vec<_> = (0..10)
            .flat_map(|i| (0..10).map(move |j| (i * 20, j * 20, 0.0)))
            .collect();
        let s = sig("G", &pts);
        let p = MatchParams::default();
        let t = build_triplets(&s, &p);
        assert!(t.len() <= s.len() * 6);
        for tr in &t {
            for side in tr.sides {
                assert!((p.min_edge..=p.max_edge).contains(&side));
            }
        }
    }

    #[test]
    fn self_match_is_perfect() {
        let s = parse_signature(SAMPLE, "sample").unwrap();
        let r = match_score(&s, &s, &MatchParams::default()).unwrap();
        assert_eq!(r.score, 100.0);
        assert!(r.matched_descriptors > 0);
    }

    #[test]
    fn translation_keeps_perfect_score() {
        let s = parse_signature(SAMPLE, "sample").unwrap();
        let mut t = s.clone();
        for m in &mut t.minutiae {
            m.x += 37;
            m.y -= 11;
        }
        let r = match_score(&s, &t, &MatchParams::default()).unwrap();
        assert_eq!(r.score, 100.0);
    }

    #[test]
    fn tiny_prints_compare_exactly() {
        let a = sig("A", &[(5, 5, 1.0), (9, 7, 2.0)]);
        let mut b = a.clone();
        for m in &mut b.minutiae {
            m.x += 100;
        }
        let p = MatchParams::default();
        assert_eq!(match_score(&a, &b, &p).unwrap().score, 100.0);
        let c = sig("C", &[(5, 5, 1.0), (9, 8, 2.0)]);
        assert_eq!(match_score(&a, &c, &p).unwrap().score, 0.0);
    }

    #[test]
    fn empty_signature_errors() {
        let a = sig("A", &[(5, 5, 1.0)]);
        let e = Signature {
            record_id: "E".into(),
            minutiae: vec![],
        };
        assert!(match_score(&a, &e, &MatchParams::default()).is_err());
    }

    #[test]
    fn threshold_is_inclusive() {
        let p = MatchParams::default();
        let r = |score, matched_descriptors| MatchResult {
            score,
            matched_descriptors,
        };
        assert!(is_match(&r(90.0, 0), &p));
        assert!(!is_match(&r(89.99, 0), &p));
        assert!(is_match(&r(100.0, 5), &p));
        let gated = MatchParams {
            min_matched_descriptors: 6,
            ..p
        };
        assert!(!is_match(&r(100.0, 5), &gated));
    }

    #[test]
    fn params_validation() {
        assert!(MatchParams::default().validate().is_ok());
        let p = MatchParams::default();
        assert!(MatchParams { min_edge: 0.0, ..p }.validate().is_err());
        assert!(MatchParams { max_edge: 10.0, ..p }.validate().is_err());
        assert!(MatchParams { neighbors_k: 1, ..p }.validate().is_err());
        assert!(MatchParams { score_threshold: 101.0, ..p }.validate().is_err());
        assert!(TripletMatcher::new(MatchParams { neighbors_k: 1, ..p }).is_err());
    }

    #[test]
    fn counting_wrapper_logs_pairs() {
        let s = parse_signature(SAMPLE, "sample").unwrap();
        let m = CountingMatcher::new(TripletMatcher::default());
        m.compare(&s, &s).unwrap();
        assert_eq!(m.calls(), 1);
        assert_eq!(m.pairs(), vec![("sample".to_string(), "sample".to_string())]);
        m.reset();
        assert_eq!(m.calls(), 0);
    }
}
