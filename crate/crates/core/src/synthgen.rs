//! Seeded synthetic corpora with planted duplicates.
//!
//! Randomness comes from SplitMix64 (Steele, Lea & Flood), spelled out below so
//! any implementation can reproduce a corpus from its seed:
//!
//! ```text
//! state += 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! return z ^ (z >> 31)                    (all arithmetic mod 2^64)
//! ```
//!
//! Derived draws: a unit real is `(next >> 11) * 2^-53`; an integer in
//! `[lo, hi]` is `lo + next % (hi - lo + 1)`; a standard normal is Box–Muller
//! on two unit reals, `sqrt(-2 ln(1 - u1)) * cos(2π u2)`.
//!
//! Generation order: every subject in turn draws its minutia count, then for
//! each minutia rejection-samples `x`, `y` (integers) until it is at least
//! `min_spacing` from all earlier ones (at most 1000 tries), then draws `theta`
//! as `2π·unit` and the type code as an integer in `[0, 1]`. Afterwards
//! duplicate sources are picked by a partial Fisher–Yates shuffle of subject
//! indices, and each duplicate draws its offset `dx`, `dy`, then per minutia a
//! drop decision followed by the two jitter normals.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signature::{Minutia, Signature};

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn range_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        let span = (hi - lo) as u64 + 1;
        lo + (self.next_u64() % span) as i64
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.unit();
        let u2 = self.unit();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (TAU * u2).cos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub subjects: usize,
    pub min_minutiae: usize,
    pub max_minutiae: usize,
    pub width: u32,
    pub height: u32,
    /// Planted duplicates as a share of `subjects`.
    pub dup_fraction: f64,
    /// Standard deviation of per-minutia positional noise, pixels.
    pub jitter: f64,
    /// Largest translation applied to a duplicate, pixels.
    pub global_offset: u32,
    pub drop_prob: f64,
    /// Minimum distance between minutiae of one original print.
    pub min_spacing: f64,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            subjects: 1000,
            min_minutiae: 20,
            max_minutiae: 60,
            width: 350,
            height: 350,
            dup_fraction: 0.0,
            jitter: 0.0,
            global_offset: 40,
            drop_prob: 0.0,
            min_spacing: 15.0,
            seed: 7,
        }
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.min_minutiae == 0 || self.min_minutiae > self.max_minutiae {
            return bad("minutiae range must satisfy 1 <= min <= max");
        }
        if self.width == 0 || self.height == 0 {
            return bad("image extent must be positive");
        }
        if !(0.0..=1.0).contains(&self.dup_fraction) {
            return bad("dup_fraction must lie in [0, 1]");
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return bad("jitter must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.drop_prob) {
            return bad("drop_prob must lie in [0, 1)");
        }
        if !(self.min_spacing >= 0.0 && self.min_spacing.is_finite()) {
            return bad("min_spacing must be finite and non-negative");
        }
        Ok(())
    }

    pub fn duplicate_count(&self) -> usize {
        (self.subjects as f64 * self.dup_fraction).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    /// Originals first, then duplicates.
    pub signatures: Vec<Signature>,
    /// `(duplicate_id, source_id)` pairs.
    pub truth: Vec<(String, String)>,
}

fn subject_id(i: usize) -> String {
    format!("S{i:07}")
}

fn duplicate_id(i: usize) -> String {
    format!("D{i:07}")
}

const MAX_PLACEMENT_TRIES: usize = 1000;

fn original(rng: &mut SplitMix64, spec: &GenSpec, id: String) -> Signature {
    let count = rng.range_inclusive(spec.min_minutiae as i64, spec.max_minutiae as i64) as usize;
    let spacing2 = spec.min_spacing * spec.min_spacing;
    let mut minutiae: Vec<Minutia> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_TRIES {
            let x = rng.range_inclusive(0, i64::from(spec.width) - 1) as u32;
            let y = rng.range_inclusive(0, i64::from(spec.height) - 1) as u32;
            let clear = minutiae.iter().all(|m| {
                let dx = f64::from(m.x) - f64::from(x);
                let dy = f64::from(m.y) - f64::from(y);
                dx * dx + dy * dy >= spacing2
            });
            if clear {
                placed = Some((x, y));
                break;
            }
        }
        // the extent is saturated; keep what fits
        let Some((x, y)) = placed else { break };
        let theta = TAU * rng.unit();
        let type_code = rng.range_inclusive(0, 1) as i32;
        minutiae.push(Minutia::new(x, y, theta, type_code));
    }
    Signature { record_id: id, minutiae }
}

fn perturbed(rng: &mut SplitMix64, spec: &GenSpec, source: &Signature, id: String) -> Signature {
    let x_min = source.minutiae.iter().map(|m| m.x).min().unwrap_or(0);
    let y_min = source.minutiae.iter().map(|m| m.y).min().unwrap_or(0);
    let off = i64::from(spec.global_offset);
    let dx = rng.range_inclusive(-off.min(i64::from(x_min)), off);
    let dy = rng.range_inclusive(-off.min(i64::from(y_min)), off);
    let mut minutiae = Vec::with_capacity(source.minutiae.len());
    for m in &source.minutiae {
        let dropped = rng.unit() < spec.drop_prob;
        let (jx, jy) = if spec.jitter > 0.0 {
            (
                (spec.jitter * rng.standard_normal()).round() as i64,
                (spec.jitter * rng.standard_normal()).round() as i64,
            )
        } else {
            (0, 0)
        };
        if dropped {
            continue;
        }
        let x = (i64::from(m.x) + dx + jx).max(0) as u32;
        let y = (i64::from(m.y) + dy + jy).max(0) as u32;
        minutiae.push(Minutia { x, y, ..*m });
    }
    if minutiae.is_empty() {
        let m = source.minutiae[0];
        minutiae.push(Minutia {
            x: (i64::from(m.x) + dx) as u32,
            y: (i64::from(m.y) + dy) as u32,
            ..m
        });
    }
    Signature { record_id: id, minutiae }
}

pub fn generate(spec: &GenSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);
    let mut signatures: Vec<Signature> = (0..spec.subjects)
        .map(|i| original(&mut rng, spec, subject_id(i)))
        .collect();

    let n_dups = spec.duplicate_count().min(spec.subjects);
    let mut pool: Vec<usize> = (0..spec.subjects).collect();
    for i in 0..n_dups {
        let j = rng.range_inclusive(i as i64, spec.subjects as i64 - 1) as usize;
        pool.swap(i, j);
    }
    let mut truth = Vec::with_capacity(n_dups);
    for (d, &src) in pool[..n_dups].iter().enumerate() {
        let dup = perturbed(&mut rng, spec, &signatures[src], duplicate_id(d));
        truth.push((dup.record_id.clone(), signatures[src].record_id.clone()));
        signatures.push(dup);
    }
    Ok(SyntheticCorpus { signatures, truth })
}

pub fn write_ground_truth(path: &Path, truth: &[(String, String)]) -> Result<()> {
    let mut out = String::new();
    for (dup, src) in truth {
        let _ = writeln!(out, "{dup}\t{src}");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split_once('\t')
                .map(|(d, s)| (d.to_string(), s.trim_end().to_string()))
                .ok_or_else(|| Error::format(path, format!("line {}: expected dup<TAB>source", i + 1)))
        })
        .collect()
}
