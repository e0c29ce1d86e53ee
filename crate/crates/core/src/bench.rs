//! Scaling measurements over synthetic corpora of growing size.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::cluster::{build_table, ClusterTable};
use crate::dedup::deduplicate;
use crate::error::{Error, Result};
use crate::grid::GridParams;
use crate::identify::identify;
use crate::matcher::Matcher;
use crate::signature::Corpus;
use crate::stats::{corpus_stats, CorpusStats};
use crate::synthgen::{generate, GenSpec};

/// Median of a non-empty sample; the mean of the two middle values for even sizes.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    }
}

pub fn median_duration(samples: &[Duration]) -> Duration {
    let mut secs: Vec<f64> = samples.iter().map(Duration::as_secs_f64).collect();
    Duration::from_secs_f64(median(&mut secs))
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub reps: usize,
    /// Identification queries per size.
    pub queries: usize,
    pub spec: GenSpec,
    pub grid: GridParams,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![1000, 10_000],
            reps: 3,
            queries: 100,
            spec: GenSpec::default(),
            grid: GridParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScalingRow {
    pub size: usize,
    pub stats: CorpusStats,
    pub comparisons: u64,
    pub generate: Duration,
    pub index: Duration,
    pub dedup: Duration,
    pub identify_median: Duration,
}

pub const SCALING_COLUMNS: [&str; 12] = [
    "size",
    "nb_class",
    "avg",
    "max_p",
    "max_rate",
    "std_dev",
    "duplicates",
    "comparisons",
    "generate_s",
    "index_s",
    "dedup_s",
    "identify_median_us",
];

impl ScalingRow {
    pub fn fields(&self) -> Vec<String> {
        vec![
            self.size.to_string(),
            self.stats.nb_class.to_string(),
            format!("{:.4}", self.stats.avg),
            self.stats.max_p.to_string(),
            format!("{:.6}", self.stats.max_rate),
            format!("{:.4}", self.stats.std_dev),
            self.stats.duplicates.to_string(),
            self.comparisons.to_string(),
            format!("{:.4}", self.generate.as_secs_f64()),
            format!("{:.4}", self.index.as_secs_f64()),
            format!("{:.4}", self.dedup.as_secs_f64()),
            format!("{:.2}", self.identify_median.as_secs_f64() * 1e6),
        ]
    }
}

pub fn render_rows(rows: &[ScalingRow], separator: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", SCALING_COLUMNS.join(separator));
    for r in rows {
        let _ = writeln!(out, "{}", r.fields().join(separator));
    }
    out
}

/// Derives a per-size seed so different sizes draw unrelated corpora.
pub fn size_seed(seed: u64, size: usize) -> u64 {
    seed ^ (size as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Generates a corpus of roughly `size` records (originals plus planted
/// duplicates) from `base`.
pub fn corpus_of_size(base: &GenSpec, size: usize) -> Result<Corpus> {
    let subjects = (size as f64 / (1.0 + base.dup_fraction)).round() as usize;
    let spec = GenSpec {
        subjects,
        seed: size_seed(base.seed, size),
        ..base.clone()
    };
    Corpus::new(generate(&spec)?.signatures)
}

/// Times one identification per query, the queries spread evenly over the corpus.
pub fn identify_latencies<M: Matcher + ?Sized>(
    corpus: &Corpus,
    table: &ClusterTable,
    grid: GridParams,
    matcher: &M,
    queries: usize,
) -> Result<Vec<Duration>> {
    let n = corpus.len();
    if n == 0 {
        return Err(Error::EmptyCorpus);
    }
    let step = (n / queries.max(1)).max(1);
    let mut out = Vec::with_capacity(queries);
    for q in corpus.signatures().iter().step_by(step).take(queries) {
        let start = Instant::now();
        let r = identify(q, table, corpus, grid, matcher)?;
        out.push(start.elapsed());
        std::hint::black_box(r);
    }
    Ok(out)
}

/// For each size: generate, then `reps` times index and deduplicate, then time
/// the identification queries. Phases run one after another; the reported
/// times are medians over repetitions.
pub fn scaling_run<M: Matcher + ?Sized>(cfg: &BenchConfig, matcher: &M) -> Result<Vec<ScalingRow>> {
    if cfg.sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParams("benchmark sizes must be ascending".into()));
    }
    if cfg.reps == 0 {
        return Err(Error::InvalidParams("at least one repetition is required".into()));
    }
    let mut rows = Vec::with_capacity(cfg.sizes.len());
    for &size in &cfg.sizes {
        let start = Instant::now();
        let corpus = corpus_of_size(&cfg.spec, size)?;
        let generate_time = start.elapsed();
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }

        let mut index_times = Vec::with_capacity(cfg.reps);
        let mut dedup_times = Vec::with_capacity(cfg.reps);
        let mut last = None;
        for _ in 0..cfg.reps {
            let t = Instant::now();
            let table = build_table(corpus.signatures(), cfg.grid)?;
            index_times.push(t.elapsed());
            let t = Instant::now();
            let report = deduplicate(&table, &corpus, matcher)?;
            dedup_times.push(t.elapsed());
            last = Some((table, report));
        }
        let (table, report) = last.expect("reps >= 1");
        let dedup = median_duration(&dedup_times);
        let stats = corpus_stats(&table, &report, dedup)?;
        let latencies = identify_latencies(&corpus, &table, cfg.grid, matcher, cfg.queries)?;
        rows.push(ScalingRow {
            size: corpus.len(),
            stats,
            comparisons: report.comparisons,
            generate: generate_time,
            index: median_duration(&index_times),
            dedup,
            identify_median: median_duration(&latencies),
        });
    }
    Ok(rows)
}
