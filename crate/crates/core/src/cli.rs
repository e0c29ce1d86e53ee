//! The `gridprint` command line.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 corpus larger than
//! the exhaustive comparison cap.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{render_rows, scaling_run, BenchConfig};
use crate::cluster::{build_table, ClusterTable};
use crate::config::RunConfig;
use crate::dedup::{compare_with_oracle, deduplicate, exhaustive_dedup, linkage_quality};
use crate::error::Error;
use crate::identify::identify;
use crate::matcher::TripletMatcher;
use crate::signature::{load_corpus, read_signature_file, write_corpus_dir, Corpus};
use crate::stats::{corpus_stats, estimate_workload, fit_regression, format_hms, predict_avg, STATS_COLUMNS};
use crate::synthgen::{generate, read_ground_truth, write_ground_truth, GenSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_CAP: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "gridprint",
    version,
    about = "Grid-index clustering, identification and deduplication of minutiae signatures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MatcherKind {
    /// Minutiae-triplet descriptor matcher
    Triplet,
}

/// Shared parameters. Unset flags fall back to the config file, then to the
/// built-in defaults shown.
#[derive(Debug, Clone, Args)]
struct Common {
    /// TOML run-config file
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Size of the square matrix [default: 5]
    #[arg(long, value_name = "N")]
    grid_n: Option<u32>,
    /// Minimum length between two minutiae, pixels [default: 15]
    #[arg(long, value_name = "PX")]
    min_edge: Option<f64>,
    /// Maximum length between two minutiae, pixels [default: 100]
    #[arg(long, value_name = "PX")]
    max_edge: Option<f64>,
    /// Number of closest neighbors of a minutia [default: 4]
    #[arg(long, value_name = "K")]
    neighbors: Option<usize>,
    /// Matching score threshold, 0-100, inclusive [default: 90]
    #[arg(long, value_name = "SCORE")]
    threshold: Option<f64>,
    /// Number of matched descriptors required [default: 0]
    #[arg(long, value_name = "COUNT")]
    min_matched: Option<usize>,
    /// Comparison method
    #[arg(long, value_enum, default_value_t = MatcherKind::Triplet)]
    matcher: MatcherKind,
    /// Triplet side-length pairing tolerance, pixels [default: 5]
    #[arg(long, value_name = "PX")]
    side_tol: Option<f64>,
    /// Triplet angle pairing tolerance, radians [default: 0.2618]
    #[arg(long, value_name = "RAD")]
    angle_tol: Option<f64>,
    /// Worker threads [default: all cores]
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Emit tabular output as CSV
    #[arg(long)]
    csv: bool,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.grid_n {
            cfg.grid_n = v;
        }
        let m = &mut cfg.matcher;
        if let Some(v) = self.min_edge {
            m.min_edge = v;
        }
        if let Some(v) = self.max_edge {
            m.max_edge = v;
        }
        if let Some(v) = self.neighbors {
            m.neighbors_k = v;
        }
        if let Some(v) = self.threshold {
            m.score_threshold = v;
        }
        if let Some(v) = self.min_matched {
            m.min_matched_descriptors = v;
        }
        if let Some(v) = self.side_tol {
            m.side_tolerance = v;
        }
        if let Some(v) = self.angle_tol {
            m.angle_tolerance = v;
        }
        if self.jobs.is_some() {
            cfg.jobs = self.jobs;
        }
        cfg.csv |= self.csv;
        match self.matcher {
            MatcherKind::Triplet => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Index a corpus and write the cluster table
    Index {
        /// Corpus directory or manifest
        #[arg(long)]
        corpus: PathBuf,
        /// Table file to write
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Identify a query signature against a cluster table
    Identify {
        #[arg(long)]
        query: PathBuf,
        /// Prebuilt table; built from the corpus when omitted
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Deduplicate a corpus cluster by cluster
    Dedup {
        #[arg(long)]
        corpus: PathBuf,
        /// Write the report here instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also run the all-pairs comparison and report agreement on shared-key pairs
        #[arg(long)]
        oracle: bool,
        /// Ground-truth file (dup_id<TAB>source_id) to score the result against
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Maximum corpus size for --oracle
        #[arg(long, value_name = "N")]
        oracle_cap: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Group a corpus by comparing every pair (small corpora only)
    Oracle {
        #[arg(long)]
        corpus: PathBuf,
        /// Maximum corpus size [default: 5000]
        #[arg(long, value_name = "N")]
        cap: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Cluster statistics of a corpus, one result-table row
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        /// Row label
        #[arg(long, default_value = "corpus")]
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// Least-squares fit of average cluster size against corpus size
    Regress {
        /// Lines of "size<SEP>avg"; SEP is a tab, ';' or ','
        #[arg(long)]
        input: PathBuf,
        /// Corpus sizes to extrapolate to, comma separated
        #[arg(long, value_delimiter = ',')]
        predict: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate deduplication workload for a corpus size
    Estimate {
        #[arg(long)]
        n: f64,
        /// Average records per cluster
        #[arg(long)]
        avg: f64,
        #[arg(long, default_value_t = 1.0)]
        ms_per_cmp: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic corpus with planted duplicates
    Generate {
        /// Corpus directory to create
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth file [default: <out>.truth.tsv]
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Time index, dedup and identify on synthetic corpora of several sizes
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "1000,10000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 100)]
        queries: usize,
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1000)]
    subjects: usize,
    /// Planted duplicates as a fraction of subjects
    #[arg(long, default_value_t = 0.0)]
    dup: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Positional noise of duplicates (standard deviation, pixels)
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// Largest translation of duplicates, pixels
    #[arg(long, default_value_t = 40)]
    offset: u32,
    /// Per-minutia drop probability of duplicates
    #[arg(long, default_value_t = 0.0)]
    drop: f64,
    #[arg(long, default_value_t = 20)]
    min_minutiae: usize,
    #[arg(long, default_value_t = 60)]
    max_minutiae: usize,
    /// Image width and height, pixels
    #[arg(long, default_value_t = 350)]
    extent: u32,
}

impl GenArgs {
    fn spec(&self, min_spacing: f64) -> GenSpec {
        GenSpec {
            subjects: self.subjects,
            min_minutiae: self.min_minutiae,
            max_minutiae: self.max_minutiae,
            width: self.extent,
            height: self.extent,
            dup_fraction: self.dup,
            jitter: self.jitter,
            global_offset: self.offset,
            drop_prob: self.drop,
            min_spacing,
            seed: self.seed,
        }
    }
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Index { common, .. }
        | Command::Identify { common, .. }
        | Command::Dedup { common, .. }
        | Command::Oracle { common, .. }
        | Command::Stats { common, .. }
        | Command::Regress { common, .. }
        | Command::Estimate { common, .. }
        | Command::Generate { common, .. }
        | Command::Bench { common, .. } => common,
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::CapExceeded { .. } => EXIT_CAP,
        Error::InvalidParams(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn load_nonempty(path: &Path) -> Result<Corpus, Error> {
    let corpus = load_corpus(path)?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(corpus)
}

fn table_text(header: &[&str], rows: &[Vec<String>], csv: bool) -> String {
    let sep = if csv { "," } else { "\t" };
    let mut out = header.join(sep);
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(sep));
        out.push('\n');
    }
    out
}

/// Runs the CLI with explicit output streams and returns the exit code.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(rendered.as_bytes());
            } else {
                let _ = out.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let cfg = match common(&cli.command).resolve() {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(&e);
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.jobs {
        pool = pool.num_threads(j);
    }
    let result = match pool.build() {
        Ok(pool) => pool.install(|| execute(cli.command, &cfg, out, err)),
        Err(e) => Err(Error::InvalidParams(e.to_string())),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point for the binary.
pub fn main_exit() -> i32 {
    run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr())
}

fn execute(cmd: Command, cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Error> {
    let grid = cfg.grid()?;
    let matcher = TripletMatcher::new(cfg.matcher)?;
    match cmd {
        Command::Index { corpus, out: path, .. } => {
            let corpus = load_nonempty(&corpus)?;
            let table = build_table(corpus.signatures(), grid)?;
            table.save(&path)?;
            writeln!(
                err,
                "indexed {} records into {} clusters",
                table.size(),
                table.bucket_count()
            )
            .map_err(io_err)?;
        }
        Command::Identify {
            query,
            table,
            corpus,
            ..
        } => {
            let stem = query
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("query")
                .to_string();
            let q = read_signature_file(&query, &stem)?;
            let corpus = load_corpus(&corpus)?;
            let table = match table {
                Some(p) => ClusterTable::load_file(&p)?,
                None => build_table(corpus.signatures(), grid)?,
            };
            let r = identify(&q, &table, &corpus, grid, &matcher)?;
            let sep = if cfg.csv { "," } else { "\t" };
            for c in &r.candidates {
                writeln!(
                    out,
                    "{}{sep}{:.4}{sep}{}",
                    c.record_id,
                    c.score,
                    if c.is_match { "yes" } else { "no" }
                )
                .map_err(io_err)?;
            }
            writeln!(out, "# penetration{sep}{:.6}", r.penetration).map_err(io_err)?;
        }
        Command::Dedup {
            corpus,
            out: report_path,
            oracle,
            truth,
            oracle_cap,
            ..
        } => {
            let corpus = load_nonempty(&corpus)?;
            let start = Instant::now();
            let table = build_table(corpus.signatures(), grid)?;
            let report = deduplicate(&table, &corpus, &matcher)?;
            let wall = start.elapsed();
            let sep = if cfg.csv { "," } else { "\t" };
            let mut text = if cfg.csv {
                report.to_csv(table.bucket_count(), Some(wall))
            } else {
                report.to_text(table.bucket_count(), Some(wall))
            };
            if let Some(t) = truth {
                let truth = read_ground_truth(&t)?;
                let q = linkage_quality(report.groups(), &truth);
                text.push_str(&format!(
                    "# precision{sep}{:.4}\n# recall{sep}{:.4}\n",
                    q.precision, q.recall
                ));
            }
            if oracle {
                let cap = oracle_cap.unwrap_or(cfg.oracle_cap);
                let groups = exhaustive_dedup(corpus.signatures(), &matcher, cap)?;
                let a = compare_with_oracle(&table, &report, &groups);
                text.push_str(&format!(
                    "# oracle_shared_key_pairs{sep}{}\n# oracle_agrees{sep}{}\n# oracle_sweep_only{sep}{}\n# oracle_only{sep}{}\n",
                    a.shared_key_pairs,
                    a.agrees(),
                    a.sweep_only.len(),
                    a.oracle_only.len()
                ));
            }
            match report_path {
                Some(p) => fs::write(&p, &text).map_err(|e| Error::io(&p, e))?,
                None => out.write_all(text.as_bytes()).map_err(io_err)?,
            }
            let stats = corpus_stats(&table, &report, wall)?;
            writeln!(
                err,
                "{} records, {} clusters, {} duplicate groups, {} comparisons, {:.3} s",
                stats.size,
                stats.nb_class,
                report.duplicate_groups().count(),
                report.comparisons,
                wall.as_secs_f64()
            )
            .map_err(io_err)?;
        }
        Command::Oracle { corpus, cap, .. } => {
            let corpus = load_nonempty(&corpus)?;
            let groups = exhaustive_dedup(corpus.signatures(), &matcher, cap.unwrap_or(cfg.oracle_cap))?;
            let sep = if cfg.csv { "," } else { "\t" };
            for g in &groups {
                if cfg.csv {
                    writeln!(out, "{},\"{}\"", g[0], g.join(",")).map_err(io_err)?;
                } else {
                    writeln!(out, "{}\t{}", g[0], g.join(",")).map_err(io_err)?;
                }
            }
            let dup_groups = groups.iter().filter(|g| g.len() > 1).count();
            writeln!(out, "# n{sep}{}\n# duplicate_groups{sep}{dup_groups}", corpus.len()).map_err(io_err)?;
        }
        Command::Stats { corpus, name, .. } => {
            let corpus = load_nonempty(&corpus)?;
            let start = Instant::now();
            let table = build_table(corpus.signatures(), grid)?;
            let report = deduplicate(&table, &corpus, &matcher)?;
            let stats = corpus_stats(&table, &report, start.elapsed())?;
            out.write_all(table_text(&STATS_COLUMNS, &[stats.row(&name)], cfg.csv).as_bytes())
                .map_err(io_err)?;
        }
        Command::Regress { input, predict, .. } => {
            let points = read_points(&input)?;
            let fit = fit_regression(&points)?;
            let sep = if cfg.csv { "," } else { "\t" };
            writeln!(out, "slope{sep}{:e}", fit.slope).map_err(io_err)?;
            writeln!(out, "intercept{sep}{:.8}", fit.intercept).map_err(io_err)?;
            for x in predict {
                writeln!(out, "{x}{sep}{:.9}", predict_avg(&fit, x)).map_err(io_err)?;
            }
        }
        Command::Estimate { n, avg, ms_per_cmp, .. } => {
            let w = estimate_workload(n, avg, ms_per_cmp)?;
            let sep = if cfg.csv { "," } else { "\t" };
            writeln!(out, "classes{sep}{}", w.classes).map_err(io_err)?;
            writeln!(out, "comparisons_per_class{sep}{}", w.comparisons_per_class).map_err(io_err)?;
            writeln!(out, "comparisons{sep}{}", w.comparisons).map_err(io_err)?;
            writeln!(out, "wall_ms{sep}{}", w.wall_ms).map_err(io_err)?;
            writeln!(out, "wall{sep}{}", format_hms(w.wall_ms)).map_err(io_err)?;
        }
        Command::Generate { out: dir, truth, gen, .. } => {
            let corpus = generate(&gen.spec(cfg.matcher.min_edge))?;
            write_corpus_dir(&dir, &corpus.signatures)?;
            let truth_path = truth.unwrap_or_else(|| {
                let mut name = dir.file_name().unwrap_or_default().to_os_string();
                name.push(".truth.tsv");
                dir.with_file_name(name)
            });
            write_ground_truth(&truth_path, &corpus.truth)?;
            writeln!(
                err,
                "wrote {} signatures ({} planted duplicates) to {}; ground truth in {}",
                corpus.signatures.len(),
                corpus.truth.len(),
                dir.display(),
                truth_path.display()
            )
            .map_err(io_err)?;
        }
        Command::Bench {
            sizes,
            reps,
            queries,
            gen,
            ..
        } => {
            let bench = BenchConfig {
                sizes,
                reps,
                queries,
                spec: gen.spec(cfg.matcher.min_edge),
                grid,
            };
            let rows = scaling_run(&bench, &matcher)?;
            out.write_all(render_rows(&rows, if cfg.csv { "," } else { "\t" }).as_bytes())
                .map_err(io_err)?;
        }
    }
    Ok(())
}

fn read_points(path: &Path) -> Result<Vec<(f64, f64)>, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        // with a tab or ';' separator a ',' is a decimal comma
        let fields: Vec<String> = if line.contains('\t') || line.contains(';') {
            line.split(['\t', ';']).map(|f| f.trim().replace(',', ".")).collect()
        } else {
            line.split(',').map(|f| f.trim().to_string()).collect()
        };
        let parsed = match fields.as_slice() {
            [x, y] => x.parse::<f64>().ok().zip(y.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some(p) => points.push(p),
            // a header line
            None if points.is_empty() && i == 0 => {}
            None => {
                return Err(Error::format(path, format!("line {}: expected two numbers", i + 1)))
            }
        }
    }
    Ok(points)
}
