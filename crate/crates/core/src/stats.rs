//! Cluster-size statistics, least-squares trend fitting and workload estimates.

use std::time::Duration;

use crate::cluster::ClusterTable;
use crate::dedup::DuplicateReport;
use crate::error::{Error, Result};

pub const STATS_COLUMNS: [&str; 11] = [
    "FBD",
    "Size",
    "Nb class",
    "Avg.",
    "Min P.",
    "Max P.",
    "Std dev",
    "Min P. Rate",
    "Max P. Rate",
    "Duplicates",
    "Duration deduplication (s)",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub size: usize,
    pub nb_class: usize,
    /// `size / nb_class`.
    pub avg: f64,
    pub min_p: usize,
    pub max_p: usize,
    /// Population standard deviation of bucket sizes.
    pub std_dev: f64,
    pub min_rate: f64,
    pub max_rate: f64,
    pub duplicates: usize,
    pub duration: Duration,
}

pub fn corpus_stats(
    table: &ClusterTable,
    report: &DuplicateReport,
    duration: Duration,
) -> Result<CorpusStats> {
    if table.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let sizes: Vec<usize> = table.buckets().map(|(_, ids)| ids.len()).collect();
    let size = table.size();
    let nb_class = sizes.len();
    let avg = size as f64 / nb_class as f64;
    let var = sizes
        .iter()
        .map(|&c| (c as f64 - avg).powi(2))
        .sum::<f64>()
        / nb_class as f64;
    let min_p = *sizes.iter().min().unwrap_or(&0);
    let max_p = *sizes.iter().max().unwrap_or(&0);
    Ok(CorpusStats {
        size,
        nb_class,
        avg,
        min_p,
        max_p,
        std_dev: var.sqrt(),
        min_rate: min_p as f64 / size as f64,
        max_rate: max_p as f64 / size as f64,
        duplicates: report.duplicate_count(),
        duration,
    })
}

fn percent(rate: f64) -> String {
    format!("{:.4}%", rate * 100.0)
}

impl CorpusStats {
    /// The row's values in [`STATS_COLUMNS`] order.
    pub fn row(&self, name: &str) -> Vec<String> {
        vec![
            name.to_string(),
            self.size.to_string(),
            self.nb_class.to_string(),
            format!("{:.4}", self.avg),
            self.min_p.to_string(),
            self.max_p.to_string(),
            format!("{:.4}", self.std_dev),
            percent(self.min_rate),
            percent(self.max_rate),
            self.duplicates.to_string(),
            format!("{:.4}", self.duration.as_secs_f64()),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares of `y` on `x`.
pub fn fit_regression(points: &[(f64, f64)]) -> Result<RegressionFit> {
    if points.len() < 2 {
        return Err(Error::Degenerate("regression needs at least two points".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 || !sxx.is_finite() {
        return Err(Error::Degenerate("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    Ok(RegressionFit {
        slope,
        intercept: my - slope * mx,
    })
}

pub fn predict_avg(fit: &RegressionFit, n: f64) -> f64 {
    fit.slope * n + fit.intercept
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Workload {
    pub classes: f64,
    pub comparisons_per_class: f64,
    pub comparisons: f64,
    pub wall_ms: f64,
}

/// Expected sweep cost of `n` records clustered `avg` per key.
pub fn estimate_workload(n: f64, avg: f64, ms_per_comparison: f64) -> Result<Workload> {
    // written so NaN inputs are rejected too
    let valid = n >= 1.0 && avg >= 1.0 && ms_per_comparison >= 0.0;
    if !valid {
        return Err(Error::InvalidParams(
            "estimate needs n >= 1, avg >= 1 and a non-negative cost per comparison".into(),
        ));
    }
    let classes = n / avg;
    let comparisons_per_class = avg * (avg - 1.0) / 2.0;
    let comparisons = classes * comparisons_per_class;
    Ok(Workload {
        classes,
        comparisons_per_class,
        comparisons,
        wall_ms: comparisons * ms_per_comparison,
    })
}

/// `1h23'20"` style rendering of a millisecond count.
pub fn format_hms(ms: f64) -> String {
    let total = (ms / 1000.0).round() as u64;
    format!("{}h{:02}'{:02}\"", total / 3600, (total / 60) % 60, total % 60)
}
