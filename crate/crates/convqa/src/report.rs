//! Human- and machine-readable evaluation outputs.

use std::fmt::Write as _;
use std::path::Path;

use convqa_core::analysis::SplitReport;
use convqa_core::metrics::MetricMean;
use convqa_core::{Metric, ScoreTable};
use serde::Serialize;

use crate::data::Header;
use crate::error::{Error, Result};

/// Means in the column order Rewriting | Retrieval | Generation:
/// ROUGE1-R, MRR, F1, EM, ROUGEL-F1. Undefined means print as `-`; a
/// trailing line lists skipped (missing-truth) counts when there are any.
pub fn means_table(table: &ScoreTable) -> String {
    let mut out = String::new();
    let cols: Vec<(Metric, MetricMean)> = Metric::ALL
        .iter()
        .map(|&m| (m, table.means.get(&m).copied().unwrap_or(MetricMean::over([]))))
        .collect();
    let width = |m: Metric| m.label().len().max(5);
    let header: Vec<String> = cols.iter().map(|(m, _)| format!("{:>w$}", m.label(), w = width(*m))).collect();
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(
        out,
        "|{}|",
        header.iter().map(|h| "-".repeat(h.len() + 2)).collect::<Vec<_>>().join("|")
    );
    let cells: Vec<String> = cols
        .iter()
        .map(|(m, mean)| {
            let v = mean.mean.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
            format!("{v:>w$}", w = width(*m))
        })
        .collect();
    let _ = writeln!(out, "| {} |", cells.join(" | "));
    let skipped: Vec<String> = cols
        .iter()
        .filter(|(_, m)| m.skipped > 0 || m.mean.is_none())
        .map(|(m, mean)| format!("{} n={} skipped={}", m.label(), mean.n, mean.skipped))
        .collect();
    if !skipped.is_empty() {
        let _ = writeln!(out, "missing truth: {}", skipped.join(", "));
    }
    out
}

#[derive(Serialize)]
struct MeansFile<'a> {
    header: &'a Header,
    samples: usize,
    means: Vec<MeanEntry>,
}

#[derive(Serialize)]
struct MeanEntry {
    metric: &'static str,
    label: &'static str,
    mean: Option<f64>,
    n: usize,
    skipped: usize,
    /// Set when no sample carried the metric.
    undefined: bool,
}

pub fn means_json(header: &Header, table: &ScoreTable) -> String {
    let means = Metric::ALL
        .iter()
        .map(|&m| {
            let mean = table.means.get(&m).copied().unwrap_or(MetricMean::over([]));
            MeanEntry {
                metric: m.name(),
                label: m.label(),
                mean: mean.mean,
                n: mean.n,
                skipped: mean.skipped,
                undefined: mean.mean.is_none(),
            }
        })
        .collect();
    let file = MeansFile {
        header,
        samples: table.samples.len(),
        means,
    };
    serde_json::to_string_pretty(&file).expect("serializable") + "\n"
}

#[derive(Serialize)]
struct AnalysisFile<'a> {
    header: &'a Header,
    #[serde(flatten)]
    report: &'a SplitReport,
}

pub fn analysis_json(header: &Header, report: &SplitReport) -> String {
    serde_json::to_string_pretty(&AnalysisFile { header, report }).expect("serializable") + "\n"
}

/// One row per (split, metric, bin). Bin edges print with enough digits to
/// round-trip.
pub fn histograms_csv(report: &SplitReport) -> String {
    let mut out = String::from("split,metric,bin_lo,bin_hi,relative_frequency\n");
    for split in &report.splits {
        for (metric, hist) in &split.histograms {
            for bin in &hist.bins {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    split.split.key(),
                    metric.name(),
                    bin.lo,
                    bin.hi,
                    bin.relative_frequency
                );
            }
        }
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
