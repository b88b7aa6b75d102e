//! Success/failure split analysis over per-sample scores.
//!
//! Samples are labeled by whether rewriting succeeded (`rouge1_r >=` the
//! rewrite threshold, by default the third quartile of the run's own
//! ROUGE1-R scores) and whether retrieval succeeded (`mrr >= 1/4` by
//! default). Each of the four resulting splits, and the two rewrite-only
//! splits, gets per-metric means and relative-frequency histograms.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::AnalysisError;
use crate::metrics::{Metric, MetricMean, SampleScores};

/// Name of the quantile estimator, recorded in every report.
pub const QUANTILE_METHOD: &str = "linear interpolation at p*(n-1) over sorted values";

pub const DEFAULT_RETRIEVAL_THRESHOLD: f64 = 0.25;
pub const DEFAULT_BIN_WIDTH: f64 = 0.1;

/// Quantile at probability `p` in `[0, 1]`: linear interpolation between the
/// sorted values at zero-based position `p * (n - 1)`.
pub fn quantile(values: &[f64], p: f64) -> Result<f64, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// First, second or third quartile.
pub fn quartile(values: &[f64], q: u8) -> Result<f64, AnalysisError> {
    if !(1..=3).contains(&q) {
        return Err(AnalysisError::BadQuartile(q));
    }
    quantile(values, f64::from(q) / 4.0)
}

/// One cell of the rewrite × retrieval success table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// Rewriting and retrieval both succeeded.
    PassPass,
    /// Rewriting succeeded, retrieval failed.
    PassFail,
    /// Rewriting failed, retrieval succeeded.
    FailPass,
    FailFail,
    /// Rewriting succeeded, any retrieval outcome.
    RewritePass,
    /// Rewriting failed, any retrieval outcome.
    RewriteFail,
}

impl Split {
    /// The four cells that partition the classified samples.
    pub const CELLS: [Split; 4] = [Split::PassPass, Split::PassFail, Split::FailPass, Split::FailFail];

    pub fn key(self) -> &'static str {
        match self {
            Split::PassPass => "pass_pass",
            Split::PassFail => "pass_fail",
            Split::FailPass => "fail_pass",
            Split::FailFail => "fail_fail",
            Split::RewritePass => "rewrite_pass",
            Split::RewriteFail => "rewrite_fail",
        }
    }

    /// Check-mark label, rewriting first.
    pub fn marks(self) -> &'static str {
        match self {
            Split::PassPass => "✓✓",
            Split::PassFail => "✓✗",
            Split::FailPass => "✗✓",
            Split::FailFail => "✗✗",
            Split::RewritePass => "✓·",
            Split::RewriteFail => "✗·",
        }
    }

    fn contains(self, cell: Split) -> bool {
        match self {
            Split::RewritePass => matches!(cell, Split::PassPass | Split::PassFail),
            Split::RewriteFail => matches!(cell, Split::FailPass | Split::FailFail),
            other => other == cell,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Labels a sample; `None` when it lacks a rewrite or retrieval score.
/// Both thresholds are inclusive.
pub fn classify(sample: &SampleScores, rewrite_threshold: f64, retrieval_threshold: f64) -> Option<Split> {
    let rewrite_ok = sample.rouge1_r? >= rewrite_threshold;
    let retrieval_ok = sample.mrr? >= retrieval_threshold;
    Some(match (rewrite_ok, retrieval_ok) {
        (true, true) => Split::PassPass,
        (true, false) => Split::PassFail,
        (false, true) => Split::FailPass,
        (false, false) => Split::FailFail,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub relative_frequency: f64,
}

/// Relative-frequency histogram over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub n: usize,
    /// Set when there were no values; every frequency is then zero.
    pub empty: bool,
    pub bins: Vec<Bin>,
}

fn bin_count(bin_width: f64) -> Result<usize, AnalysisError> {
    if !(bin_width.is_finite() && bin_width > 0.0 && bin_width <= 1.0) {
        return Err(AnalysisError::BadBinWidth);
    }
    let count = (1.0 / bin_width + 0.5) as usize;
    if count == 0 || (count as f64 * bin_width - 1.0).abs() > 1e-9 {
        return Err(AnalysisError::BadBinWidth);
    }
    Ok(count)
}

/// Bins `values` into right-open bins `[i/m, (i+1)/m)` with the last bin
/// closed at 1. Values outside `[0, 1]` are clamped into the end bins.
pub fn histogram(values: &[f64], bin_width: f64) -> Result<Histogram, AnalysisError> {
    let m = bin_count(bin_width)?;
    let edge = |i: usize| i as f64 / m as f64;
    let mut counts = alloc::vec![0usize; m];
    for &v in values {
        let mut i = if v <= 0.0 {
            0
        } else {
            ((v * m as f64) as usize).min(m - 1)
        };
        // Edge corrections so membership follows the stored bin bounds.
        while i + 1 < m && v >= edge(i + 1) {
            i += 1;
        }
        while i > 0 && v < edge(i) {
            i -= 1;
        }
        counts[i] += 1;
    }
    let n = values.len();
    let bins = counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| Bin {
            lo: edge(i),
            hi: edge(i + 1),
            count,
            relative_frequency: if n == 0 { 0.0 } else { count as f64 / n as f64 },
        })
        .collect();
    Ok(Histogram {
        n,
        empty: n == 0,
        bins,
    })
}

/// A half-bounded or bounded interval of one metric's values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueRange {
    pub metric: Metric,
    pub min: Option<f64>,
    pub min_inclusive: bool,
    pub max: Option<f64>,
    pub max_inclusive: bool,
}

impl ValueRange {
    pub fn greater_than(metric: Metric, x: f64) -> Self {
        Self {
            metric,
            min: Some(x),
            min_inclusive: false,
            max: None,
            max_inclusive: false,
        }
    }

    pub fn less_than(metric: Metric, x: f64) -> Self {
        Self {
            metric,
            min: None,
            min_inclusive: false,
            max: Some(x),
            max_inclusive: false,
        }
    }

    pub fn closed(metric: Metric, lo: f64, hi: f64) -> Self {
        Self {
            metric,
            min: Some(lo),
            min_inclusive: true,
            max: Some(hi),
            max_inclusive: true,
        }
    }

    /// The default comparisons: `mrr > 0`, `0.3 <= f1 <= 0.8`, `f1 < 0.1`.
    pub fn defaults() -> Vec<Self> {
        alloc::vec![
            Self::greater_than(Metric::Mrr, 0.0),
            Self::closed(Metric::F1, 0.3, 0.8),
            Self::less_than(Metric::F1, 0.1),
        ]
    }

    pub fn contains(&self, v: f64) -> bool {
        let above = match self.min {
            Some(lo) if self.min_inclusive => v >= lo,
            Some(lo) => v > lo,
            None => true,
        };
        let below = match self.max {
            Some(hi) if self.max_inclusive => v <= hi,
            Some(hi) => v < hi,
            None => true,
        };
        above && below
    }

    pub fn describe(&self) -> String {
        let name = self.metric.name();
        match (self.min, self.max) {
            (Some(lo), Some(hi)) => format!(
                "{lo} {} {name} {} {hi}",
                if self.min_inclusive { "<=" } else { "<" },
                if self.max_inclusive { "<=" } else { "<" },
            ),
            (Some(lo), None) => format!("{name} {} {lo}", if self.min_inclusive { ">=" } else { ">" }),
            (None, Some(hi)) => format!("{name} {} {hi}", if self.max_inclusive { "<=" } else { "<" }),
            (None, None) => format!("any {name}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioFlag {
    /// Numerator frequency positive, denominator zero.
    Infinite,
    /// Both frequencies zero.
    Undefined,
    /// One of the splits has no value for the metric.
    EmptySplit,
}

/// How much more often values fall in `range` in one split than in another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioStatement {
    pub statement: String,
    pub range: ValueRange,
    pub numerator: Split,
    pub denominator: Split,
    pub numerator_frequency: Option<f64>,
    pub denominator_frequency: Option<f64>,
    pub ratio: Option<f64>,
    pub flag: Option<RatioFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub split: Split,
    pub label: String,
    pub n: usize,
    pub means: BTreeMap<Metric, MetricMean>,
    pub histograms: BTreeMap<Metric, Histogram>,
    /// Per-metric values, kept for range queries; not serialized.
    #[serde(skip)]
    values: BTreeMap<Metric, Vec<f64>>,
}

impl SplitSummary {
    fn build(split: Split, members: &[&SampleScores], bin_width: f64) -> Result<Self, AnalysisError> {
        let mut values = BTreeMap::new();
        let mut means = BTreeMap::new();
        let mut histograms = BTreeMap::new();
        for m in Metric::ALL {
            let present: Vec<f64> = members.iter().filter_map(|s| s.get(m)).collect();
            means.insert(m, MetricMean::over(members.iter().map(|s| s.get(m))));
            histograms.insert(m, histogram(&present, bin_width)?);
            values.insert(m, present);
        }
        Ok(Self {
            split,
            label: String::from(split.marks()),
            n: members.len(),
            means,
            histograms,
            values,
        })
    }

    /// Share of this split's values of `range.metric` that fall in `range`.
    pub fn frequency(&self, range: &ValueRange) -> Option<f64> {
        let vals = self.values.get(&range.metric)?;
        if vals.is_empty() {
            return None;
        }
        let hits = vals.iter().filter(|&&v| range.contains(v)).count();
        Some(hits as f64 / vals.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Fixed rewrite threshold; the third quartile is used when `None`.
    pub rewrite_threshold: Option<f64>,
    pub retrieval_threshold: f64,
    pub bin_width: f64,
    pub ranges: Vec<ValueRange>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            rewrite_threshold: None,
            retrieval_threshold: DEFAULT_RETRIEVAL_THRESHOLD,
            bin_width: DEFAULT_BIN_WIDTH,
            ranges: ValueRange::defaults(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub quantile_method: String,
    pub rewrite_threshold: f64,
    /// `"q3"` or `"fixed"`.
    pub rewrite_threshold_source: String,
    pub retrieval_threshold: f64,
    pub bin_width: f64,
    pub total: usize,
    pub classified: usize,
    /// Samples without a rewrite or retrieval score.
    pub excluded: usize,
    /// The four partition cells followed by the two rewrite-only splits.
    pub splits: Vec<SplitSummary>,
    pub ratios: Vec<RatioStatement>,
}

impl SplitReport {
    pub fn split(&self, split: Split) -> Option<&SplitSummary> {
        self.splits.iter().find(|s| s.split == split)
    }
}

/// Runs the split analysis over a score table.
pub fn analyze(samples: &[SampleScores], config: &AnalysisConfig) -> Result<SplitReport, AnalysisError> {
    let classifiable: Vec<&SampleScores> = samples
        .iter()
        .filter(|s| s.rouge1_r.is_some() && s.mrr.is_some())
        .collect();
    if classifiable.is_empty() {
        return Err(AnalysisError::NothingToClassify);
    }
    let (rewrite_threshold, source) = match config.rewrite_threshold {
        Some(t) => (t, "fixed"),
        None => {
            let rouge: Vec<f64> = classifiable.iter().filter_map(|s| s.rouge1_r).collect();
            (quartile(&rouge, 3)?, "q3")
        }
    };

    let labeled: Vec<(Split, &SampleScores)> = classifiable
        .iter()
        .filter_map(|s| classify(s, rewrite_threshold, config.retrieval_threshold).map(|l| (l, *s)))
        .collect();

    let mut splits = Vec::with_capacity(6);
    for split in Split::CELLS.into_iter().chain([Split::RewritePass, Split::RewriteFail]) {
        let members: Vec<&SampleScores> = labeled
            .iter()
            .filter(|(cell, _)| split.contains(*cell))
            .map(|(_, s)| *s)
            .collect();
        splits.push(SplitSummary::build(split, &members, config.bin_width)?);
    }

    let mut report = SplitReport {
        quantile_method: String::from(QUANTILE_METHOD),
        rewrite_threshold,
        rewrite_threshold_source: String::from(source),
        retrieval_threshold: config.retrieval_threshold,
        bin_width: config.bin_width,
        total: samples.len(),
        classified: labeled.len(),
        excluded: samples.len() - labeled.len(),
        splits,
        ratios: Vec::new(),
    };
    report.ratios = ratio_report(&report, &config.ranges);
    Ok(report)
}

/// Compares rewrite-success against rewrite-failure samples for each range:
/// over all samples, and separately at each retrieval outcome (except for
/// ranges over MRR itself).
pub fn ratio_report(report: &SplitReport, ranges: &[ValueRange]) -> Vec<RatioStatement> {
    let mut out = Vec::new();
    for range in ranges {
        let mut pairs = alloc::vec![(Split::RewritePass, Split::RewriteFail)];
        if range.metric != Metric::Mrr {
            pairs.push((Split::PassPass, Split::FailPass));
            pairs.push((Split::PassFail, Split::FailFail));
        }
        for (num, den) in pairs {
            let nf = report.split(num).and_then(|s| s.frequency(range));
            let df = report.split(den).and_then(|s| s.frequency(range));
            let (ratio, flag) = match (nf, df) {
                (Some(n), Some(d)) if d > 0.0 => (Some(n / d), None),
                (Some(n), Some(_)) if n > 0.0 => (None, Some(RatioFlag::Infinite)),
                (Some(_), Some(_)) => (None, Some(RatioFlag::Undefined)),
                _ => (None, Some(RatioFlag::EmptySplit)),
            };
            let statement = match (ratio, flag) {
                (Some(r), _) => format!(
                    "{} is {r:.3}x as frequent in {} ({}) as in {} ({})",
                    range.describe(),
                    num.key(),
                    num.marks(),
                    den.key(),
                    den.marks()
                ),
                (None, Some(RatioFlag::Infinite)) => format!(
                    "{} occurs in {} but never in {}",
                    range.describe(),
                    num.key(),
                    den.key()
                ),
                (None, Some(RatioFlag::Undefined)) => format!(
                    "{} occurs in neither {} nor {}",
                    range.describe(),
                    num.key(),
                    den.key()
                ),
                _ => format!(
                    "{}: no comparison, {} or {} has no values",
                    range.describe(),
                    num.key(),
                    den.key()
                ),
            };
            out.push(RatioStatement {
                statement,
                range: range.clone(),
                numerator: num,
                denominator: den,
                numerator_frequency: nf,
                denominator_frequency: df,
                ratio,
                flag,
            });
        }
    }
    out
}
