//! Verification protocol: acceptance thresholding, confusion counts, and
//! report rendering.
//!
//! A probe is scored by its distance to the nearest class mean. A positive
//! probe (enrolled identity) counts as a true positive only when the
//! predicted label matches *and* the distance is within the threshold τ;
//! otherwise it is a false negative. A negative probe (unenrolled identity)
//! counts as a true negative when its distance exceeds τ, otherwise as a
//! false positive. τ = +∞ accepts every probe and τ = -∞ rejects every
//! probe; both are valid degenerate settings. Only NaN is rejected.
//!
//! Displayed percentages are computed from the integer counts with rational
//! arithmetic and rounded half away from zero, so a rate like 773/800
//! renders as "96.63" regardless of how the equivalent float would round.

use crate::classify::{ClassModel, Measure};
use crate::error::{Error, Result};

/// Outcome counts of one evaluation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_neg: u64,
    pub false_pos: u64,
    pub true_neg: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_neg + self.false_pos + self.true_neg
    }
}

/// An exact rate: numerator over a positive denominator, kept as integers so
/// rendering can round correctly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rate {
    num: u64,
    den: u64,
}

impl Rate {
    pub fn new(num: u64, den: u64) -> Rate {
        assert!(den > 0 && num <= den, "rate {num}/{den} out of range");
        Rate { num, den }
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `num·scale/den`, rounded half away from zero, in exact integer
    /// arithmetic.
    fn scaled_rounded(&self, scale: u64) -> u64 {
        let s = self.num as u128 * scale as u128;
        let den = self.den as u128;
        let q = s / den;
        let r = s % den;
        (q + u128::from(2 * r >= den)) as u64
    }

    /// Percentage with two decimals, e.g. "96.63".
    pub fn percent(&self) -> String {
        let p = self.scaled_rounded(10_000);
        format!("{}.{:02}", p / 100, p % 100)
    }

    /// Fraction with six decimals, e.g. "0.966250".
    pub fn fraction(&self) -> String {
        let f = self.scaled_rounded(1_000_000);
        format!("{}.{:06}", f / 1_000_000, f % 1_000_000)
    }
}

/// Rates derived from one set of confusion counts. A rate is `None` when its
/// denominator is zero (e.g. specificity with no negative probes).
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub counts: ConfusionCounts,
    /// TP / (TP + FN).
    pub sensitivity: Option<Rate>,
    /// TN / (TN + FP).
    pub specificity: Option<Rate>,
    /// FP / (FP + TN).
    pub false_pos_rate: Option<Rate>,
    /// FN / (FN + TP).
    pub false_neg_rate: Option<Rate>,
    /// (TP + TN) / total.
    pub accuracy: Rate,
}

/// Derives rates from counts. Errors when all four counts are zero (there
/// is nothing to evaluate and even accuracy would be 0/0).
pub fn compute_metrics(counts: &ConfusionCounts) -> Result<Metrics> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::Eval {
            reason: "all confusion counts are zero".into(),
        });
    }
    let positives = counts.true_pos + counts.false_neg;
    let negatives = counts.true_neg + counts.false_pos;
    let rate = |num: u64, den: u64| (den > 0).then(|| Rate::new(num, den));
    Ok(Metrics {
        counts: *counts,
        sensitivity: rate(counts.true_pos, positives),
        specificity: rate(counts.true_neg, negatives),
        false_pos_rate: rate(counts.false_pos, negatives),
        false_neg_rate: rate(counts.false_neg, positives),
        accuracy: Rate::new(counts.true_pos + counts.true_neg, total),
    })
}

/// One scored probe: its true label, the predicted class, the distance to
/// that class, and whether the probe's identity is enrolled.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeScore {
    pub label: String,
    pub predicted_class: usize,
    pub distance: f64,
    pub positive: bool,
}

/// Classifies every probe embedding under one measure. Each probe is a
/// `(embedding, true label, is_positive)` triple.
pub fn score_probes(
    model: &ClassModel,
    measure: Measure,
    probes: &[(Vec<f64>, String, bool)],
) -> Result<Vec<ProbeScore>> {
    probes
        .iter()
        .map(|(embedding, label, positive)| {
            let (predicted_class, distance) = model.classify(measure, embedding)?;
            Ok(ProbeScore {
                label: label.clone(),
                predicted_class,
                distance,
                positive: *positive,
            })
        })
        .collect()
}

/// Applies an acceptance threshold to already-scored probes. Scoring is
/// separated from thresholding so a τ sweep classifies each probe once.
pub fn counts_at(model: &ClassModel, scores: &[ProbeScore], tau: f64) -> Result<ConfusionCounts> {
    if tau.is_nan() {
        return Err(Error::Eval {
            reason: "threshold must not be NaN".into(),
        });
    }
    let mut c = ConfusionCounts::default();
    for s in scores {
        let accepted = s.distance <= tau;
        if s.positive {
            let correct = model.labels()[s.predicted_class] == s.label;
            if accepted && correct {
                c.true_pos += 1;
            } else {
                c.false_neg += 1;
            }
        } else if accepted {
            c.false_pos += 1;
        } else {
            c.true_neg += 1;
        }
    }
    Ok(c)
}

/// One report line: a measure, a threshold, and the resulting metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub measure: Measure,
    pub tau: f64,
    pub metrics: Metrics,
}

pub const CSV_HEADER: &str =
    "measure,tau,TP,FP,TN,FN,sensitivity,specificity,fpr,fnr,accuracy";

fn opt_fraction(r: &Option<Rate>) -> String {
    r.as_ref().map_or_else(|| "undefined".into(), Rate::fraction)
}

/// Renders one CSV data row (no trailing newline).
pub fn csv_row(row: &ReportRow) -> String {
    let m = &row.metrics;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        row.measure.name(),
        row.tau,
        m.counts.true_pos,
        m.counts.false_pos,
        m.counts.true_neg,
        m.counts.false_neg,
        opt_fraction(&m.sensitivity),
        opt_fraction(&m.specificity),
        opt_fraction(&m.false_pos_rate),
        opt_fraction(&m.false_neg_rate),
        m.accuracy.fraction(),
    )
}

/// Full CSV document for a set of rows.
pub fn render_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&csv_row(row));
        out.push('\n');
    }
    out
}

fn opt_percent(r: &Option<Rate>) -> String {
    r.as_ref().map_or_else(|| "undef".into(), Rate::percent)
}

/// Plain-text table of the same rows, percentages at two decimals.
pub fn render_table(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>12} {:>6} {:>6} {:>6} {:>6} {:>8} {:>8} {:>8}\n",
        "measure", "tau", "TP", "FP", "TN", "FN", "sens%", "spec%", "acc%"
    ));
    for row in rows {
        let m = &row.metrics;
        out.push_str(&format!(
            "{:<12} {:>12} {:>6} {:>6} {:>6} {:>6} {:>8} {:>8} {:>8}\n",
            row.measure.name(),
            format_tau(row.tau),
            m.counts.true_pos,
            m.counts.false_pos,
            m.counts.true_neg,
            m.counts.false_neg,
            opt_percent(&m.sensitivity),
            opt_percent(&m.specificity),
            m.accuracy.percent(),
        ));
    }
    out
}

fn format_tau(tau: f64) -> String {
    if tau == f64::INFINITY {
        "inf".into()
    } else if tau == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{tau:.6}")
    }
}
