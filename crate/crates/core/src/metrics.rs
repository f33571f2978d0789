//! One-vs-rest Q accuracy, plain accuracy and fit timing.
//!
//! Q treats every (sample, class) pair as a binary decision "is this sample
//! of class c?" and reports the fraction of correct decisions:
//! `Q = Σ_c (TP_c + TN_c) / (n · C)`. For single-label predictions each
//! misclassified sample costs exactly two wrong decisions (one false
//! negative, one false positive), so `Q = 1 − 2e / (n · C)`.

use std::time::Instant;

use crate::datamat::LabelVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn correct(&self) -> usize {
        self.tp + self.tn
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub per_class: Vec<ClassCounts>,
    pub q_accuracy: f64,
    pub plain_accuracy: f64,
    pub n: usize,
    pub classes: usize,
}

impl ClassificationReport {
    pub fn new(pred: &LabelVector, truth: &LabelVector, classes: usize) -> Result<Self> {
        let per_class = confusion_counts(pred, truth, classes)?;
        let q = q_from_counts(&per_class, truth.len())?;
        Ok(Self {
            q_accuracy: q,
            plain_accuracy: plain_accuracy(pred, truth)?,
            per_class,
            n: truth.len(),
            classes,
        })
    }

    pub fn misclassified(&self) -> usize {
        self.per_class.iter().map(|c| c.fn_).sum()
    }
}

/// Per-class one-vs-rest TP/TN/FP/FN counts.
pub fn confusion_counts(pred: &LabelVector, truth: &LabelVector, classes: usize) -> Result<Vec<ClassCounts>> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} ground-truth labels",
            pred.len(),
            truth.len()
        )));
    }
    if classes == 0 {
        return Err(Error::invalid("class count must be >= 1"));
    }
    let out_of_range = pred
        .as_slice()
        .iter()
        .chain(truth.as_slice())
        .find(|&&l| l >= classes);
    if let Some(l) = out_of_range {
        return Err(Error::invalid(format!("label {l} out of range for {classes} classes")));
    }

    let mut counts = vec![ClassCounts::default(); classes];
    for (&p, &t) in pred.as_slice().iter().zip(truth.as_slice()) {
        for (c, cc) in counts.iter_mut().enumerate() {
            match (p == c, t == c) {
                (true, true) => cc.tp += 1,
                (false, true) => cc.fn_ += 1,
                (true, false) => cc.fp += 1,
                (false, false) => cc.tn += 1,
            }
        }
    }
    Ok(counts)
}

fn q_from_counts(counts: &[ClassCounts], n: usize) -> Result<f64> {
    if n == 0 || counts.is_empty() {
        return Err(Error::UndefinedMetric("Q accuracy needs at least one sample".into()));
    }
    let correct: usize = counts.iter().map(ClassCounts::correct).sum();
    let total: usize = counts.iter().map(ClassCounts::total).sum();
    Ok(correct as f64 / total as f64)
}

/// `Σ(tp + tn) / (n · C)` over the report's classes.
pub fn q_accuracy(report: &ClassificationReport) -> Result<f64> {
    q_from_counts(&report.per_class, report.n)
}

/// Fraction of positions where prediction and truth agree.
pub fn plain_accuracy(pred: &LabelVector, truth: &LabelVector) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} ground-truth labels",
            pred.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::UndefinedMetric("accuracy of an empty prediction set".into()));
    }
    let hits = pred
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .filter(|(p, t)| p == t)
        .count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Runs `op` and returns its result with the elapsed wall time in seconds.
pub fn timed<T>(op: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = op();
    (out, start.elapsed().as_secs_f64())
}

/// Formats a fraction as a percentage with 2 decimals, rounding half up.
///
/// Rounding works on the decimal digits of `fraction · 100`, so 0.95852
/// prints as "95.85" and an exact half such as 0.000125 as "0.01".
pub fn format_percent(fraction: f64) -> String {
    format_fixed2(fraction * 100.0)
}

/// Fixed 2-decimal formatting with round-half-up on the printed digits.
pub fn format_fixed2(value: f64) -> String {
    if !value.is_finite() {
        return value.to_string();
    }
    // decide on the 6-decimal rendering so binary noise below 1e-6 is ignored
    let wide = format!("{:.6}", value.abs());
    let (int_part, frac) = wide.split_once('.').unwrap_or((&wide, "000000"));
    let mut hundredths: u128 = int_part.parse::<u128>().unwrap_or(0) * 100
        + frac[..2].parse::<u128>().unwrap_or(0);
    let rest: u128 = frac[2..].parse().unwrap_or(0);
    if rest >= 5000 {
        hundredths += 1;
    }
    let sign = if value < 0.0 && hundredths > 0 { "-" } else { "" };
    format!("{sign}{}.{:02}", hundredths / 100, hundredths % 100)
}
