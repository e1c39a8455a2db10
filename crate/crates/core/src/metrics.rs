//! Prequential error, macro-F1 and sliding-window F1 traces.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{ClassId, ClassSet};

/// Running mean of the zero-one loss, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrequentialTrace {
    pub values: Vec<f64>,
}

impl PrequentialTrace {
    /// Last value of the trace, or 0 when empty.
    pub fn last(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

fn check_lengths(y_true: &[ClassId], y_pred: &[ClassId]) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch { left: y_true.len(), right: y_pred.len() });
    }
    Ok(())
}

pub fn prequential_error(y_true: &[ClassId], y_pred: &[ClassId]) -> Result<PrequentialTrace> {
    check_lengths(y_true, y_pred)?;
    if y_true.is_empty() {
        return Err(Error::EmptyInput("label sequence"));
    }
    let mut wrong = 0usize;
    let values = y_true
        .iter()
        .zip(y_pred)
        .enumerate()
        .map(|(i, (t, p))| {
            if t != p {
                wrong += 1;
            }
            100.0 * wrong as f64 / (i + 1) as f64
        })
        .collect();
    Ok(PrequentialTrace { values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: ClassId,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub per_class: Vec<ClassScore>,
    pub macro_f1: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
}

fn confusion(y_true: &[ClassId], y_pred: &[ClassId], classes: &ClassSet) -> Result<Vec<Vec<u64>>> {
    check_lengths(y_true, y_pred)?;
    let n = classes.len();
    let mut m = vec![vec![0u64; n]; n];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        classes.check(t)?;
        classes.check(p)?;
        m[t.index()][p.index()] += 1;
    }
    Ok(m)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn score(m: &[Vec<u64>], c: usize) -> ClassScore {
    let tp = m[c][c];
    let predicted: u64 = m.iter().map(|row| row[c]).sum();
    let actual: u64 = m[c].iter().sum();
    let precision = ratio(tp, predicted);
    let recall = ratio(tp, actual);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    ClassScore { class: ClassId(c as u32), precision, recall, f1 }
}

/// Per-class scores and their unweighted mean over every class in `classes`.
/// Zero denominators count as zero.
pub fn macro_f1(y_true: &[ClassId], y_pred: &[ClassId], classes: &ClassSet) -> Result<F1Report> {
    let m = confusion(y_true, y_pred, classes)?;
    let per_class: Vec<ClassScore> = (0..classes.len()).map(|c| score(&m, c)).collect();
    let macro_f1 = per_class.iter().map(|s| s.f1).sum::<f64>() / per_class.len() as f64;
    Ok(F1Report { per_class, macro_f1, confusion: m })
}

/// Macro-F1 averaged over the classes that occur in `y_true` only.
fn present_class_f1(y_true: &[ClassId], y_pred: &[ClassId], classes: &ClassSet) -> Result<f64> {
    let m = confusion(y_true, y_pred, classes)?;
    let present: BTreeSet<usize> = y_true.iter().map(|c| c.index()).collect();
    Ok(present.iter().map(|&c| score(&m, c).f1).sum::<f64>() / present.len() as f64)
}

/// Window start offsets advancing by `round(window * (1 - overlap))`, at least 1.
pub fn window_starts(len: usize, window: usize, overlap_fraction: f64) -> Result<Vec<usize>> {
    if window == 0 || window > len {
        return Err(Error::InvalidParameter(format!("window {window} must lie in [1, {len}]")));
    }
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(Error::InvalidParameter(format!("overlap {overlap_fraction} must lie in [0,1)")));
    }
    let stride = ((window as f64 * (1.0 - overlap_fraction)).round() as usize).max(1);
    Ok((0..=len - window).step_by(stride).collect())
}

/// `(window centre, macro-F1)` over sliding windows of the sequence.
pub fn windowed_f1(
    y_true: &[ClassId],
    y_pred: &[ClassId],
    classes: &ClassSet,
    window: usize,
    overlap_fraction: f64,
) -> Result<Vec<(f64, f64)>> {
    check_lengths(y_true, y_pred)?;
    window_starts(y_true.len(), window, overlap_fraction)?
        .into_iter()
        .map(|s| {
            let e = s + window;
            let f1 = present_class_f1(&y_true[s..e], &y_pred[s..e], classes)?;
            Ok((s as f64 + window as f64 / 2.0, f1))
        })
        .collect()
}
