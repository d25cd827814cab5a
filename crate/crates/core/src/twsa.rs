//! Time-weighted sequence accuracy.
//!
//! Each step scores `min(t_ref / t_actual, 1)` when the step counts as
//! correct and 0 otherwise. A session aggregates to the mean step score plus
//! per-label box-plot summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{median, ReferenceTimes};

pub fn step_twsa(t_ref: f64, t_actual: f64, correct: bool) -> Result<f64> {
    if !(t_ref > 0.0 && t_ref.is_finite() && t_actual > 0.0 && t_actual.is_finite()) {
        return Err(Error::NonPositiveDuration);
    }
    Ok(if correct {
        (t_ref / t_actual).min(1.0)
    } else {
        0.0
    })
}

/// One executed step of an operator session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub label: String,
    pub duration_s: f64,
    /// Top-k labels that were recommended before this step.
    pub recommended: Vec<String>,
}

/// How a step is judged correct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwsaMode {
    /// The executed label appears in that step's recommended set.
    #[default]
    Top5Membership,
    /// Every step is correct iff the whole executed sequence equals the
    /// expected sequence.
    StrictSequence,
}

/// Tukey box-plot summary. `min` and `max` are the whisker ends, i.e. the
/// extreme values inside the 1.5·IQR fences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassStats {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub outliers: Vec<f64>,
}

impl ClassStats {
    /// Hinges are medians of the lower and upper halves, the overall median
    /// belonging to both halves when the count is odd.
    pub fn from_values(values: &[f64]) -> Option<ClassStats> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let half = n.div_ceil(2);
        let q1 = median(&sorted[..half])?;
        let q3 = median(&sorted[n - half..])?;
        let iqr = q3 - q1;
        let (low_fence, high_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside = |x: &&f64| **x >= low_fence && **x <= high_fence;
        Some(ClassStats {
            count: n,
            min: *sorted.iter().find(inside)?,
            q1,
            median: median(&sorted)?,
            q3,
            max: *sorted.iter().rev().find(inside)?,
            outliers: sorted.iter().copied().filter(|x| !inside(&x)).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwsaReport {
    pub mode: TwsaMode,
    pub step_scores: Vec<f64>,
    pub correct: Vec<bool>,
    pub class_stats: BTreeMap<String, ClassStats>,
    pub overall: f64,
}

/// Mean that does not depend on the order of `values`.
pub fn order_independent_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

pub fn evaluate_session<S: AsRef<str>>(
    records: &[StepRecord],
    reference_times: &ReferenceTimes,
    mode: TwsaMode,
    expected: Option<&[S]>,
) -> Result<TwsaReport> {
    if records.is_empty() {
        return Err(Error::EmptySession);
    }
    let correct: Vec<bool> = match mode {
        TwsaMode::Top5Membership => records
            .iter()
            .map(|r| r.recommended.contains(&r.label))
            .collect(),
        TwsaMode::StrictSequence => {
            let expected = expected.ok_or(Error::MissingExpectedSequence)?;
            let matches = expected.len() == records.len()
                && records
                    .iter()
                    .zip(expected)
                    .all(|(r, e)| r.label == e.as_ref());
            vec![matches; records.len()]
        }
    };

    let mut step_scores = Vec::with_capacity(records.len());
    let mut by_class: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (record, &ok) in records.iter().zip(&correct) {
        let t_ref = reference_times.get(&record.label)?;
        let score = step_twsa(t_ref, record.duration_s, ok)?;
        step_scores.push(score);
        by_class
            .entry(record.label.clone())
            .or_default()
            .push(score);
    }
    let class_stats = by_class
        .into_iter()
        .filter_map(|(label, scores)| ClassStats::from_values(&scores).map(|s| (label, s)))
        .collect();
    Ok(TwsaReport {
        mode,
        overall: order_independent_mean(&step_scores),
        step_scores,
        correct,
        class_stats,
    })
}
