//! Per-transition anomaly severity.
//!
//! A transition `state -> observed` is scored as the product of three factors:
//! a log-rank factor `ln r / ln |Succ|`, a probability-deviation factor
//! comparing the observed probability with the row maximum, and an
//! entropy-informed certainty `1 - (-p ln p) / H`. Transitions the graph has
//! never seen score 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{row_entropy, ReferenceGraph};
use crate::guidance::Suggestion;
use crate::model::MAX_K;

/// How the probability-deviation factor is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor2Mode {
    /// `1 - p / max p`, clamped to `[0, 1]`.
    #[default]
    Corrected,
    /// `1 - (-p) / max p`, unclamped. Can exceed 1.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnomalyConfig {
    pub use_certainty: bool,
    pub factor2_mode: Factor2Mode,
    /// Number of next-action suggestions attached to each assessment.
    pub k: usize,
}

impl Default for AnomalyConfig {
    fn default() -> Self {
        AnomalyConfig {
            use_certainty: true,
            factor2_mode: Factor2Mode::Corrected,
            k: MAX_K,
        }
    }
}

impl AnomalyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepAssessment {
    /// Position of the transition in its sequence (0 for a standalone call).
    pub index: usize,
    pub state: String,
    pub observed: String,
    /// 1-based rank of `observed` among the successors, absent off-graph.
    pub r: Option<usize>,
    pub p: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub c: f64,
    pub a: f64,
    pub suggestions: Vec<Suggestion>,
    pub unknown_state: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnomalyReport {
    /// Steps with a strictly positive score, in sequence order.
    pub assessments: Vec<StepAssessment>,
    /// Every assessed step.
    pub full_trace: Vec<StepAssessment>,
}

fn surprisal_term(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.ln()
    }
}

/// `1 - (-p ln p) / H`, with `c = 1` for a zero-entropy row.
pub fn observed_certainty(p: f64, h: f64) -> f64 {
    if h <= 0.0 {
        return 1.0;
    }
    (1.0 - surprisal_term(p) / h).clamp(0.0, 1.0)
}

/// Top-`k` entries of the sorted successor row of `state`.
pub fn topk_next(graph: &ReferenceGraph, state: &str, k: usize) -> Vec<Suggestion> {
    graph
        .transition_row(state)
        .successors
        .into_iter()
        .take(k)
        .map(|s| Suggestion {
            label: s.label,
            probability: s.probability,
        })
        .collect()
}

pub fn assess_transition(
    graph: &ReferenceGraph,
    state: &str,
    observed: &str,
    config: &AnomalyConfig,
) -> StepAssessment {
    let row = graph.transition_row(state);
    let mut assessment = StepAssessment {
        index: 0,
        state: state.to_string(),
        observed: observed.to_string(),
        r: None,
        p: 0.0,
        h: 0.0,
        c: 1.0,
        a: 1.0,
        suggestions: Vec::new(),
        unknown_state: row.is_empty(),
    };
    if row.is_empty() {
        return assessment;
    }
    assessment.h = row_entropy(&row);
    assessment.suggestions = row
        .successors
        .iter()
        .take(config.k)
        .map(|s| Suggestion {
            label: s.label.clone(),
            probability: s.probability,
        })
        .collect();

    let Some(rank) = row.rank_of(observed) else {
        // off-graph transition: maximal severity
        return assessment;
    };
    let p = row.successors[rank - 1].probability;
    let max_p = row.max_probability();

    let rank_factor = if rank == 1 {
        0.0
    } else {
        (rank as f64).ln() / (row.len() as f64).ln()
    };
    let prob_factor = match config.factor2_mode {
        Factor2Mode::Corrected => (1.0 - p / max_p).clamp(0.0, 1.0),
        Factor2Mode::Literal => 1.0 - (-p) / max_p,
    };
    let certainty = if config.use_certainty {
        observed_certainty(p, assessment.h)
    } else {
        1.0
    };

    assessment.r = Some(rank);
    assessment.p = p;
    assessment.c = certainty;
    assessment.a = rank_factor * prob_factor * certainty;
    assessment
}

/// Scores every consecutive pair of `sequence`.
pub fn assess_sequence<S: AsRef<str>>(
    graph: &ReferenceGraph,
    sequence: &[S],
    config: &AnomalyConfig,
) -> Result<AnomalyReport> {
    if sequence.len() < 2 {
        return Err(Error::SequenceTooShort);
    }
    let full_trace: Vec<StepAssessment> = sequence
        .windows(2)
        .enumerate()
        .map(|(index, pair)| StepAssessment {
            index,
            ..assess_transition(graph, pair[0].as_ref(), pair[1].as_ref(), config)
        })
        .collect();
    let assessments = full_trace.iter().filter(|s| s.a > 0.0).cloned().collect();
    Ok(AnomalyReport {
        assessments,
        full_trace,
    })
}
