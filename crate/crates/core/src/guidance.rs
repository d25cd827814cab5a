//! Next-action recommendation: graph successors and Top-k model predictions,
//! both gated by an action dictionary, fused by minimum rank sum.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{ReferenceGraph, TransitionRow};
use crate::model::{ActionDictionary, TopKPrediction};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub label: String,
    /// 1-based position in the full probability-sorted successor row.
    pub graph_rank: usize,
    /// 1-based position in the original prediction list.
    pub model_rank: usize,
    pub rank_sum: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Suggestion {
    pub label: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GuidanceOutcome {
    Recommend(Recommendation),
    /// No label is supported by both sources: the operator is asked to repeat
    /// the previous action and is shown the dictionary-valid successors.
    Repeat {
        suggestions: Vec<Suggestion>,
    },
}

impl GuidanceOutcome {
    pub fn is_repeat(&self) -> bool {
        matches!(self, GuidanceOutcome::Repeat { .. })
    }

    pub fn recommended_label(&self) -> Option<&str> {
        match self {
            GuidanceOutcome::Recommend(r) => Some(&r.label),
            GuidanceOutcome::Repeat { .. } => None,
        }
    }
}

/// Recommends the next action from `state`.
///
/// Fails with [`Error::UnknownState`] when `state` has no outgoing edges.
pub fn recommend_next(
    graph: &ReferenceGraph,
    state: &str,
    prediction: &TopKPrediction,
    dictionary: &ActionDictionary,
) -> Result<GuidanceOutcome> {
    let row = graph.transition_row(state);
    if row.is_empty() {
        return Err(Error::UnknownState(state.to_string()));
    }
    Ok(recommend_from_row(&row, prediction, dictionary))
}

/// Rank-sum fusion over an already sorted row. Ties on the rank sum prefer
/// the better graph rank, then the smaller label.
pub fn recommend_from_row(
    row: &TransitionRow,
    prediction: &TopKPrediction,
    dictionary: &ActionDictionary,
) -> GuidanceOutcome {
    let graph_valid = row
        .successors
        .iter()
        .enumerate()
        .filter(|(_, s)| dictionary.contains(&s.label));

    let best = graph_valid
        .clone()
        .filter_map(|(i, s)| {
            prediction
                .rank_of(&s.label)
                .map(|model_rank| Recommendation {
                    label: s.label.clone(),
                    graph_rank: i + 1,
                    model_rank,
                    rank_sum: i + 1 + model_rank,
                })
        })
        .min_by(|a, b| {
            a.rank_sum
                .cmp(&b.rank_sum)
                .then(a.graph_rank.cmp(&b.graph_rank))
                .then_with(|| a.label.cmp(&b.label))
        });

    match best {
        Some(recommendation) => GuidanceOutcome::Recommend(recommendation),
        None => GuidanceOutcome::Repeat {
            suggestions: graph_valid
                .map(|(_, s)| Suggestion {
                    label: s.label.clone(),
                    probability: s.probability,
                })
                .collect(),
        },
    }
}
