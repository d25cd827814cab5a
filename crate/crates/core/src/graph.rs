//! First-order Markov reference graph over action labels.
//!
//! Edges carry raw transition counts. Two normalisations are derived from
//! them: the global weight `count / T` over all transitions, and the row
//! probability `count / Σ row counts` used for guidance and anomaly scoring.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_token, Level};
use crate::numfmt;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceGraph {
    level: Level,
    vocab: BTreeSet<String>,
    counts: BTreeMap<String, BTreeMap<String, u64>>,
    total_transitions: u64,
}

/// Borrowed view of one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeRef<'a> {
    pub src: &'a str,
    pub dst: &'a str,
    pub count: u64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Successor {
    pub label: String,
    pub count: u64,
    pub probability: f64,
}

/// Outgoing distribution of one state, sorted by probability descending with
/// ties broken by ascending label.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionRow {
    pub state: String,
    pub successors: Vec<Successor>,
}

impl TransitionRow {
    pub fn is_empty(&self) -> bool {
        self.successors.is_empty()
    }

    pub fn len(&self) -> usize {
        self.successors.len()
    }

    /// 1-based position of `label` in the sorted row.
    pub fn rank_of(&self, label: &str) -> Option<usize> {
        self.successors
            .iter()
            .position(|s| s.label == label)
            .map(|i| i + 1)
    }

    pub fn get(&self, label: &str) -> Option<&Successor> {
        self.successors.iter().find(|s| s.label == label)
    }

    pub fn max_probability(&self) -> f64 {
        self.successors.first().map_or(0.0, |s| s.probability)
    }
}

/// Shannon entropy of a row in nats, with `0 · ln 0 = 0`.
pub fn row_entropy(row: &TransitionRow) -> f64 {
    -row.successors
        .iter()
        .map(|s| s.probability)
        .filter(|&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// Counts every consecutive pair inside each sequence. Labels from all
/// sequences, including those too short to contribute a pair, form the
/// vocabulary.
pub fn build_reference_graph<S: AsRef<str>>(
    level: Level,
    sequences: &[Vec<S>],
) -> Result<ReferenceGraph> {
    let mut vocab = BTreeSet::new();
    let mut counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    let mut total = 0u64;
    for sequence in sequences {
        for label in sequence {
            let label = label.as_ref();
            validate_token(label)?;
            if !vocab.contains(label) {
                vocab.insert(label.to_string());
            }
        }
        for pair in sequence.windows(2) {
            let (src, dst) = (pair[0].as_ref(), pair[1].as_ref());
            *counts
                .entry(src.to_string())
                .or_default()
                .entry(dst.to_string())
                .or_insert(0) += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyGraph);
    }
    Ok(ReferenceGraph {
        level,
        vocab,
        counts,
        total_transitions: total,
    })
}

impl ReferenceGraph {
    /// Assembles a graph from explicit edge counts. Edge endpoints are added
    /// to the vocabulary; zero counts are dropped.
    pub fn from_counts<S: AsRef<str>>(
        level: Level,
        vocab: impl IntoIterator<Item = S>,
        edges: impl IntoIterator<Item = (S, S, u64)>,
    ) -> Result<Self> {
        let mut graph = ReferenceGraph {
            level,
            vocab: BTreeSet::new(),
            counts: BTreeMap::new(),
            total_transitions: 0,
        };
        for label in vocab {
            validate_token(label.as_ref())?;
            graph.vocab.insert(label.as_ref().to_string());
        }
        for (src, dst, count) in edges {
            let (src, dst) = (src.as_ref(), dst.as_ref());
            validate_token(src)?;
            validate_token(dst)?;
            if count == 0 {
                continue;
            }
            graph.vocab.insert(src.to_string());
            graph.vocab.insert(dst.to_string());
            *graph
                .counts
                .entry(src.to_string())
                .or_default()
                .entry(dst.to_string())
                .or_insert(0) += count;
            graph.total_transitions += count;
        }
        if graph.total_transitions == 0 {
            return Err(Error::EmptyGraph);
        }
        Ok(graph)
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    pub fn contains(&self, label: &str) -> bool {
        self.vocab.contains(label)
    }

    pub fn total_transitions(&self) -> u64 {
        self.total_transitions
    }

    pub fn edge_count(&self) -> usize {
        self.counts.values().map(BTreeMap::len).sum()
    }

    /// Edges ordered by source, then destination.
    pub fn edges(&self) -> impl Iterator<Item = EdgeRef<'_>> {
        let total = self.total_transitions as f64;
        self.counts.iter().flat_map(move |(src, row)| {
            row.iter().map(move |(dst, &count)| EdgeRef {
                src,
                dst,
                count,
                weight: count as f64 / total,
            })
        })
    }

    pub fn count(&self, src: &str, dst: &str) -> u64 {
        self.counts
            .get(src)
            .and_then(|row| row.get(dst))
            .copied()
            .unwrap_or(0)
    }

    /// Globally normalised weight `count / T`.
    pub fn weight(&self, src: &str, dst: &str) -> f64 {
        self.count(src, dst) as f64 / self.total_transitions as f64
    }

    /// States with at least one outgoing edge, in label order.
    pub fn states_with_successors(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(String::as_str)
    }

    /// Successor row of `state`; empty for unknown or absorbing states.
    pub fn transition_row(&self, state: &str) -> TransitionRow {
        let mut successors: Vec<Successor> = match self.counts.get(state) {
            Some(row) => {
                let row_total: u64 = row.values().sum();
                row.iter()
                    .map(|(label, &count)| Successor {
                        label: label.clone(),
                        count,
                        probability: count as f64 / row_total as f64,
                    })
                    .collect()
            }
            None => Vec::new(),
        };
        // equal counts give bit-identical probabilities, so counts order exactly
        successors.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.label.cmp(&b.label)));
        TransitionRow {
            state: state.to_string(),
            successors,
        }
    }

    /// Copy of the graph with every edge count multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> ReferenceGraph {
        assert!(factor > 0, "scale factor must be positive");
        let mut scaled = self.clone();
        for row in scaled.counts.values_mut() {
            for count in row.values_mut() {
                *count *= factor;
            }
        }
        scaled.total_transitions *= factor;
        scaled
    }

    /// Canonical text encoding: pretty JSON with sorted keys, edges ordered by
    /// source then destination, weights at 12 significant digits.
    pub fn to_canonical_string(&self) -> String {
        let file = GraphFile {
            level: self.level,
            vocab: self.vocab.iter().cloned().collect(),
            total_transitions: self.total_transitions,
            edges: self
                .edges()
                .map(|e| EdgeRecord {
                    src: e.src.to_string(),
                    dst: e.dst.to_string(),
                    count: e.count,
                    weight: e.weight,
                })
                .collect(),
        };
        numfmt::to_canonical_pretty(&file, numfmt::GRAPH_DIGITS)
    }

    pub fn serialize(&self) -> Vec<u8> {
        self.to_canonical_string().into_bytes()
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let file: GraphFile =
            serde_json::from_slice(bytes).map_err(|e| Error::MalformedGraphFile {
                line: e.line(),
                column: e.column(),
                reason: e.to_string(),
            })?;
        file.into_graph()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    src: String,
    dst: String,
    count: u64,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    level: Level,
    vocab: Vec<String>,
    total_transitions: u64,
    edges: Vec<EdgeRecord>,
}

/// Stored weights are rounded to 12 significant digits.
const WEIGHT_TOLERANCE: f64 = 1e-9;

impl GraphFile {
    fn into_graph(self) -> Result<ReferenceGraph> {
        let malformed = |reason: String| Error::MalformedGraphFile {
            line: 0,
            column: 0,
            reason,
        };
        let mut vocab = BTreeSet::new();
        for label in self.vocab {
            validate_token(&label).map_err(|e| malformed(format!("vocab: {e}")))?;
            if !vocab.insert(label.clone()) {
                return Err(malformed(format!("vocab: duplicate label {label:?}")));
            }
        }
        let mut counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
        let mut total = 0u64;
        for (i, edge) in self.edges.iter().enumerate() {
            for end in [&edge.src, &edge.dst] {
                if !vocab.contains(end) {
                    return Err(malformed(format!("edge {i}: {end:?} is not in vocab")));
                }
            }
            if edge.count == 0 {
                return Err(malformed(format!("edge {i}: count must be positive")));
            }
            let slot = counts
                .entry(edge.src.clone())
                .or_default()
                .entry(edge.dst.clone())
                .or_insert(0);
            if *slot != 0 {
                return Err(malformed(format!(
                    "edge {i}: duplicate edge {:?} -> {:?}",
                    edge.src, edge.dst
                )));
            }
            *slot = edge.count;
            total += edge.count;
        }
        if total != self.total_transitions {
            return Err(malformed(format!(
                "total_transitions is {} but edge counts sum to {total}",
                self.total_transitions
            )));
        }
        if total == 0 {
            return Err(malformed("graph has no transitions".to_string()));
        }
        for (i, edge) in self.edges.iter().enumerate() {
            let expected = edge.count as f64 / total as f64;
            if (edge.weight - expected).abs() > WEIGHT_TOLERANCE {
                return Err(malformed(format!(
                    "edge {i}: weight {} does not equal count/total {expected}",
                    edge.weight
                )));
            }
        }
        Ok(ReferenceGraph {
            level: self.level,
            vocab,
            counts,
            total_transitions: total,
        })
    }
}
