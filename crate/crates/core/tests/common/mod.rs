//! Test-only oracles. Everything here recomputes results straight from raw
//! edge counts without going through the crate's row, ranking or scoring
//! code.

#![allow(dead_code)]

use std::collections::BTreeMap;

use opguide::predictor::SeededRng;
use opguide::{Level, ReferenceGraph};

/// Raw directed edge counts keyed by (src, dst).
pub type Counts = BTreeMap<(String, String), u64>;

pub fn label(i: usize) -> String {
    format!("n{i:02}")
}

/// Random graph with 2..=max_nodes nodes and edge counts in 1..=max_count.
pub fn random_counts(
    rng: &mut SeededRng,
    max_nodes: usize,
    max_count: u64,
) -> (Vec<String>, Counts) {
    let n = 2 + rng.below(max_nodes as u64 - 1) as usize;
    let vocab: Vec<String> = (0..n).map(label).collect();
    let density = 0.15 + 0.6 * rng.unit();
    let mut counts = Counts::new();
    for src in &vocab {
        for dst in &vocab {
            if rng.unit() < density {
                counts.insert((src.clone(), dst.clone()), 1 + rng.below(max_count));
            }
        }
    }
    if counts.is_empty() {
        counts.insert(
            (vocab[0].clone(), vocab[1].clone()),
            1 + rng.below(max_count),
        );
    }
    (vocab, counts)
}

pub fn graph_from(vocab: &[String], counts: &Counts) -> ReferenceGraph {
    ReferenceGraph::from_counts(
        Level::Action,
        vocab.iter().map(String::as_str),
        counts
            .iter()
            .map(|((s, d), &c)| (s.as_str(), d.as_str(), c)),
    )
    .expect("random graphs have at least one edge")
}

/// Successors of `state` as (label, p) using global weights w = count / T
/// renormalised over the row, ordered by p descending then label.
pub fn oracle_row(counts: &Counts, state: &str) -> Vec<(String, f64)> {
    let total: u64 = counts.values().sum();
    let mut weights: Vec<(String, f64)> = Vec::new();
    for ((src, dst), &count) in counts {
        if src == state {
            weights.push((dst.clone(), count as f64 / total as f64));
        }
    }
    let row_weight: f64 = weights.iter().map(|(_, w)| w).sum();
    let mut row: Vec<(String, f64)> = weights
        .into_iter()
        .map(|(l, w)| (l, w / row_weight))
        .collect();
    row.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    row
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleScore {
    pub rank: Option<usize>,
    pub p: f64,
    pub h: f64,
    pub c: f64,
    pub a: f64,
}

/// Straight-line evaluation of the three-factor anomaly score.
pub fn oracle_score(
    counts: &Counts,
    state: &str,
    observed: &str,
    use_certainty: bool,
    literal: bool,
) -> OracleScore {
    let row = oracle_row(counts, state);
    if row.is_empty() {
        return OracleScore {
            rank: None,
            p: 0.0,
            h: 0.0,
            c: 1.0,
            a: 1.0,
        };
    }
    let mut h = 0.0;
    for (_, p) in &row {
        h -= p * p.ln();
    }
    let mut rank = None;
    for (i, (l, _)) in row.iter().enumerate() {
        if l == observed {
            rank = Some(i + 1);
        }
    }
    let Some(r) = rank else {
        return OracleScore {
            rank: None,
            p: 0.0,
            h,
            c: 1.0,
            a: 1.0,
        };
    };
    let p = row[r - 1].1;
    let mut max_p: f64 = 0.0;
    for (_, q) in &row {
        max_p = max_p.max(*q);
    }
    let f1 = if r == 1 {
        0.0
    } else {
        (r as f64).ln() / (row.len() as f64).ln()
    };
    let f2 = if literal {
        1.0 - (-p) / max_p
    } else {
        (1.0 - p / max_p).clamp(0.0, 1.0)
    };
    let c = if !use_certainty || h == 0.0 || p >= 1.0 {
        1.0
    } else {
        1.0 - (-p * p.ln()) / h
    };
    OracleScore {
        rank,
        p,
        h,
        c,
        a: f1 * f2 * c,
    }
}

/// Exhaustive rank-sum search over every label of `universe`.
/// Returns `Ok((label, graph_rank, model_rank))` or `Err(graph_valid)` for the
/// repeat case.
pub fn oracle_guidance(
    row_labels: &[String],
    predicted: &[String],
    dictionary: &[String],
    universe: &[String],
) -> Result<(String, usize, usize), Vec<String>> {
    let mut best: Option<(usize, usize, String, usize)> = None;
    for candidate in universe {
        if !dictionary.contains(candidate) {
            continue;
        }
        let g = row_labels.iter().position(|l| l == candidate);
        let m = predicted.iter().position(|l| l == candidate);
        if let (Some(g), Some(m)) = (g, m) {
            let key = (g + 1 + m + 1, g + 1, candidate.clone(), m + 1);
            if best
                .as_ref()
                .is_none_or(|b| (key.0, key.1, &key.2) < (b.0, b.1, &b.2))
            {
                best = Some(key);
            }
        }
    }
    match best {
        Some((_, g, label, m)) => Ok((label, g, m)),
        None => Err(row_labels
            .iter()
            .filter(|l| dictionary.contains(l))
            .cloned()
            .collect()),
    }
}

/// Random subset of `items` in random order with at most `max` elements.
pub fn random_subset(rng: &mut SeededRng, items: &[String], max: usize) -> Vec<String> {
    let mut pool = items.to_vec();
    rng.shuffle(&mut pool);
    let n = rng.below(max.min(pool.len()) as u64 + 1) as usize;
    pool.truncate(n);
    pool
}

pub const FIXTURE_SEQUENCE: [&str; 9] = ["A", "B", "C", "A", "B", "D", "A", "B", "C"];
