//! Deterministic Top-k prediction sources standing in for an action
//! anticipation model.
//!
//! Randomness comes from [`SeededRng`]: ChaCha8 seeded through
//! `seed_from_u64`, with integers drawn by 128-bit multiply-shift and unit
//! reals built from the top 53 bits of a 64-bit word. Nothing depends on the
//! distribution code of any particular `rand` release, so seeded output is
//! stable across platforms and versions.

use std::path::Path;
use std::sync::Arc;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::anomaly::topk_next;
use crate::error::{Error, Result};
use crate::graph::{ReferenceGraph, TransitionRow};
use crate::io;
use crate::model::{TopKPrediction, MAX_K};

#[derive(Debug, Clone)]
pub struct SeededRng(ChaCha8Rng);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((u128::from(self.0.next_u64()) * u128::from(n)) >> 64) as u64
    }

    /// Uniform real in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Draws a successor in proportion to its count.
pub fn sample_successor(row: &TransitionRow, rng: &mut SeededRng) -> Option<String> {
    let total: u64 = row.successors.iter().map(|s| s.count).sum();
    if total == 0 {
        return None;
    }
    let mut target = rng.below(total);
    for s in &row.successors {
        if target < s.count {
            return Some(s.label.clone());
        }
        target -= s.count;
    }
    unreachable!("target is below the row total")
}

fn uniform_start(graph: &ReferenceGraph, rng: &mut SeededRng) -> Option<String> {
    let states: Vec<&str> = graph.states_with_successors().collect();
    if states.is_empty() {
        return None;
    }
    Some(states[rng.below(states.len() as u64) as usize].to_string())
}

/// Random walk of up to `length` labels. The start state is uniform over
/// states with successors; the walk stops early at an absorbing state.
pub fn sample_episode(graph: &ReferenceGraph, length: usize, seed: u64) -> Result<Vec<String>> {
    if length < 2 {
        return Err(Error::InvalidParameter(
            "episode length must be at least 2".into(),
        ));
    }
    let mut rng = SeededRng::new(seed);
    let mut current = uniform_start(graph, &mut rng).ok_or(Error::EmptyGraph)?;
    let mut episode = vec![current.clone()];
    while episode.len() < length {
        match sample_successor(&graph.transition_row(&current), &mut rng) {
            Some(next) => {
                episode.push(next.clone());
                current = next;
            }
            None => break,
        }
    }
    Ok(episode)
}

/// Supplier of anticipated Top-k actions, one list per call.
pub trait PredictionSource: Send {
    fn next_topk(&mut self) -> Result<TopKPrediction>;

    /// Informs the source of the state the operator is now in.
    fn observe(&mut self, _label: &str) {}
}

/// Replays recorded predictions in order.
#[derive(Debug, Clone)]
pub struct FileReplay {
    predictions: Vec<TopKPrediction>,
    cursor: usize,
}

impl FileReplay {
    pub fn new(predictions: Vec<TopKPrediction>) -> Self {
        FileReplay {
            predictions,
            cursor: 0,
        }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::new(io::parse_predictions(&text)?))
    }

    pub fn remaining(&self) -> usize {
        self.predictions.len() - self.cursor
    }
}

impl PredictionSource for FileReplay {
    fn next_topk(&mut self) -> Result<TopKPrediction> {
        let next = self
            .predictions
            .get(self.cursor)
            .cloned()
            .ok_or(Error::SourceExhausted)?;
        self.cursor += 1;
        Ok(next)
    }
}

/// Scores attached to synthetic lists, rank 1 first.
const SYNTHETIC_SCORES: [f64; MAX_K] = [0.40, 0.25, 0.15, 0.12, 0.08];

/// Walks a ground-truth sequence. With probability `1 - epsilon` the true
/// label is ranked first; otherwise it is placed at a random rank below the
/// first (or left out entirely when `drop_truth` is set). Remaining slots are
/// filled with shuffled vocabulary labels.
#[derive(Debug, Clone)]
pub struct NoisyOracle {
    truth: Vec<String>,
    vocabulary: Vec<String>,
    epsilon: f64,
    drop_truth: bool,
    rng: SeededRng,
    cursor: usize,
}

impl NoisyOracle {
    pub fn new(
        truth: Vec<String>,
        vocabulary: impl IntoIterator<Item = String>,
        epsilon: f64,
        seed: u64,
        drop_truth: bool,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter(format!(
                "corruption probability {epsilon} outside [0, 1]"
            )));
        }
        let mut vocabulary: Vec<String> = vocabulary.into_iter().collect();
        vocabulary.sort();
        vocabulary.dedup();
        Ok(NoisyOracle {
            truth,
            vocabulary,
            epsilon,
            drop_truth,
            rng: SeededRng::new(seed),
            cursor: 0,
        })
    }
}

impl PredictionSource for NoisyOracle {
    fn next_topk(&mut self) -> Result<TopKPrediction> {
        let truth = self
            .truth
            .get(self.cursor)
            .cloned()
            .ok_or(Error::SourceExhausted)?;
        self.cursor += 1;

        let corrupt = self.rng.unit() < self.epsilon;
        let mut distractors: Vec<String> = self
            .vocabulary
            .iter()
            .filter(|l| **l != truth)
            .cloned()
            .collect();
        self.rng.shuffle(&mut distractors);

        let labels: Vec<String> = if !corrupt {
            std::iter::once(truth)
                .chain(distractors.into_iter().take(MAX_K - 1))
                .collect()
        } else if self.drop_truth {
            distractors.into_iter().take(MAX_K).collect()
        } else {
            let mut labels: Vec<String> = distractors.into_iter().take(MAX_K - 1).collect();
            if labels.is_empty() {
                // no distractor can take rank 1
                labels.push(truth);
            } else {
                let slot = 1 + self.rng.below(labels.len() as u64) as usize;
                labels.insert(slot, truth);
            }
            labels
        };
        TopKPrediction::new(labels.into_iter().zip(SYNTHETIC_SCORES))
    }
}

/// Predicts the graph's Top-k successors of its current state, then moves to
/// a sampled successor. [`PredictionSource::observe`] resynchronises the
/// state with what the operator actually did.
#[derive(Debug, Clone)]
pub struct MarkovSampler {
    graph: Arc<ReferenceGraph>,
    rng: SeededRng,
    current: Option<String>,
    k: usize,
}

impl MarkovSampler {
    pub fn new(graph: Arc<ReferenceGraph>, seed: u64, initial: Option<String>, k: usize) -> Self {
        let mut rng = SeededRng::new(seed);
        let current = initial.or_else(|| uniform_start(&graph, &mut rng));
        MarkovSampler {
            graph,
            rng,
            current,
            k: k.clamp(1, MAX_K),
        }
    }

    pub fn current(&self) -> Option<&str> {
        self.current.as_deref()
    }

    /// Samples and moves to the next state. Stays put at absorbing states.
    pub fn step(&mut self) -> Option<String> {
        let current = self.current.as_deref()?;
        let next = sample_successor(&self.graph.transition_row(current), &mut self.rng)?;
        self.current = Some(next.clone());
        Some(next)
    }
}

impl PredictionSource for MarkovSampler {
    fn next_topk(&mut self) -> Result<TopKPrediction> {
        let Some(current) = self.current.as_deref() else {
            return Ok(TopKPrediction::default());
        };
        let top = topk_next(&self.graph, current, self.k);
        let prediction = TopKPrediction::new(top.into_iter().map(|s| (s.label, s.probability)))?;
        self.step();
        Ok(prediction)
    }

    fn observe(&mut self, label: &str) {
        self.current = Some(label.to_string());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_reference_graph;
    use crate::model::Level;

    fn fixture() -> Arc<ReferenceGraph> {
        let seq = vec!["A", "B", "C", "A", "B", "D", "A", "B", "C"];
        Arc::new(build_reference_graph(Level::Action, &[seq]).unwrap())
    }

    fn vocab() -> Vec<String> {
        ["A", "B", "C", "D", "E", "F", "G"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    #[test]
    fn rng_is_reproducible() {
        let mut a = SeededRng::new(7);
        let mut b = SeededRng::new(7);
        for _ in 0..100 {
            assert_eq!(a.below(13), b.below(13));
            let u = a.unit();
            assert_eq!(u, b.unit());
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn noisy_oracle_without_noise_ranks_truth_first() {
        let truth: Vec<String> = ["A", "B", "C", "D", "E"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut oracle = NoisyOracle::new(truth.clone(), vocab(), 0.0, 3, false).unwrap();
        for t in &truth {
            let p = oracle.next_topk().unwrap();
            assert_eq!(p.entries()[0].label, *t);
            assert_eq!(p.len(), 5);
        }
        assert_eq!(oracle.next_topk(), Err(Error::SourceExhausted));
    }

    #[test]
    fn noisy_oracle_full_noise_keeps_truth_below_top() {
        let truth: Vec<String> = (0..50).map(|i| vocab()[i % 7].clone()).collect();
        let mut oracle = NoisyOracle::new(truth.clone(), vocab(), 1.0, 11, false).unwrap();
        for t in &truth {
            let p = oracle.next_topk().unwrap();
            let rank = p.rank_of(t).expect("truth kept in the list");
            assert!(rank > 1);
        }
        let mut dropping = NoisyOracle::new(truth.clone(), vocab(), 1.0, 11, true).unwrap();
        for t in &truth {
            assert!(!dropping.next_topk().unwrap().contains(t));
        }
    }

    #[test]
    fn noisy_oracle_rejects_bad_epsilon() {
        assert!(NoisyOracle::new(vec![], vocab(), 1.5, 0, false).is_err());
    }

    #[test]
    fn markov_sampler_is_deterministic() {
        let run = || {
            let mut s = MarkovSampler::new(fixture(), 42, None, 5);
            (0..20).map(|_| s.next_topk().unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn markov_sampler_predicts_graph_row() {
        let mut s = MarkovSampler::new(fixture(), 1, Some("B".into()), 5);
        let p = s.next_topk().unwrap();
        assert_eq!(p.labels().collect::<Vec<_>>(), ["C", "D"]);
        assert!(matches!(s.current(), Some("C") | Some("D")));
        s.observe("D");
        assert_eq!(s.next_topk().unwrap().labels().collect::<Vec<_>>(), ["A"]);
    }

    #[test]
    fn file_replay_exhausts() {
        let records: Vec<TopKPrediction> = (0..3)
            .map(|i| TopKPrediction::from_ranked([format!("l{i}")]).unwrap())
            .collect();
        let mut replay = FileReplay::new(records.clone());
        for r in &records {
            assert_eq!(&replay.next_topk().unwrap(), r);
        }
        assert_eq!(replay.next_topk(), Err(Error::SourceExhausted));
    }

    #[test]
    fn episodes() {
        let g = fixture();
        let a = sample_episode(&g, 30, 5).unwrap();
        assert_eq!(a, sample_episode(&g, 30, 5).unwrap());
        assert_eq!(a.len(), 30);
        for pair in a.windows(2) {
            assert!(g.count(&pair[0], &pair[1]) > 0);
        }
        let two = sample_episode(&g, 2, 9).unwrap();
        assert_eq!(two.len(), 2);
        assert!(g.count(&two[0], &two[1]) > 0);
        assert!(sample_episode(&g, 1, 0).is_err());
    }

    #[test]
    fn episodes_stop_at_absorbing_states() {
        let g = build_reference_graph(Level::Verb, &[vec!["a", "b"]]).unwrap();
        assert_eq!(sample_episode(&g, 10, 0).unwrap(), ["a", "b"]);
    }
}
