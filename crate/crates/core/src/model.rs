//! Domain types shared by every stage: labels, annotated segments, training
//! corpora, dictionaries, Top-k predictions and reference durations.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Granularity of the labels a graph or corpus projection works with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    /// `verb_noun` composite.
    Action,
    Verb,
    Noun,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Action => "action",
            Level::Verb => "verb",
            Level::Noun => "noun",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "action" => Ok(Level::Action),
            "verb" => Ok(Level::Verb),
            "noun" => Ok(Level::Noun),
            other => Err(Error::UnknownLevel(other.to_string())),
        }
    }
}

/// Checks the token rules shared by every label: non-empty, no commas, no
/// whitespace of any kind.
pub fn validate_token(text: &str) -> Result<()> {
    if text.is_empty() {
        return Err(Error::EmptyToken);
    }
    if text.contains(',') || text.chars().any(char::is_whitespace) {
        return Err(Error::InvalidLabel(text.to_string()));
    }
    Ok(())
}

/// A validated label at a given level.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionLabel {
    level: Level,
    text: String,
}

impl ActionLabel {
    pub fn new(level: Level, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        validate_token(&text)?;
        if level == Level::Action {
            let well_formed = text
                .split_once('_')
                .is_some_and(|(verb, noun)| !verb.is_empty() && !noun.is_empty());
            if !well_formed {
                return Err(Error::InvalidLabel(text));
            }
        }
        Ok(ActionLabel { level, text })
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

impl fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Joins a verb and a noun into an action-level label (`take` + `bolt` gives
/// `take_bolt`).
pub fn compose_action_label(verb: &str, noun: &str) -> Result<ActionLabel> {
    validate_token(verb)?;
    validate_token(noun)?;
    ActionLabel::new(Level::Action, format!("{verb}_{noun}"))
}

/// One annotated action occurrence in a training video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedSegment {
    pub video_id: String,
    pub verb: String,
    pub noun: String,
    pub start_s: f64,
    pub end_s: f64,
}

impl AnnotatedSegment {
    pub fn new(
        video_id: impl Into<String>,
        verb: impl Into<String>,
        noun: impl Into<String>,
        start_s: f64,
        end_s: f64,
    ) -> Result<Self> {
        let segment = AnnotatedSegment {
            video_id: video_id.into(),
            verb: verb.into(),
            noun: noun.into(),
            start_s,
            end_s,
        };
        segment.validate()?;
        Ok(segment)
    }

    pub fn validate(&self) -> Result<()> {
        validate_token(&self.video_id)?;
        validate_token(&self.verb)?;
        validate_token(&self.noun)?;
        if !self.start_s.is_finite() || self.start_s < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "start_s must be a non-negative number, got {}",
                self.start_s
            )));
        }
        if !self.end_s.is_finite() || self.end_s <= self.start_s {
            return Err(Error::NonPositiveDuration);
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }

    /// Label of this segment projected to `level`.
    pub fn label(&self, level: Level) -> String {
        match level {
            Level::Action => format!("{}_{}", self.verb, self.noun),
            Level::Verb => self.verb.clone(),
            Level::Noun => self.noun.clone(),
        }
    }

    fn time_order(&self, other: &Self) -> Ordering {
        self.start_s
            .total_cmp(&other.start_s)
            .then_with(|| self.end_s.total_cmp(&other.end_s))
            .then_with(|| self.verb.cmp(&other.verb))
            .then_with(|| self.noun.cmp(&other.noun))
    }
}

/// Annotated training videos, each an independent action sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingCorpus {
    videos: BTreeMap<String, Vec<AnnotatedSegment>>,
}

impl TrainingCorpus {
    /// Groups segments by video and sorts each video by start time, then end
    /// time, then label.
    pub fn from_segments(segments: impl IntoIterator<Item = AnnotatedSegment>) -> Self {
        let mut videos: BTreeMap<String, Vec<AnnotatedSegment>> = BTreeMap::new();
        for segment in segments {
            videos
                .entry(segment.video_id.clone())
                .or_default()
                .push(segment);
        }
        for segments in videos.values_mut() {
            segments.sort_by(AnnotatedSegment::time_order);
        }
        TrainingCorpus { videos }
    }

    pub fn videos(&self) -> &BTreeMap<String, Vec<AnnotatedSegment>> {
        &self.videos
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }

    pub fn segments(&self) -> impl Iterator<Item = &AnnotatedSegment> {
        self.videos.values().flatten()
    }
}

/// One label sequence per video, in time order, projected to `level`.
/// Sequences never span video boundaries.
pub fn derive_sequences(corpus: &TrainingCorpus, level: Level) -> Vec<Vec<String>> {
    corpus
        .videos
        .values()
        .map(|segments| segments.iter().map(|s| s.label(level)).collect())
        .collect()
}

/// Median with the mean-of-central-pair convention for even counts.
/// Returns `None` for an empty slice.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    })
}

/// Median training duration per label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTimes {
    pub level: Level,
    pub medians: BTreeMap<String, f64>,
}

impl ReferenceTimes {
    pub fn get(&self, label: &str) -> Result<f64> {
        self.medians
            .get(label)
            .copied()
            .ok_or_else(|| Error::MissingReferenceTime(label.to_string()))
    }
}

pub fn compute_reference_times(corpus: &TrainingCorpus, level: Level) -> ReferenceTimes {
    let mut durations: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for segment in corpus.segments() {
        durations
            .entry(segment.label(level))
            .or_default()
            .push(segment.duration());
    }
    let medians = durations
        .into_iter()
        .filter_map(|(label, values)| median(&values).map(|m| (label, m)))
        .collect();
    ReferenceTimes { level, medians }
}

/// Largest Top-k list accepted from an anticipation source.
pub const MAX_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionEntry {
    pub label: String,
    pub score: f64,
}

/// Ranked anticipation output: at most [`MAX_K`] distinct labels ordered by
/// descending score, ties broken by ascending label.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
#[serde(transparent)]
pub struct TopKPrediction {
    entries: Vec<PredictionEntry>,
}

impl TopKPrediction {
    pub fn new(entries: impl IntoIterator<Item = (String, f64)>) -> Result<Self> {
        let mut entries: Vec<PredictionEntry> = entries
            .into_iter()
            .map(|(label, score)| PredictionEntry { label, score })
            .collect();
        if entries.len() > MAX_K {
            return Err(Error::InvalidPrediction(format!(
                "{} entries exceed the maximum of {MAX_K}",
                entries.len()
            )));
        }
        let mut seen = HashSet::new();
        for entry in &entries {
            validate_token(&entry.label)?;
            if !entry.score.is_finite() {
                return Err(Error::InvalidPrediction(format!(
                    "score for {:?} is not finite",
                    entry.label
                )));
            }
            if !seen.insert(entry.label.as_str()) {
                return Err(Error::InvalidPrediction(format!(
                    "duplicate label {:?}",
                    entry.label
                )));
            }
        }
        entries.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.label.cmp(&b.label))
        });
        Ok(TopKPrediction { entries })
    }

    /// Builds a prediction from labels already in rank order, assigning
    /// strictly decreasing synthetic scores.
    pub fn from_ranked<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let n = labels.len() as f64;
        Self::new(
            labels
                .into_iter()
                .enumerate()
                .map(|(i, label)| (label, (n - i as f64) / n)),
        )
    }

    pub fn entries(&self) -> &[PredictionEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.label.as_str())
    }

    /// 1-based position of `label` in the list.
    pub fn rank_of(&self, label: &str) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.label == label)
            .map(|i| i + 1)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.rank_of(label).is_some()
    }
}

/// Set of context-valid labels gating both graph and model candidates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionDictionary {
    pub level: Level,
    pub members: BTreeSet<String>,
}

impl ActionDictionary {
    pub fn new<S: Into<String>>(
        level: Level,
        members: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let members: BTreeSet<String> = members.into_iter().map(Into::into).collect();
        for member in &members {
            validate_token(member)?;
        }
        Ok(ActionDictionary { level, members })
    }

    /// Dictionary admitting every label of `vocabulary`.
    pub fn full<'a>(level: Level, vocabulary: impl IntoIterator<Item = &'a String>) -> Self {
        ActionDictionary {
            level,
            members: vocabulary.into_iter().cloned().collect(),
        }
    }

    /// Checks that the dictionary is a subset of `vocabulary` at `level`.
    pub fn check_within(&self, level: Level, vocabulary: &BTreeSet<String>) -> Result<()> {
        if self.level != level {
            return Err(Error::LevelMismatch {
                expected: level.to_string(),
                found: self.level.to_string(),
            });
        }
        match self.members.iter().find(|m| !vocabulary.contains(*m)) {
            Some(stray) => Err(Error::DictionaryLabelNotInVocabulary(stray.clone())),
            None => Ok(()),
        }
    }

    pub fn contains(&self, label: &str) -> bool {
        self.members.contains(label)
    }

    pub fn remove(&mut self, label: &str) -> bool {
        self.members.remove(label)
    }
}
