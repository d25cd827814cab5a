//! Live operator sessions.
//!
//! A session walks the reference graph one observation at a time. Each
//! observation is scored for anomaly against the current state, credited
//! with a time-weighted accuracy against the previously recommended Top-k,
//! and answered with guidance for the next step. [`SessionService`] holds
//! the shared graphs and dictionaries plus every live session; [`http`]
//! exposes it over JSON.

pub mod http;

use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::anomaly::{assess_transition, AnomalyConfig, StepAssessment};
use crate::error::{Error, Result};
use crate::graph::{row_entropy, ReferenceGraph, Successor};
use crate::guidance::{recommend_next, GuidanceOutcome};
use crate::model::{ActionDictionary, Level, PredictionEntry, ReferenceTimes, TopKPrediction};
use crate::numfmt::{self, REPORT_DIGITS};
use crate::predictor::{FileReplay, MarkovSampler, NoisyOracle, PredictionSource, SeededRng};
use crate::twsa::{evaluate_session, StepRecord, TwsaMode};

/// Where a session's Top-k predictions come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictorConfig {
    MarkovSampler {
        #[serde(default)]
        seed: u64,
    },
    NoisyOracle {
        ground_truth: Vec<String>,
        epsilon: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        drop_truth: bool,
    },
    /// Prediction file on the server's filesystem.
    FileReplay { path: PathBuf },
    /// Predictions supplied inline, replayed in order.
    Replay {
        predictions: Vec<Vec<PredictionEntry>>,
    },
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig::MarkovSampler { seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    pub graph_id: String,
    /// Defaults to the graph's full vocabulary.
    #[serde(default)]
    pub dictionary_id: Option<String>,
    /// Sampled uniformly over states with successors when absent.
    #[serde(default)]
    pub initial_state: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub predictor: PredictorConfig,
    #[serde(default)]
    pub anomaly: AnomalyConfig,
    #[serde(default)]
    pub twsa_mode: TwsaMode,
    #[serde(default)]
    pub expected_sequence: Option<Vec<String>>,
    /// Overrides the reference times registered with the graph.
    #[serde(default)]
    pub reference_times: Option<BTreeMap<String, f64>>,
}

impl CreateSessionRequest {
    pub fn new(graph_id: impl Into<String>) -> Self {
        CreateSessionRequest {
            graph_id: graph_id.into(),
            dictionary_id: None,
            initial_state: None,
            seed: 0,
            predictor: PredictorConfig::default(),
            anomaly: AnomalyConfig::default(),
            twsa_mode: TwsaMode::default(),
            expected_sequence: None,
            reference_times: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Warning {
    /// The state has no successors, guidance degraded to an empty Repeat.
    UnknownState,
    /// The prediction source ran dry; an empty Top-k was used.
    PredictionsExhausted,
}

/// Response to one observation; also the unit of a session's history.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepOutcome {
    pub index: usize,
    pub state_before: String,
    pub observed: String,
    pub duration_s: f64,
    pub assessment: StepAssessment,
    pub correct: bool,
    pub step_twsa: f64,
    pub running_twsa: f64,
    /// State guidance now refers to.
    pub state: String,
    pub prediction: TopKPrediction,
    pub guidance: GuidanceOutcome,
    pub pending_repeat: bool,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub state: String,
    pub prediction: TopKPrediction,
    pub guidance: GuidanceOutcome,
    pub pending_repeat: bool,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSnapshot {
    pub session_id: String,
    pub graph_id: String,
    pub dictionary_id: Option<String>,
    pub level: Level,
    pub anomaly: AnomalyConfig,
    pub twsa_mode: TwsaMode,
    pub initial_state: String,
    pub state: String,
    pub prediction: TopKPrediction,
    pub guidance: GuidanceOutcome,
    pub pending_repeat: bool,
    pub running_twsa: f64,
    pub history: Vec<StepOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessorsView {
    pub state: String,
    pub entropy: f64,
    pub successors: Vec<Successor>,
}

struct RegisteredGraph {
    graph: Arc<ReferenceGraph>,
    reference_times: Option<Arc<ReferenceTimes>>,
}

struct Session {
    id: String,
    graph_id: String,
    dictionary_id: Option<String>,
    graph: Arc<ReferenceGraph>,
    dictionary: Arc<ActionDictionary>,
    reference_times: Arc<ReferenceTimes>,
    source: Box<dyn PredictionSource>,
    anomaly: AnomalyConfig,
    twsa_mode: TwsaMode,
    expected: Option<Vec<String>>,
    initial_state: String,
    state: String,
    prediction: TopKPrediction,
    guidance: GuidanceOutcome,
    pending_repeat: bool,
    records: Vec<StepRecord>,
    history: Vec<StepOutcome>,
}

/// Fetches the next Top-k for `state` and derives guidance from it.
fn advise(
    graph: &ReferenceGraph,
    dictionary: &ActionDictionary,
    source: &mut dyn PredictionSource,
    state: &str,
) -> Result<(TopKPrediction, GuidanceOutcome, Vec<Warning>)> {
    let mut warnings = Vec::new();
    source.observe(state);
    let prediction = match source.next_topk() {
        Ok(p) => p,
        Err(Error::SourceExhausted) => {
            warnings.push(Warning::PredictionsExhausted);
            TopKPrediction::default()
        }
        Err(e) => return Err(e),
    };
    let guidance = match recommend_next(graph, state, &prediction, dictionary) {
        Ok(g) => g,
        Err(Error::UnknownState(_)) => {
            warnings.push(Warning::UnknownState);
            GuidanceOutcome::Repeat {
                suggestions: Vec::new(),
            }
        }
        Err(e) => return Err(e),
    };
    Ok((prediction, guidance, warnings))
}

impl Session {
    fn observe(&mut self, label: &str, duration_s: f64) -> Result<StepOutcome> {
        if !self.graph.contains(label) {
            return Err(Error::UnknownLabel(label.to_string()));
        }
        if !(duration_s > 0.0 && duration_s.is_finite()) {
            return Err(Error::NonPositiveDuration);
        }
        self.reference_times.get(label)?;

        let index = self.history.len();
        let state_before = self.state.clone();
        let assessment = StepAssessment {
            index,
            ..assess_transition(&self.graph, &state_before, label, &self.anomaly)
        };

        let mut records = self.records.clone();
        records.push(StepRecord {
            label: label.to_string(),
            duration_s,
            recommended: self.prediction.labels().map(str::to_string).collect(),
        });
        let expected_prefix = self.expected.as_deref().map(|e| {
            if records.len() <= e.len() {
                &e[..records.len()]
            } else {
                e
            }
        });
        let report = evaluate_session(
            &records,
            &self.reference_times,
            self.twsa_mode,
            expected_prefix,
        )?;

        // a pending repeat freezes the state for this observation
        let state = if self.pending_repeat {
            state_before.clone()
        } else {
            label.to_string()
        };
        let (prediction, guidance, warnings) =
            advise(&self.graph, &self.dictionary, self.source.as_mut(), &state)?;

        let outcome = StepOutcome {
            index,
            state_before,
            observed: label.to_string(),
            duration_s,
            assessment,
            correct: report.correct[index],
            step_twsa: report.step_scores[index],
            running_twsa: report.overall,
            state: state.clone(),
            prediction: prediction.clone(),
            pending_repeat: guidance.is_repeat(),
            guidance: guidance.clone(),
            warnings,
        };
        self.records = records;
        self.state = state;
        self.prediction = prediction;
        self.pending_repeat = guidance.is_repeat();
        self.guidance = guidance;
        self.history.push(outcome.clone());
        Ok(outcome)
    }

    fn running_twsa(&self) -> f64 {
        self.history.last().map_or(0.0, |h| h.running_twsa)
    }

    fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            session_id: self.id.clone(),
            graph_id: self.graph_id.clone(),
            dictionary_id: self.dictionary_id.clone(),
            level: self.graph.level(),
            anomaly: self.anomaly,
            twsa_mode: self.twsa_mode,
            initial_state: self.initial_state.clone(),
            state: self.state.clone(),
            prediction: self.prediction.clone(),
            guidance: self.guidance.clone(),
            pending_repeat: self.pending_repeat,
            running_twsa: self.running_twsa(),
            history: self.history.clone(),
        }
    }
}

/// Registry of graphs, dictionaries and live sessions. All methods take
/// `&self`; sessions are locked individually so independent sessions proceed
/// in parallel while observations on one session are applied in arrival
/// order.
#[derive(Default)]
pub struct SessionService {
    graphs: RwLock<BTreeMap<String, RegisteredGraph>>,
    dictionaries: RwLock<BTreeMap<String, Arc<ActionDictionary>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
    trace_dir: Option<PathBuf>,
}

impl SessionService {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends every observation of session `id` to `<dir>/<id>.jsonl`.
    pub fn with_trace_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.trace_dir = Some(dir.into());
        self
    }

    pub fn register_graph(
        &self,
        id: impl Into<String>,
        graph: ReferenceGraph,
        reference_times: Option<ReferenceTimes>,
    ) -> Result<()> {
        if let Some(times) = &reference_times {
            if times.level != graph.level() {
                return Err(Error::LevelMismatch {
                    expected: graph.level().to_string(),
                    found: times.level.to_string(),
                });
            }
        }
        self.graphs
            .write()
            .expect("graph registry poisoned")
            .insert(
                id.into(),
                RegisteredGraph {
                    graph: Arc::new(graph),
                    reference_times: reference_times.map(Arc::new),
                },
            );
        Ok(())
    }

    pub fn register_dictionary(&self, id: impl Into<String>, dictionary: ActionDictionary) {
        self.dictionaries
            .write()
            .expect("dictionary registry poisoned")
            .insert(id.into(), Arc::new(dictionary));
    }

    fn graph_entry(&self, id: &str) -> Result<(Arc<ReferenceGraph>, Option<Arc<ReferenceTimes>>)> {
        let graphs = self.graphs.read().expect("graph registry poisoned");
        let entry = graphs
            .get(id)
            .ok_or_else(|| Error::UnknownGraph(id.to_string()))?;
        Ok((entry.graph.clone(), entry.reference_times.clone()))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .expect("session registry poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownSession(id.to_string()))
    }

    pub fn create_session(&self, request: CreateSessionRequest) -> Result<SessionCreated> {
        let (graph, registered_times) = self.graph_entry(&request.graph_id)?;
        request.anomaly.validate()?;

        let dictionary = match &request.dictionary_id {
            Some(id) => {
                let dictionary = self
                    .dictionaries
                    .read()
                    .expect("dictionary registry poisoned")
                    .get(id)
                    .cloned()
                    .ok_or_else(|| Error::UnknownDictionary(id.clone()))?;
                dictionary.check_within(graph.level(), graph.vocab())?;
                dictionary
            }
            None => Arc::new(ActionDictionary::full(graph.level(), graph.vocab())),
        };

        let reference_times = match request.reference_times {
            Some(medians) => {
                if let Some((label, _)) =
                    medians.iter().find(|(_, t)| !(**t > 0.0 && t.is_finite()))
                {
                    return Err(Error::InvalidParameter(format!(
                        "reference time for {label:?} must be positive"
                    )));
                }
                Arc::new(ReferenceTimes {
                    level: graph.level(),
                    medians,
                })
            }
            None => registered_times.ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "graph {:?} has no reference times; supply reference_times",
                    request.graph_id
                ))
            })?,
        };

        if request.twsa_mode == TwsaMode::StrictSequence && request.expected_sequence.is_none() {
            return Err(Error::MissingExpectedSequence);
        }

        let initial_state = match request.initial_state {
            Some(state) => {
                if !graph.contains(&state) {
                    return Err(Error::UnknownLabel(state));
                }
                state
            }
            None => {
                let states: Vec<&str> = graph.states_with_successors().collect();
                let mut rng = SeededRng::new(request.seed);
                states[rng.below(states.len() as u64) as usize].to_string()
            }
        };

        let mut source: Box<dyn PredictionSource> = match request.predictor {
            PredictorConfig::MarkovSampler { seed } => Box::new(MarkovSampler::new(
                graph.clone(),
                seed,
                Some(initial_state.clone()),
                request.anomaly.k,
            )),
            PredictorConfig::NoisyOracle {
                ground_truth,
                epsilon,
                seed,
                drop_truth,
            } => Box::new(NoisyOracle::new(
                ground_truth,
                graph.vocab().iter().cloned(),
                epsilon,
                seed,
                drop_truth,
            )?),
            PredictorConfig::FileReplay { path } => Box::new(FileReplay::from_path(path)?),
            PredictorConfig::Replay { predictions } => Box::new(FileReplay::new(
                predictions
                    .into_iter()
                    .map(|entries| {
                        TopKPrediction::new(entries.into_iter().map(|e| (e.label, e.score)))
                    })
                    .collect::<Result<_>>()?,
            )),
        };

        let (prediction, guidance, warnings) =
            advise(&graph, &dictionary, source.as_mut(), &initial_state)?;

        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed) + 1);
        let session = Session {
            id: id.clone(),
            graph_id: request.graph_id,
            dictionary_id: request.dictionary_id,
            graph,
            dictionary,
            reference_times,
            source,
            anomaly: request.anomaly,
            twsa_mode: request.twsa_mode,
            expected: request.expected_sequence,
            initial_state: initial_state.clone(),
            state: initial_state.clone(),
            prediction: prediction.clone(),
            pending_repeat: guidance.is_repeat(),
            guidance: guidance.clone(),
            records: Vec::new(),
            history: Vec::new(),
        };
        self.sessions
            .write()
            .expect("session registry poisoned")
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(SessionCreated {
            session_id: id,
            state: initial_state,
            prediction,
            pending_repeat: guidance.is_repeat(),
            guidance,
            warnings,
        })
    }

    pub fn observe_step(
        &self,
        session_id: &str,
        label: &str,
        duration_s: f64,
    ) -> Result<StepOutcome> {
        let session = self.session(session_id)?;
        let mut session = session.lock().expect("session poisoned");
        let outcome = session.observe(label, duration_s)?;
        if let Some(dir) = &self.trace_dir {
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(dir.join(format!("{session_id}.jsonl")))?;
            writeln!(
                file,
                "{}",
                numfmt::to_canonical_line(&outcome, REPORT_DIGITS)
            )?;
        }
        Ok(outcome)
    }

    pub fn get_session(&self, session_id: &str) -> Result<SessionSnapshot> {
        let session = self.session(session_id)?;
        let snapshot = session.lock().expect("session poisoned").snapshot();
        Ok(snapshot)
    }

    /// Canonical serialized form of a registered graph.
    pub fn get_graph(&self, graph_id: &str) -> Result<String> {
        Ok(self.graph_entry(graph_id)?.0.to_canonical_string())
    }

    pub fn get_successors(&self, graph_id: &str, state: &str) -> Result<SuccessorsView> {
        let (graph, _) = self.graph_entry(graph_id)?;
        let row = graph.transition_row(state);
        Ok(SuccessorsView {
            state: row.state.clone(),
            entropy: row_entropy(&row),
            successors: row.successors,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_reference_graph;

    fn service() -> SessionService {
        let seq = vec!["A", "B", "C", "A", "B", "D", "A", "B", "C"];
        let graph = build_reference_graph(Level::Action, &[seq]).unwrap();
        let times = ReferenceTimes {
            level: Level::Action,
            medians: ["A", "B", "C", "D"]
                .iter()
                .map(|l| (l.to_string(), 2.0))
                .collect(),
        };
        let svc = SessionService::new();
        svc.register_graph("fixture", graph, Some(times)).unwrap();
        svc
    }

    fn replay(lists: &[&[&str]]) -> PredictorConfig {
        PredictorConfig::Replay {
            predictions: lists
                .iter()
                .map(|labels| {
                    TopKPrediction::from_ranked(labels.iter().copied())
                        .unwrap()
                        .entries()
                        .to_vec()
                })
                .collect(),
        }
    }

    #[test]
    fn creation() {
        let svc = service();
        let a = svc
            .create_session(CreateSessionRequest::new("fixture"))
            .unwrap();
        let b = svc
            .create_session(CreateSessionRequest::new("fixture"))
            .unwrap();
        assert_ne!(a.session_id, b.session_id);
        assert!(svc.get_session(&a.session_id).unwrap().history.is_empty());
        assert!(matches!(
            svc.create_session(CreateSessionRequest::new("nope")),
            Err(Error::UnknownGraph(_))
        ));
        let mut req = CreateSessionRequest::new("fixture");
        req.dictionary_id = Some("missing".into());
        assert!(matches!(
            svc.create_session(req),
            Err(Error::UnknownDictionary(_))
        ));
    }

    #[test]
    fn best_case_observation() {
        let svc = service();
        let mut req = CreateSessionRequest::new("fixture");
        req.initial_state = Some("B".into());
        req.predictor = replay(&[&["C", "D"], &["A"]]);
        let created = svc.create_session(req).unwrap();
        assert_eq!(created.guidance.recommended_label(), Some("C"));
        let step = svc.observe_step(&created.session_id, "C", 1.5).unwrap();
        assert_eq!(step.assessment.a, 0.0);
        assert_eq!(step.step_twsa, 1.0);
        assert_eq!(step.running_twsa, 1.0);
        assert_eq!(step.state, "C");
        assert_eq!(step.guidance.recommended_label(), Some("A"));
    }

    #[test]
    fn null_case_freezes_state() {
        let svc = service();
        let mut req = CreateSessionRequest::new("fixture");
        req.initial_state = Some("A".into());
        req.predictor = replay(&[&["B"], &["A"], &["C", "D"]]);
        let created = svc.create_session(req).unwrap();
        let id = created.session_id;
        // at B the model predicts A, which is not a successor of B
        let step = svc.observe_step(&id, "B", 2.0).unwrap();
        assert_eq!(
            step.guidance,
            GuidanceOutcome::Repeat {
                suggestions: vec![
                    crate::guidance::Suggestion {
                        label: "C".into(),
                        probability: 2.0 / 3.0
                    },
                    crate::guidance::Suggestion {
                        label: "D".into(),
                        probability: 1.0 / 3.0
                    },
                ]
            }
        );
        assert!(step.pending_repeat);
        // the repeat is assessed from B and the state stays at B
        let step = svc.observe_step(&id, "D", 2.0).unwrap();
        assert_eq!(step.state_before, "B");
        assert_eq!(step.state, "B");
        assert!(step.assessment.a > 0.0);
        assert_eq!(step.guidance.recommended_label(), Some("C"));
        assert!(!step.pending_repeat);
    }

    #[test]
    fn observation_errors() {
        let svc = service();
        let id = svc
            .create_session(CreateSessionRequest::new("fixture"))
            .unwrap()
            .session_id;
        assert!(matches!(
            svc.observe_step("s999", "A", 1.0),
            Err(Error::UnknownSession(_))
        ));
        assert!(matches!(
            svc.observe_step(&id, "Q", 1.0),
            Err(Error::UnknownLabel(_))
        ));
        assert!(matches!(
            svc.observe_step(&id, "A", 0.0),
            Err(Error::NonPositiveDuration)
        ));
        assert!(svc.get_session(&id).unwrap().history.is_empty());
    }

    #[test]
    fn trace_length_and_successors() {
        let svc = service();
        let id = svc
            .create_session(CreateSessionRequest::new("fixture"))
            .unwrap()
            .session_id;
        for label in ["A", "B", "C", "A"] {
            svc.observe_step(&id, label, 1.0).unwrap();
        }
        assert_eq!(svc.get_session(&id).unwrap().history.len(), 4);
        let row = svc.get_successors("fixture", "B").unwrap();
        let got: Vec<_> = row
            .successors
            .iter()
            .map(|s| (s.label.as_str(), s.probability))
            .collect();
        assert_eq!(got, [("C", 2.0 / 3.0), ("D", 1.0 / 3.0)]);
        assert!(svc
            .get_successors("fixture", "Z")
            .unwrap()
            .successors
            .is_empty());
        assert!(matches!(
            svc.get_successors("x", "B"),
            Err(Error::UnknownGraph(_))
        ));
        assert!(svc
            .get_graph("fixture")
            .unwrap()
            .contains("\"total_transitions\": 8"));
    }

    #[test]
    fn exhausted_predictions_degrade_to_repeat() {
        let svc = service();
        let mut req = CreateSessionRequest::new("fixture");
        req.initial_state = Some("A".into());
        req.predictor = replay(&[&["B"]]);
        let id = svc.create_session(req).unwrap().session_id;
        let step = svc.observe_step(&id, "B", 1.0).unwrap();
        assert_eq!(step.warnings, [Warning::PredictionsExhausted]);
        assert!(step.guidance.is_repeat());
    }
}
