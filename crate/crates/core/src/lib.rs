//! Operator guidance and anomaly scoring for multi-step assembly workflows.
//!
//! A first-order Markov reference graph is learned from annotated action
//! sequences. On top of it the crate provides:
//!
//! * next-action recommendation that fuses graph successors with an external
//!   Top-k anticipation list through an action dictionary ([`guidance`]),
//! * per-transition anomaly severity informed by the entropy of the current
//!   state's successor distribution ([`anomaly`]),
//! * time-weighted sequence accuracy for operator efficiency ([`twsa`]),
//! * deterministic prediction sources standing in for an anticipation model
//!   ([`predictor`]),
//! * file formats, a session service with an HTTP front end, and the CLI.

pub mod anomaly;
pub mod cli;
mod error;
pub mod graph;
pub mod guidance;
pub mod io;
pub mod model;
pub mod numfmt;
pub mod predictor;
pub mod service;
pub mod twsa;

pub use anomaly::{assess_sequence, assess_transition, observed_certainty, topk_next};
pub use anomaly::{AnomalyConfig, AnomalyReport, Factor2Mode, StepAssessment};
pub use error::{Error, Result};
pub use graph::{build_reference_graph, row_entropy, ReferenceGraph, Successor, TransitionRow};
pub use guidance::{recommend_next, GuidanceOutcome};
pub use model::{
    compose_action_label, compute_reference_times, derive_sequences, ActionDictionary, ActionLabel,
    AnnotatedSegment, Level, ReferenceTimes, TopKPrediction, TrainingCorpus,
};
pub use twsa::{evaluate_session, step_twsa, StepRecord, TwsaMode, TwsaReport};
