//! C interface to the reference graph, guidance, anomaly and TWSA routines.
//!
//! Graphs cross the boundary as opaque `OpgGraph` handles. Every fallible
//! function returns an [`OpgStatus`]; on failure a description is available
//! from [`opg_last_error_message`] until the next call on the same thread.
//! Strings returned through `char **` out-parameters are owned by the caller
//! and must be released with [`opg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use opguide::{
    assess_transition, build_reference_graph, derive_sequences, io, recommend_next, row_entropy,
    step_twsa, ActionDictionary, AnomalyConfig, Error, Factor2Mode, GuidanceOutcome, Level,
    ReferenceGraph, TopKPrediction,
};

/// Opaque reference graph handle.
pub struct OpgGraph(ReferenceGraph);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    MalformedInput = 3,
    EmptyGraph = 4,
    UnknownState = 5,
    InvalidArgument = 6,
    NonPositiveDuration = 7,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpgGuidanceKind {
    Recommend = 0,
    Repeat = 1,
}

/// Scored transition. `rank` is 0 when the observed label is not a successor.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OpgAssessment {
    pub rank: u32,
    pub probability: f64,
    pub entropy: f64,
    pub certainty: f64,
    pub score: f64,
    pub unknown_state: bool,
}

/// Ranks are 0 for a repeat outcome.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpgGuidance {
    pub kind: OpgGuidanceKind,
    pub graph_rank: u32,
    pub model_rank: u32,
    pub rank_sum: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message);
}

struct Failure(OpgStatus, String);

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let status = match err {
            Error::EmptyGraph => OpgStatus::EmptyGraph,
            Error::UnknownState(_) => OpgStatus::UnknownState,
            Error::NonPositiveDuration => OpgStatus::NonPositiveDuration,
            Error::MalformedGraphFile { .. }
            | Error::MalformedRow { .. }
            | Error::MalformedPrediction { .. }
            | Error::MalformedSession { .. } => OpgStatus::MalformedInput,
            _ => OpgStatus::InvalidArgument,
        };
        Failure(status, err.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(OpgStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, translating errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> OpgStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            OpgStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            OpgStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure(OpgStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn str_array<'a>(
    ptr: *const *const c_char,
    len: usize,
    what: &str,
) -> Result<Vec<&'a str>, Failure> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    (0..len).map(|i| str_arg(*ptr.add(i), what)).collect()
}

unsafe fn graph_arg<'a>(graph: *const OpgGraph) -> Result<&'a ReferenceGraph, Failure> {
    graph.as_ref().map(|g| &g.0).ok_or_else(|| null("graph"))
}

fn into_c_string(text: String) -> *mut c_char {
    CString::new(text).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message describing the last failure on this thread; empty after success.
/// The pointer stays valid until the next `opg_*` call on the same thread.
#[no_mangle]
pub extern "C" fn opg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Builds a graph from annotation CSV text at `level` ("action", "verb" or
/// "noun").
///
/// # Safety
/// `csv` and `level` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn opg_graph_from_annotations(
    csv: *const c_char,
    level: *const c_char,
    out: *mut *mut OpgGraph,
) -> OpgStatus {
    guard(|| {
        let csv = str_arg(csv, "csv")?;
        let level: Level = str_arg(level, "level")?.parse()?;
        if out.is_null() {
            return Err(null("out"));
        }
        let corpus = io::parse_annotations(csv)?;
        let graph = build_reference_graph(level, &derive_sequences(&corpus, level))?;
        *out = Box::into_raw(Box::new(OpgGraph(graph)));
        Ok(())
    })
}

/// Loads a graph from its canonical JSON encoding.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn opg_graph_from_json(
    json: *const c_char,
    out: *mut *mut OpgGraph,
) -> OpgStatus {
    guard(|| {
        let json = str_arg(json, "json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let graph = ReferenceGraph::deserialize(json.as_bytes())?;
        *out = Box::into_raw(Box::new(OpgGraph(graph)));
        Ok(())
    })
}

/// Canonical JSON encoding of `graph`; free with [`opg_string_free`].
///
/// # Safety
/// `graph` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn opg_graph_to_json(
    graph: *const OpgGraph,
    out: *mut *mut c_char,
) -> OpgStatus {
    guard(|| {
        let graph = graph_arg(graph)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = into_c_string(graph.to_canonical_string());
        Ok(())
    })
}

/// Releases a graph handle. Null is ignored.
///
/// # Safety
/// `graph` must come from an `opg_graph_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn opg_graph_free(graph: *mut OpgGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn opg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `graph` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn opg_graph_total_transitions(
    graph: *const OpgGraph,
    out: *mut u64,
) -> OpgStatus {
    guard(|| {
        let graph = graph_arg(graph)?;
        *out.as_mut().ok_or_else(|| null("out"))? = graph.total_transitions();
        Ok(())
    })
}

/// Entropy in nats of the successor distribution of `state` (0 when the
/// state has no successors).
///
/// # Safety
/// `graph` must be a live handle, `state` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn opg_graph_row_entropy(
    graph: *const OpgGraph,
    state: *const c_char,
    out: *mut f64,
) -> OpgStatus {
    guard(|| {
        let graph = graph_arg(graph)?;
        let state = str_arg(state, "state")?;
        *out.as_mut().ok_or_else(|| null("out"))? = row_entropy(&graph.transition_row(state));
        Ok(())
    })
}

/// Anomaly score of the transition `state -> observed`.
///
/// # Safety
/// `graph` must be a live handle, strings NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn opg_assess_transition(
    graph: *const OpgGraph,
    state: *const c_char,
    observed: *const c_char,
    use_certainty: bool,
    literal_factor2: bool,
    out: *mut OpgAssessment,
) -> OpgStatus {
    guard(|| {
        let graph = graph_arg(graph)?;
        let state = str_arg(state, "state")?;
        let observed = str_arg(observed, "observed")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let config = AnomalyConfig {
            use_certainty,
            factor2_mode: if literal_factor2 {
                Factor2Mode::Literal
            } else {
                Factor2Mode::Corrected
            },
            ..AnomalyConfig::default()
        };
        let s = assess_transition(graph, state, observed, &config);
        *out = OpgAssessment {
            rank: s.r.map_or(0, |r| r as u32),
            probability: s.p,
            entropy: s.h,
            certainty: s.c,
            score: s.a,
            unknown_state: s.unknown_state,
        };
        Ok(())
    })
}

/// Next-action guidance from `state`. `predicted` lists the anticipated
/// labels best first (at most 5). With `dictionary_len == 0` the whole graph
/// vocabulary is admitted. `out_json`, when non-null, receives the full
/// outcome as JSON.
///
/// # Safety
/// `graph` must be a live handle; array pointers must reference the stated
/// number of NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn opg_recommend_next(
    graph: *const OpgGraph,
    state: *const c_char,
    predicted: *const *const c_char,
    predicted_len: usize,
    dictionary: *const *const c_char,
    dictionary_len: usize,
    out: *mut OpgGuidance,
    out_json: *mut *mut c_char,
) -> OpgStatus {
    guard(|| {
        let graph = graph_arg(graph)?;
        let state = str_arg(state, "state")?;
        let predicted = str_array(predicted, predicted_len, "predicted")?;
        let dictionary = if dictionary_len == 0 {
            ActionDictionary::full(graph.level(), graph.vocab())
        } else {
            ActionDictionary::new(
                graph.level(),
                str_array(dictionary, dictionary_len, "dictionary")?,
            )?
        };
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let prediction = TopKPrediction::from_ranked(predicted)?;
        let outcome = recommend_next(graph, state, &prediction, &dictionary)?;
        *out = match &outcome {
            GuidanceOutcome::Recommend(r) => OpgGuidance {
                kind: OpgGuidanceKind::Recommend,
                graph_rank: r.graph_rank as u32,
                model_rank: r.model_rank as u32,
                rank_sum: r.rank_sum as u32,
            },
            GuidanceOutcome::Repeat { .. } => OpgGuidance {
                kind: OpgGuidanceKind::Repeat,
                graph_rank: 0,
                model_rank: 0,
                rank_sum: 0,
            },
        };
        if !out_json.is_null() {
            let json = serde_json_string(&outcome);
            *out_json = into_c_string(json);
        }
        Ok(())
    })
}

fn serde_json_string(outcome: &GuidanceOutcome) -> String {
    opguide::numfmt::to_canonical_line(outcome, opguide::numfmt::REPORT_DIGITS)
}

/// Time-weighted accuracy of one step.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn opg_step_twsa(
    reference_s: f64,
    actual_s: f64,
    correct: bool,
    out: *mut f64,
) -> OpgStatus {
    guard(|| {
        *out.as_mut().ok_or_else(|| null("out"))? = step_twsa(reference_s, actual_s, correct)?;
        Ok(())
    })
}
