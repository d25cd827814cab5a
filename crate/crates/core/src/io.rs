//! Text formats read and written by the CLI and the service.
//!
//! * annotations: CSV with header `video_id,verb,noun,start_s,end_s`
//! * predictions: JSON lines `{"step": n, "topk": [{"label", "score"}]}`
//! * dictionaries and sequences: one label per line, `#` starts a comment
//! * sessions: JSON lines `{"label", "duration_s", "recommended": [..]}`
//! * score reports: JSON lines, one record per assessed step
//!
//! Decimal numbers always use a dot separator and are parsed without any
//! locale handling.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::anomaly::{AnomalyReport, StepAssessment};
use crate::error::{Error, Result};
use crate::guidance::Suggestion;
use crate::model::{
    validate_token, ActionDictionary, AnnotatedSegment, Level, TopKPrediction, TrainingCorpus,
};
use crate::numfmt::{self, REPORT_DIGITS};
use crate::twsa::StepRecord;

pub const ANNOTATION_HEADER: [&str; 5] = ["video_id", "verb", "noun", "start_s", "end_s"];

fn parse_seconds(field: &str, name: &str, line: usize) -> Result<f64> {
    let value: f64 = field.trim().parse().map_err(|_| Error::MalformedRow {
        line,
        reason: format!("{name} {field:?} is not a number"),
    })?;
    if !value.is_finite() {
        return Err(Error::MalformedRow {
            line,
            reason: format!("{name} {field:?} is not finite"),
        });
    }
    Ok(value)
}

pub fn parse_annotations(text: &str) -> Result<TrainingCorpus> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => {
            return Err(Error::MalformedRow {
                line: 1,
                reason: e.to_string(),
            })
        }
        None => {
            return Err(Error::MalformedRow {
                line: 1,
                reason: "missing header".into(),
            })
        }
    };
    let fields: Vec<&str> = header.iter().map(str::trim).collect();
    if fields != ANNOTATION_HEADER {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("expected header {}", ANNOTATION_HEADER.join(",")),
        });
    }

    let mut segments = Vec::new();
    for record in records {
        let record = record.map_err(|e| Error::MalformedRow {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() != ANNOTATION_HEADER.len() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected 5 columns, found {}", record.len()),
            });
        }
        let start_s = parse_seconds(&record[3], "start_s", line)?;
        let end_s = parse_seconds(&record[4], "end_s", line)?;
        if end_s <= start_s {
            return Err(Error::MalformedRow {
                line,
                reason: format!("end_s {end_s} is not after start_s {start_s}"),
            });
        }
        let segment = AnnotatedSegment::new(&record[0], &record[1], &record[2], start_s, end_s)
            .map_err(|e| Error::MalformedRow {
                line,
                reason: e.to_string(),
            })?;
        segments.push(segment);
    }
    Ok(TrainingCorpus::from_segments(segments))
}

pub fn write_annotations(corpus: &TrainingCorpus) -> String {
    let mut out = ANNOTATION_HEADER.join(",");
    out.push('\n');
    for s in corpus.segments() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.video_id, s.verb, s.noun, s.start_s, s.end_s
        );
    }
    out
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionEntryRecord {
    label: String,
    score: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionRecord {
    step: u64,
    topk: Vec<PredictionEntryRecord>,
}

fn json_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn parse_predictions(text: &str) -> Result<Vec<TopKPrediction>> {
    let mut out = Vec::new();
    let mut last_step: Option<u64> = None;
    for (line, raw) in json_lines(text) {
        let bad = |reason: String| Error::MalformedPrediction { line, reason };
        let record: PredictionRecord = serde_json::from_str(raw).map_err(|e| bad(e.to_string()))?;
        if last_step.is_some_and(|prev| record.step <= prev) {
            return Err(bad(format!("step {} does not increase", record.step)));
        }
        last_step = Some(record.step);
        if record.topk.is_empty() {
            return Err(bad("empty topk list".into()));
        }
        if record.topk.windows(2).any(|w| w[1].score >= w[0].score) {
            return Err(bad("scores must be strictly descending".into()));
        }
        let prediction = TopKPrediction::new(record.topk.into_iter().map(|e| (e.label, e.score)))
            .map_err(|e| bad(e.to_string()))?;
        out.push(prediction);
    }
    Ok(out)
}

pub fn write_predictions(predictions: &[TopKPrediction]) -> String {
    let mut out = String::new();
    for (step, p) in predictions.iter().enumerate() {
        let record = PredictionRecord {
            step: step as u64,
            topk: p
                .entries()
                .iter()
                .map(|e| PredictionEntryRecord {
                    label: e.label.clone(),
                    score: e.score,
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("prediction records serialize"));
        out.push('\n');
    }
    out
}

/// Non-empty, non-comment lines with surrounding whitespace removed.
fn label_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn parse_dictionary(text: &str, level: Level) -> Result<ActionDictionary> {
    let mut labels = Vec::new();
    for (_, label) in label_lines(text) {
        validate_token(label)?;
        labels.push(label);
    }
    ActionDictionary::new(level, labels)
}

pub fn write_dictionary(dictionary: &ActionDictionary) -> String {
    dictionary
        .members
        .iter()
        .map(|m| format!("{m}\n"))
        .collect()
}

pub fn parse_sequence(text: &str) -> Result<Vec<String>> {
    label_lines(text)
        .map(|(_, label)| validate_token(label).map(|_| label.to_string()))
        .collect()
}

pub fn write_sequence<S: AsRef<str>>(labels: &[S]) -> String {
    labels.iter().map(|l| format!("{}\n", l.as_ref())).collect()
}

pub fn parse_session(text: &str) -> Result<Vec<StepRecord>> {
    json_lines(text)
        .map(|(line, raw)| {
            let bad = |reason: String| Error::MalformedSession { line, reason };
            let record: StepRecord = serde_json::from_str(raw).map_err(|e| bad(e.to_string()))?;
            validate_token(&record.label).map_err(|e| bad(e.to_string()))?;
            if !(record.duration_s > 0.0 && record.duration_s.is_finite()) {
                return Err(bad("duration_s must be positive".into()));
            }
            Ok(record)
        })
        .collect()
}

pub fn write_session(records: &[StepRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("step records serialize") + "\n")
        .collect()
}

/// One JSON line per step of the full trace, reals at 9 significant digits.
pub fn write_score_report(report: &AnomalyReport) -> String {
    report
        .full_trace
        .iter()
        .map(|step| numfmt::to_canonical_line(step, REPORT_DIGITS) + "\n")
        .collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreRecord {
    index: usize,
    state: String,
    observed: String,
    r: Option<usize>,
    p: f64,
    #[serde(rename = "H")]
    h: f64,
    c: f64,
    a: f64,
    suggestions: Vec<SuggestionRecord>,
    unknown_state: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SuggestionRecord {
    label: String,
    probability: f64,
}

pub fn parse_score_report(text: &str) -> Result<Vec<StepAssessment>> {
    json_lines(text)
        .map(|(line, raw)| {
            let r: ScoreRecord = serde_json::from_str(raw)
                .map_err(|e| Error::InvalidParameter(format!("score report line {line}: {e}")))?;
            Ok(StepAssessment {
                index: r.index,
                state: r.state,
                observed: r.observed,
                r: r.r,
                p: r.p,
                h: r.h,
                c: r.c,
                a: r.a,
                suggestions: r
                    .suggestions
                    .into_iter()
                    .map(|s| Suggestion {
                        label: s.label,
                        probability: s.probability,
                    })
                    .collect(),
                unknown_state: r.unknown_state,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::derive_sequences;

    #[test]
    fn parses_valid_annotations() {
        let text = "video_id,verb,noun,start_s,end_s\nv1,take,bolt,0.0,1.5\nv1,put,bolt,1.5,2.0\n";
        let corpus = parse_annotations(text).unwrap();
        assert_eq!(corpus.videos().len(), 1);
        assert_eq!(corpus.videos()["v1"].len(), 2);
    }

    #[test]
    fn rejects_bad_rows() {
        let zero = "video_id,verb,noun,start_s,end_s\nv1,take,bolt,1.0,1.0\n";
        assert!(matches!(
            parse_annotations(zero),
            Err(Error::MalformedRow { line: 2, .. })
        ));
        let text = "video_id,verb,noun,start_s,end_s\nv1,take,bolt,0,1\nv1,take,bolt,abc,2\n";
        assert!(matches!(
            parse_annotations(text),
            Err(Error::MalformedRow { line: 3, .. })
        ));
        let cols = "video_id,verb,noun,start_s,end_s\nv1,take,0,1\n";
        assert!(matches!(
            parse_annotations(cols),
            Err(Error::MalformedRow { line: 2, .. })
        ));
        let header = "video,verb,noun,start,end\n";
        assert!(matches!(
            parse_annotations(header),
            Err(Error::MalformedRow { line: 1, .. })
        ));
        let comma_locale = "video_id,verb,noun,start_s,end_s\nv1,take,bolt,\"0,5\",1\n";
        assert!(parse_annotations(comma_locale).is_err());
    }

    #[test]
    fn out_of_order_rows_are_sorted() {
        let text = "video_id,verb,noun,start_s,end_s\n\
                    v1,c,x,4,5\nv1,a,x,0,1\nv2,z,x,1,2\nv1,b,x,2,3\n";
        let corpus = parse_annotations(text).unwrap();
        // independent: sort (start, verb) tuples per video
        let mut rows: Vec<(&str, f64, &str)> = vec![
            ("v1", 4.0, "c"),
            ("v1", 0.0, "a"),
            ("v2", 1.0, "z"),
            ("v1", 2.0, "b"),
        ];
        rows.sort_by(|a, b| a.0.cmp(b.0).then(a.1.total_cmp(&b.1)));
        let v1: Vec<String> = rows
            .iter()
            .filter(|r| r.0 == "v1")
            .map(|r| r.2.to_string())
            .collect();
        assert_eq!(derive_sequences(&corpus, Level::Verb)[0], v1);
    }

    #[test]
    fn annotations_round_trip() {
        let text = "video_id,verb,noun,start_s,end_s\nv2,take,bolt,0.25,1.5\nv1,put,bolt,1.5,2\n";
        let corpus = parse_annotations(text).unwrap();
        assert_eq!(
            parse_annotations(&write_annotations(&corpus)).unwrap(),
            corpus
        );
    }

    #[test]
    fn prediction_records() {
        let five = r#"{"step":0,"topk":[{"label":"a","score":0.5},{"label":"b","score":0.2},{"label":"c","score":0.1},{"label":"d","score":0.05},{"label":"e","score":0.01}]}"#;
        let parsed = parse_predictions(five).unwrap();
        assert_eq!(parsed[0].len(), 5);
        let ascending =
            r#"{"step":0,"topk":[{"label":"a","score":0.1},{"label":"b","score":0.2}]}"#;
        assert!(matches!(
            parse_predictions(ascending),
            Err(Error::MalformedPrediction { line: 1, .. })
        ));
        let dup = r#"{"step":0,"topk":[{"label":"a","score":0.3},{"label":"a","score":0.2}]}"#;
        assert!(matches!(
            parse_predictions(dup),
            Err(Error::MalformedPrediction { line: 1, .. })
        ));
        let tied = r#"{"step":0,"topk":[{"label":"a","score":0.3},{"label":"b","score":0.3}]}"#;
        assert!(parse_predictions(tied).is_err());
        let steps = "{\"step\":1,\"topk\":[{\"label\":\"a\",\"score\":1}]}\n{\"step\":1,\"topk\":[{\"label\":\"a\",\"score\":1}]}";
        assert!(matches!(
            parse_predictions(steps),
            Err(Error::MalformedPrediction { line: 2, .. })
        ));
        assert_eq!(
            parse_predictions(&write_predictions(&parsed)).unwrap(),
            parsed
        );
    }

    #[test]
    fn dictionary_and_sequence_files() {
        let text = "# task subset\ntake_bolt\n\n  put_bolt  # trailing\n";
        let d = parse_dictionary(text, Level::Action).unwrap();
        assert_eq!(
            d.members.iter().collect::<Vec<_>>(),
            ["put_bolt", "take_bolt"]
        );
        assert_eq!(
            parse_dictionary(&write_dictionary(&d), Level::Action).unwrap(),
            d
        );
        let seq = parse_sequence("A\nB\n\nC\n").unwrap();
        assert_eq!(seq, ["A", "B", "C"]);
        assert_eq!(parse_sequence(&write_sequence(&seq)).unwrap(), seq);
        assert!(parse_sequence("a b\n").is_err());
    }

    #[test]
    fn session_files() {
        let text = "{\"label\":\"take\",\"duration_s\":1.5,\"recommended\":[\"take\",\"put\"]}\n";
        let records = parse_session(text).unwrap();
        assert_eq!(records[0].recommended, ["take", "put"]);
        assert_eq!(parse_session(&write_session(&records)).unwrap(), records);
        let bad = "{\"label\":\"take\",\"duration_s\":0,\"recommended\":[]}\n";
        assert!(matches!(
            parse_session(bad),
            Err(Error::MalformedSession { line: 1, .. })
        ));
    }
}
