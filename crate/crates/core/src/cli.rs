//! Command-line surface.
//!
//! Exit status is 0 on success, 1 on domain errors (bad files, unknown
//! labels, ...) and 2 on usage errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use crate::anomaly::{assess_sequence, AnomalyConfig, Factor2Mode};
use crate::error::{Error, Result};
use crate::graph::{build_reference_graph, ReferenceGraph};
use crate::guidance::recommend_next;
use crate::io;
use crate::model::{compute_reference_times, derive_sequences, ActionDictionary, Level, MAX_K};
use crate::numfmt::{self, REPORT_DIGITS};
use crate::predictor::sample_episode;
use crate::service::{http, SessionService};
use crate::twsa::{evaluate_session, TwsaMode};

#[derive(Debug, Parser)]
#[command(
    name = "opguide",
    version,
    about = "Assembly guidance, anomaly scoring and efficiency metrics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LevelArg {
    Action,
    Verb,
    Noun,
}

impl From<LevelArg> for Level {
    fn from(level: LevelArg) -> Self {
        match level {
            LevelArg::Action => Level::Action,
            LevelArg::Verb => Level::Verb,
            LevelArg::Noun => Level::Noun,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    /// A step is correct when its label was in that step's Top-k list.
    Top5,
    /// All steps are correct only if the whole session matches --expected.
    Strict,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a reference graph from an annotation CSV.
    BuildGraph {
        /// CSV with header video_id,verb,noun,start_s,end_s.
        #[arg(long)]
        annotations: PathBuf,
        /// Label granularity of the graph.
        #[arg(long, value_enum)]
        level: LevelArg,
        /// Output graph file (stdout when omitted).
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score every transition of a label sequence for anomaly.
    Score {
        /// Reference graph file written by build-graph.
        #[arg(long)]
        graph: PathBuf,
        /// One label per line.
        #[arg(long)]
        sequence: PathBuf,
        /// Drop the entropy-informed certainty factor.
        #[arg(long)]
        no_certainty: bool,
        /// Use the unclamped `1 - (-p)/max p` probability factor.
        #[arg(long)]
        literal_factor2: bool,
        /// Number of next-action suggestions per step.
        #[arg(long, default_value_t = MAX_K)]
        k: usize,
        /// Output report, one JSON line per step (stdout when omitted).
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay recorded predictions and print guidance for each one.
    Guide {
        /// Reference graph file written by build-graph.
        #[arg(long)]
        graph: PathBuf,
        /// JSON lines {step, topk: [{label, score}]}.
        #[arg(long)]
        predictions: PathBuf,
        /// One label per line; defaults to the full graph vocabulary.
        #[arg(long)]
        dictionary: Option<PathBuf>,
        /// Starting state.
        #[arg(long)]
        state: String,
    },
    /// Time-weighted sequence accuracy of a recorded session.
    Twsa {
        /// Reference graph file written by build-graph.
        #[arg(long)]
        graph: PathBuf,
        /// Training annotations used for median reference times.
        #[arg(long)]
        annotations: PathBuf,
        /// JSON lines {label, duration_s, recommended: [labels]}.
        #[arg(long)]
        session: PathBuf,
        #[arg(long, value_enum, default_value = "top5")]
        mode: ModeArg,
        /// Expected label sequence, one per line (required with --mode strict).
        #[arg(long)]
        expected: Option<PathBuf>,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a label sequence by walking the graph.
    Simulate {
        /// Reference graph file written by build-graph.
        #[arg(long)]
        graph: PathBuf,
        /// Maximum number of labels.
        #[arg(long)]
        steps: usize,
        /// Seed for the random walk; equal seeds give equal output.
        #[arg(long)]
        seed: u64,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP session service.
    Serve {
        /// Reference graph file written by build-graph.
        #[arg(long)]
        graph: PathBuf,
        /// TCP port to listen on.
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Training annotations supplying reference times for sessions.
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Dictionary registered under its file stem.
        #[arg(long)]
        dictionary: Vec<PathBuf>,
        /// Directory with the built console, served under `/`.
        #[arg(long)]
        console: Option<PathBuf>,
        /// Directory receiving append-only session traces.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<ReferenceGraph> {
    ReferenceGraph::deserialize(read(path)?.as_bytes())
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
        }
        None => stdout.write_all(text.as_bytes()).map_err(Error::from),
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "default".to_string())
}

pub fn execute(command: Command, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::BuildGraph {
            annotations,
            level,
            out,
        } => {
            let corpus = io::parse_annotations(&read(&annotations)?)?;
            let graph =
                build_reference_graph(level.into(), &derive_sequences(&corpus, level.into()))?;
            emit(out.as_deref(), &graph.to_canonical_string(), stdout)
        }
        Command::Score {
            graph,
            sequence,
            no_certainty,
            literal_factor2,
            k,
            out,
        } => {
            let graph = load_graph(&graph)?;
            let sequence = io::parse_sequence(&read(&sequence)?)?;
            let config = AnomalyConfig {
                use_certainty: !no_certainty,
                factor2_mode: if literal_factor2 {
                    Factor2Mode::Literal
                } else {
                    Factor2Mode::Corrected
                },
                k,
            };
            config.validate()?;
            let report = assess_sequence(&graph, &sequence, &config)?;
            emit(out.as_deref(), &io::write_score_report(&report), stdout)
        }
        Command::Guide {
            graph,
            predictions,
            dictionary,
            state,
        } => {
            let graph = load_graph(&graph)?;
            let predictions = io::parse_predictions(&read(&predictions)?)?;
            let dictionary = match dictionary {
                Some(path) => {
                    let d = io::parse_dictionary(&read(&path)?, graph.level())?;
                    d.check_within(graph.level(), graph.vocab())?;
                    d
                }
                None => ActionDictionary::full(graph.level(), graph.vocab()),
            };
            if !graph.contains(&state) {
                return Err(Error::UnknownLabel(state));
            }
            let mut current = state;
            let mut text = String::new();
            for (step, prediction) in predictions.iter().enumerate() {
                let guidance = recommend_next(&graph, &current, prediction, &dictionary)?;
                let line = serde_json::json!({
                    "step": step,
                    "state": current,
                    "guidance": guidance,
                });
                text.push_str(&numfmt::to_canonical_line(&line, REPORT_DIGITS));
                text.push('\n');
                // the operator follows the recommendation; a repeat keeps the state
                if let Some(next) = guidance.recommended_label() {
                    current = next.to_string();
                }
            }
            emit(None, &text, stdout)
        }
        Command::Twsa {
            graph,
            annotations,
            session,
            mode,
            expected,
            out,
        } => {
            let graph = load_graph(&graph)?;
            let corpus = io::parse_annotations(&read(&annotations)?)?;
            let times = compute_reference_times(&corpus, graph.level());
            let records = io::parse_session(&read(&session)?)?;
            let expected = expected
                .map(|path| read(&path).and_then(|t| io::parse_sequence(&t)))
                .transpose()?;
            let mode = match mode {
                ModeArg::Top5 => TwsaMode::Top5Membership,
                ModeArg::Strict => TwsaMode::StrictSequence,
            };
            let report = evaluate_session(&records, &times, mode, expected.as_deref())?;
            emit(
                out.as_deref(),
                &numfmt::to_canonical_pretty(&report, REPORT_DIGITS),
                stdout,
            )
        }
        Command::Simulate {
            graph,
            steps,
            seed,
            out,
        } => {
            let graph = load_graph(&graph)?;
            let episode = sample_episode(&graph, steps, seed)?;
            emit(out.as_deref(), &io::write_sequence(&episode), stdout)
        }
        Command::Serve {
            graph,
            port,
            host,
            annotations,
            dictionary,
            console,
            trace_dir,
        } => {
            let graph_id = file_stem(&graph);
            let graph = load_graph(&graph)?;
            let times = annotations
                .map(|path| -> Result<_> {
                    let corpus = io::parse_annotations(&read(&path)?)?;
                    Ok(compute_reference_times(&corpus, graph.level()))
                })
                .transpose()?;
            let mut service = SessionService::new();
            if let Some(dir) = trace_dir {
                std::fs::create_dir_all(&dir)?;
                service = service.with_trace_dir(dir);
            }
            for path in dictionary {
                let d = io::parse_dictionary(&read(&path)?, graph.level())?;
                d.check_within(graph.level(), graph.vocab())?;
                service.register_dictionary(file_stem(&path), d);
            }
            service.register_graph(graph_id.clone(), graph, times)?;
            eprintln!("graph {graph_id:?} registered");
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(http::serve(
                Arc::new(service),
                console,
                std::net::SocketAddr::new(host, port),
            ))?;
            Ok(())
        }
    }
}

/// Parses `args` and runs the command, returning the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = write!(stderr, "{}", err.render());
            return err.exit_code();
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => 0,
        Err(err) => {
            let _ = writeln!(stderr, "error: {err}");
            1
        }
    }
}
