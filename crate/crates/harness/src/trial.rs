//! The dialogue protocol: one trial is one fresh conversation with an agent,
//! a batch is many independent trials.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use haunted_core::engine::{EngineError, Scenario};
use haunted_core::messages::{
    parse_command_with, InstructionVariant, MessageCatalog, MessageError, ParseMode,
};
use haunted_core::transcript::{ChatMessage, InvalidReason, OutcomeStatus, Recorder, Transcript};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Agent, AgentError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Catalog(#[from] MessageError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("batch size must be at least 1")]
    EmptyBatch,
    #[error("writing transcript: {0}")]
    Sink(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseFailurePolicy {
    /// Give up on the trial and mark it invalid.
    #[default]
    AbortInvalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialPolicy {
    pub variant: InstructionVariant,
    pub locale: String,
    pub parse_mode: ParseMode,
    /// Clarification prompts allowed per move before the trial is abandoned.
    pub max_parse_retries: u32,
    pub on_parse_failure: ParseFailurePolicy,
}

impl Default for TrialPolicy {
    fn default() -> TrialPolicy {
        TrialPolicy {
            variant: InstructionVariant::Original,
            locale: haunted_core::messages::DEFAULT_LOCALE.to_owned(),
            parse_mode: ParseMode::LastToken,
            max_parse_retries: 2,
            on_parse_failure: ParseFailurePolicy::AbortInvalid,
        }
    }
}

impl TrialPolicy {
    pub fn for_variant(variant: InstructionVariant) -> TrialPolicy {
        TrialPolicy {
            variant,
            ..TrialPolicy::default()
        }
    }
}

/// The first message of every trial.
pub fn opening_prompt(catalog: &MessageCatalog, variant: InstructionVariant) -> String {
    format!(
        "{}\n\n{}",
        catalog.opening_prompt(),
        catalog.instructions(variant)
    )
}

/// Plays one game through a fresh dialogue with `agent`.
///
/// Agent failures end the trial as `Invalid` rather than erroring; only
/// configuration problems (unknown locale, bad scenario) return `Err`.
pub fn run_trial(
    agent: &mut dyn Agent,
    scenario: &Scenario,
    policy: &TrialPolicy,
    session_id: &str,
) -> Result<Transcript, HarnessError> {
    let catalog = MessageCatalog::for_locale(&policy.locale)?;
    let reprompt = catalog.reprompt(policy.variant.command_form()).to_owned();
    let mut history = vec![ChatMessage::user(opening_prompt(&catalog, policy.variant))];
    let mut recorder = Recorder::new(scenario.clone(), catalog)?;
    let mut failure: Option<(InvalidReason, String)> = None;

    'game: while !recorder.game().is_over() {
        let mut retries = 0;
        let command = loop {
            let reply = match agent.reply(&history) {
                Ok(reply) => reply,
                Err(AgentError::Transport(e)) => {
                    failure = Some((InvalidReason::Transport, e));
                    break 'game;
                }
                Err(AgentError::Exhausted) => {
                    failure = Some((
                        InvalidReason::ProtocolFailure,
                        "agent ran out of replies".into(),
                    ));
                    break 'game;
                }
            };
            let parsed = parse_command_with(&reply, policy.variant, policy.parse_mode);
            history.push(ChatMessage::assistant(reply));
            match parsed {
                Some(cmd) => break cmd,
                None if retries < policy.max_parse_retries => {
                    retries += 1;
                    history.push(ChatMessage::user(reprompt.clone()));
                }
                None => {
                    failure = Some((
                        InvalidReason::ProtocolFailure,
                        format!("no parseable move after {} replies", retries + 1),
                    ));
                    break 'game;
                }
            }
        };
        let (record, _) = recorder.play(command)?;
        history.push(ChatMessage::user(record.rendered_feedback.clone()));
    }

    let agent_info = agent.info();
    let mut transcript = recorder.finish(session_id, agent_info, policy.variant);
    if let Some((reason, detail)) = failure {
        transcript.outcome.status = OutcomeStatus::Invalid;
        transcript.outcome.invalid_reason = Some(reason);
        transcript.outcome.detail = Some(detail);
    }
    transcript.raw_dialogue = Some(history);
    Ok(transcript)
}

/// Receives each finished transcript. Appends must be atomic per record.
pub trait TranscriptSink: Sync {
    fn append(&self, transcript: &Transcript) -> io::Result<()>;
}

/// Appends one JSON line per transcript to a file.
#[derive(Debug)]
pub struct JsonlSink {
    file: Mutex<File>,
}

impl JsonlSink {
    pub fn create(path: &Path) -> io::Result<JsonlSink> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(JsonlSink {
            file: Mutex::new(file),
        })
    }
}

impl TranscriptSink for JsonlSink {
    fn append(&self, transcript: &Transcript) -> io::Result<()> {
        let mut line = transcript.to_json_line();
        line.push('\n');
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        file.write_all(line.as_bytes())?;
        file.flush()
    }
}

#[derive(Default)]
pub struct BatchOptions<'a> {
    /// Trials run concurrently; 0 and 1 both mean sequential.
    pub parallelism: usize,
    pub sink: Option<&'a dyn TranscriptSink>,
    /// When set, no new trials start; finished ones are kept.
    pub cancel: Option<&'a AtomicBool>,
    pub session_prefix: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub requested: usize,
    pub finished: usize,
    /// Finished trials that were not invalid; the pass-rate denominator.
    pub completed: usize,
    pub passes: usize,
    pub pass_rate: f64,
    pub invalid_protocol: usize,
    pub invalid_transport: usize,
    /// Counts per sub-objective: key, back to C1, A2, avoid A3, escape.
    pub subobjectives: [usize; 5],
    /// False when the batch was interrupted before every trial ran.
    pub complete: bool,
}

impl BatchSummary {
    pub fn from_transcripts(requested: usize, transcripts: &[Transcript]) -> BatchSummary {
        let valid: Vec<&Transcript> = transcripts
            .iter()
            .filter(|t| !t.outcome.is_invalid())
            .collect();
        let invalid = |reason| {
            transcripts
                .iter()
                .filter(|t| t.outcome.invalid_reason == Some(reason))
                .count()
        };
        let mut subobjectives = [0; 5];
        for t in &valid {
            let flags = haunted_core::analyzer::detect_subobjectives(t);
            for (slot, hit) in subobjectives.iter_mut().zip(flags.as_array()) {
                *slot += usize::from(hit);
            }
        }
        let passes = valid.iter().filter(|t| t.is_pass()).count();
        BatchSummary {
            requested,
            finished: transcripts.len(),
            completed: valid.len(),
            passes,
            pass_rate: if valid.is_empty() {
                0.0
            } else {
                passes as f64 / valid.len() as f64
            },
            invalid_protocol: invalid(InvalidReason::ProtocolFailure),
            invalid_transport: invalid(InvalidReason::Transport),
            subobjectives,
            complete: transcripts.len() == requested,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    /// In trial order.
    pub transcripts: Vec<Transcript>,
    pub summary: BatchSummary,
}

/// Runs `n` independent trials. `agent_source(i)` builds the agent for trial `i`.
pub fn run_batch<F>(
    agent_source: F,
    n: usize,
    scenario: &Scenario,
    policy: &TrialPolicy,
    options: &BatchOptions<'_>,
) -> Result<BatchResult, HarnessError>
where
    F: Fn(usize) -> Box<dyn Agent> + Sync,
{
    if n == 0 {
        return Err(HarnessError::EmptyBatch);
    }
    // fail fast on configuration before any trial runs
    MessageCatalog::for_locale(&policy.locale)?;
    scenario.validate()?;

    let prefix = options.session_prefix.as_deref().unwrap_or("trial");
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Transcript)>> = Mutex::new(Vec::with_capacity(n));
    let first_error: Mutex<Option<HarnessError>> = Mutex::new(None);

    let worker = || loop {
        if options.cancel.is_some_and(|c| c.load(Ordering::SeqCst)) {
            return;
        }
        if first_error.lock().map(|e| e.is_some()).unwrap_or(true) {
            return;
        }
        let i = next.fetch_add(1, Ordering::SeqCst);
        if i >= n {
            return;
        }
        let mut agent = agent_source(i);
        let outcome = run_trial(
            agent.as_mut(),
            scenario,
            policy,
            &format!("{prefix}-{i:05}"),
        )
        .and_then(|t| {
            if let Some(sink) = options.sink {
                sink.append(&t)?;
            }
            Ok(t)
        });
        match outcome {
            Ok(t) => results.lock().expect("results lock").push((i, t)),
            Err(e) => {
                let mut slot = first_error.lock().expect("error lock");
                slot.get_or_insert(e);
            }
        }
    };

    let threads = options.parallelism.clamp(1, n);
    if threads == 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(worker);
            }
        });
    }

    if let Some(e) = first_error.into_inner().expect("error lock") {
        return Err(e);
    }
    let mut results = results.into_inner().expect("results lock");
    results.sort_by_key(|(i, _)| *i);
    let transcripts: Vec<Transcript> = results.into_iter().map(|(_, t)| t).collect();
    let summary = BatchSummary::from_transcripts(n, &transcripts);
    Ok(BatchResult {
        transcripts,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{constant_agent, optimal_agent, random_agent, replay_agent};
    use haunted_core::transcript::Role;

    fn canonical() -> Scenario {
        Scenario::canonical()
    }

    #[test]
    fn optimal_agent_escapes_in_twelve() {
        for variant in InstructionVariant::ALL {
            let mut agent = optimal_agent(variant);
            let t = run_trial(
                &mut agent,
                &canonical(),
                &TrialPolicy::for_variant(variant),
                "t",
            )
            .unwrap();
            assert_eq!(t.outcome.status, OutcomeStatus::Escaped, "{variant}");
            assert_eq!(t.moves.len(), 12);
            let dialogue = t.raw_dialogue.unwrap();
            // instructions, then a reply and a feedback message per move
            assert_eq!(dialogue.len(), 1 + 2 * 12);
            assert!(dialogue[0]
                .content
                .starts_with("You are the player, solve the task"));
        }
    }

    #[test]
    fn always_up_runs_out_of_moves() {
        let mut agent = constant_agent("up");
        let t = run_trial(&mut agent, &canonical(), &TrialPolicy::default(), "t").unwrap();
        assert_eq!(t.outcome.status, OutcomeStatus::OutOfMoves);
        assert_eq!(t.moves.len(), 20);
        assert_eq!(
            t.raw_dialogue.unwrap().last().unwrap().content,
            "You cannot move there. Game over - You ran out of moves!"
        );
    }

    #[test]
    fn unparseable_agent_is_invalid_after_retries() {
        let mut agent = constant_agent("banana");
        let policy = TrialPolicy {
            max_parse_retries: 2,
            ..TrialPolicy::default()
        };
        let t = run_trial(&mut agent, &canonical(), &policy, "t").unwrap();
        assert_eq!(t.outcome.status, OutcomeStatus::Invalid);
        assert_eq!(
            t.outcome.invalid_reason,
            Some(InvalidReason::ProtocolFailure)
        );
        let dialogue = t.raw_dialogue.unwrap();
        let replies = dialogue
            .iter()
            .filter(|m| m.role == Role::Assistant)
            .count();
        assert_eq!(replies, 3);
        assert_eq!(
            dialogue[2].content,
            "Please reply with exactly one move: left, right, up, or down."
        );
        assert!(t.moves.is_empty());
    }

    #[test]
    fn strict_parsing_rejects_prose() {
        let mut agent = constant_agent("I think left");
        let policy = TrialPolicy {
            parse_mode: ParseMode::Strict,
            max_parse_retries: 0,
            ..TrialPolicy::default()
        };
        let t = run_trial(&mut agent, &canonical(), &policy, "t").unwrap();
        assert_eq!(t.outcome.status, OutcomeStatus::Invalid);
    }

    #[test]
    fn replay_agent_reproduces_a_transcript() {
        let mut agent = optimal_agent(InstructionVariant::Original);
        let original = run_trial(&mut agent, &canonical(), &TrialPolicy::default(), "a").unwrap();
        let mut again = replay_agent(&original);
        let t = run_trial(&mut again, &canonical(), &TrialPolicy::default(), "a").unwrap();
        assert_eq!(t.moves, original.moves);
        assert_eq!(t.outcome.status, OutcomeStatus::Escaped);

        // a script shorter than the game is a protocol failure
        let mut short = crate::agent::ScriptedAgent::new("short", vec!["left".into()]);
        let t = run_trial(&mut short, &canonical(), &TrialPolicy::default(), "b").unwrap();
        assert_eq!(
            t.outcome.invalid_reason,
            Some(InvalidReason::ProtocolFailure)
        );
        assert_eq!(t.moves.len(), 1);
    }

    #[test]
    fn unknown_locale_is_a_configuration_error() {
        let policy = TrialPolicy {
            locale: "et".into(),
            ..TrialPolicy::default()
        };
        let mut agent = constant_agent("up");
        assert!(matches!(
            run_trial(&mut agent, &canonical(), &policy, "t"),
            Err(HarnessError::Catalog(_))
        ));
    }

    #[test]
    fn batches() {
        let policy = TrialPolicy::default();
        let r = run_batch(
            |_| Box::new(optimal_agent(InstructionVariant::Original)),
            20,
            &canonical(),
            &policy,
            &BatchOptions::default(),
        )
        .unwrap();
        assert_eq!(r.summary.passes, 20);
        assert_eq!(r.summary.pass_rate, 1.0);
        assert!(r.summary.complete);

        let r = run_batch(
            |_| Box::new(constant_agent("up")),
            20,
            &canonical(),
            &policy,
            &BatchOptions::default(),
        )
        .unwrap();
        assert_eq!(r.summary.passes, 0);
        assert_eq!(r.summary.completed, 20);
        assert!(matches!(
            run_batch(
                |_| Box::new(constant_agent("up")),
                0,
                &canonical(),
                &policy,
                &BatchOptions::default()
            ),
            Err(HarnessError::EmptyBatch)
        ));
    }

    #[test]
    fn parallel_batches_are_reproducible() {
        let policy = TrialPolicy::default();
        let run = |parallelism| {
            run_batch(
                |i| Box::new(random_agent(42, i as u64, InstructionVariant::Original)),
                64,
                &canonical(),
                &policy,
                &BatchOptions {
                    parallelism,
                    ..BatchOptions::default()
                },
            )
            .unwrap()
            .transcripts
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn cancelled_batch_is_marked_incomplete() {
        let cancel = AtomicBool::new(true);
        let r = run_batch(
            |_| Box::new(constant_agent("up")),
            5,
            &canonical(),
            &TrialPolicy::default(),
            &BatchOptions {
                cancel: Some(&cancel),
                ..BatchOptions::default()
            },
        )
        .unwrap();
        assert!(!r.summary.complete);
        assert_eq!(r.summary.finished, 0);
    }

    #[test]
    fn sink_receives_every_trial() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out/t.jsonl");
        let sink = JsonlSink::create(&path).unwrap();
        let r = run_batch(
            |i| Box::new(random_agent(1, i as u64, InstructionVariant::Original)),
            10,
            &canonical(),
            &TrialPolicy::default(),
            &BatchOptions {
                parallelism: 3,
                sink: Some(&sink),
                ..BatchOptions::default()
            },
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut back = haunted_core::transcript::read_jsonl(text.as_bytes()).unwrap();
        back.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        assert_eq!(back, r.transcripts);
    }
}
