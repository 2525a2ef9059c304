//! The persisted record of one game: commands, ground truth and outcome.
//!
//! One transcript is one JSON object; files hold one transcript per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::{subobjectives_from, SubObjectiveFlags};
use crate::engine::{Command, EngineError, Feedback, Game, Phase, Scenario, Status};
use crate::geometry::Room;
use crate::messages::{ClueId, InstructionVariant, MessageCatalog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Human,
    Scripted,
    Model,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentInfo {
    pub kind: AgentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
}

impl AgentInfo {
    pub fn human() -> AgentInfo {
        AgentInfo {
            kind: AgentKind::Human,
            model_id: None,
        }
    }

    pub fn scripted(name: impl Into<String>) -> AgentInfo {
        AgentInfo {
            kind: AgentKind::Scripted,
            model_id: Some(name.into()),
        }
    }

    pub fn model(model_id: impl Into<String>) -> AgentInfo {
        AgentInfo {
            kind: AgentKind::Model,
            model_id: Some(model_id.into()),
        }
    }

    /// Grouping label used by reports: the model id when present, else the kind.
    pub fn label(&self) -> String {
        match &self.model_id {
            Some(id) => id.clone(),
            None => serde_json::to_value(self.kind)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveRecord {
    /// 1-based.
    pub index: u32,
    pub command: Command,
    pub legal: bool,
    pub player_after: Room,
    pub ghost_after: Room,
    pub stage_after: Phase,
    pub clue_ids: Vec<ClueId>,
    pub rendered_feedback: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Escaped,
    GhostDeath,
    OutOfMoves,
    /// Abandoned or expired before the game ended.
    Incomplete,
    /// The dialogue broke down; see `invalid_reason`.
    Invalid,
}

impl From<Status> for OutcomeStatus {
    fn from(status: Status) -> OutcomeStatus {
        match status {
            Status::InProgress => OutcomeStatus::Incomplete,
            Status::Escaped => OutcomeStatus::Escaped,
            Status::GhostDeath => OutcomeStatus::GhostDeath,
            Status::OutOfMoves => OutcomeStatus::OutOfMoves,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidReason {
    /// The agent never produced a parseable move.
    ProtocolFailure,
    /// The agent's endpoint failed or timed out.
    Transport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub status: OutcomeStatus,
    pub moves_used: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invalid_reason: Option<InvalidReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subobjectives: Option<SubObjectiveFlags>,
}

impl Outcome {
    pub fn is_invalid(&self) -> bool {
        self.status == OutcomeStatus::Invalid
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub session_id: String,
    pub agent: AgentInfo,
    pub variant: InstructionVariant,
    pub locale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
    pub moves: Vec<MoveRecord>,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_dialogue: Option<Vec<ChatMessage>>,
}

impl Transcript {
    pub fn commands(&self) -> Vec<Command> {
        self.moves.iter().map(|m| m.command).collect()
    }

    /// Every clue heard, in order.
    pub fn clue_trace(&self) -> impl Iterator<Item = ClueId> + '_ {
        self.moves.iter().flat_map(|m| m.clue_ids.iter().copied())
    }

    pub fn is_pass(&self) -> bool {
        self.outcome.status == OutcomeStatus::Escaped
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("transcripts always serialize")
    }
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads one transcript per non-blank line.
pub fn read_jsonl(reader: impl BufRead) -> Result<Vec<Transcript>, TranscriptError> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t = serde_json::from_str(&line).map_err(|source| TranscriptError::Json {
            line: n + 1,
            source,
        })?;
        out.push(t);
    }
    Ok(out)
}

pub fn write_jsonl<'a>(
    mut writer: impl Write,
    transcripts: impl IntoIterator<Item = &'a Transcript>,
) -> std::io::Result<()> {
    for t in transcripts {
        writeln!(writer, "{}", t.to_json_line())?;
    }
    writer.flush()
}

/// Drives a [`Game`] and records a [`MoveRecord`] per command.
#[derive(Debug, Clone)]
pub struct Recorder {
    game: Game,
    catalog: MessageCatalog,
    moves: Vec<MoveRecord>,
}

impl Recorder {
    pub fn new(scenario: Scenario, catalog: MessageCatalog) -> Result<Recorder, EngineError> {
        Ok(Recorder {
            game: Game::new(scenario)?,
            catalog,
            moves: Vec::new(),
        })
    }

    pub fn game(&self) -> &Game {
        &self.game
    }

    pub fn moves(&self) -> &[MoveRecord] {
        &self.moves
    }

    pub fn catalog(&self) -> &MessageCatalog {
        &self.catalog
    }

    pub fn play(&mut self, cmd: Command) -> Result<(&MoveRecord, Feedback), EngineError> {
        let before = self.game.state().player;
        let feedback = self.game.play(cmd)?;
        let state = self.game.state();
        let legal = feedback.clue_ids.first() != Some(&ClueId::C2);
        debug_assert!(legal || state.player == before);
        let record = MoveRecord {
            index: self.moves.len() as u32 + 1,
            command: cmd,
            legal,
            player_after: state.player,
            ghost_after: state.ghost,
            stage_after: state.phase,
            rendered_feedback: self.catalog.render_feedback(&feedback),
            clue_ids: feedback.clue_ids.clone(),
        };
        self.moves.push(record);
        Ok((self.moves.last().expect("just pushed"), feedback))
    }

    /// Outcome derived from the game state; `Incomplete` while in progress.
    pub fn outcome(&self) -> Outcome {
        let mut outcome = Outcome {
            status: self.game.state().status.into(),
            moves_used: self.game.state().moves_used,
            invalid_reason: None,
            detail: None,
            subobjectives: None,
        };
        outcome.subobjectives = Some(subobjectives_from(&self.moves, outcome.status));
        outcome
    }

    pub fn finish(
        self,
        session_id: impl Into<String>,
        agent: AgentInfo,
        variant: InstructionVariant,
    ) -> Transcript {
        let outcome = self.outcome();
        Transcript {
            session_id: session_id.into(),
            agent,
            variant,
            locale: self.catalog.locale().to_owned(),
            created_at: None,
            moves: self.moves,
            outcome,
            raw_dialogue: None,
        }
    }
}

/// Folds `commands` over a fresh game. Commands after the game ends are an
/// error in strict mode and dropped otherwise.
pub fn replay(
    scenario: &Scenario,
    commands: &[Command],
    strict: bool,
) -> Result<Transcript, EngineError> {
    let mut recorder = Recorder::new(scenario.clone(), MessageCatalog::english())?;
    for cmd in commands {
        if recorder.game().is_over() {
            if strict {
                return Err(EngineError::TerminalState(recorder.game().state().status));
            }
            break;
        }
        recorder.play(*cmd)?;
    }
    let variant = match commands.first() {
        Some(Command::Goto(_)) => InstructionVariant::Coordinates,
        _ => InstructionVariant::Original,
    };
    Ok(recorder.finish("replay", AgentInfo::scripted("replay"), variant))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Direction::*;

    fn moves(ds: &[crate::geometry::Direction]) -> Vec<Command> {
        ds.iter().map(|d| Command::Move(*d)).collect()
    }

    #[test]
    fn replay_walkthrough() {
        let cmds = moves(&[
            Down, Up, Left, Left, Right, Right, Left, Left, Down, Up, Down, Down,
        ]);
        let t = replay(&Scenario::canonical(), &cmds, true).unwrap();
        assert_eq!(t.outcome.status, OutcomeStatus::Escaped);
        assert_eq!(t.moves.len(), 12);
        assert_eq!(
            t.moves[11].rendered_feedback,
            "Congratulations - You have escaped the haunted house!"
        );
        assert_eq!(t.moves[0].index, 1);
    }

    #[test]
    fn replay_all_illegal() {
        let t = replay(&Scenario::canonical(), &moves(&[Up; 20]), true).unwrap();
        assert_eq!(t.outcome.status, OutcomeStatus::OutOfMoves);
        assert!(t
            .moves
            .iter()
            .all(|m| !m.legal && m.player_after == Room::C1));
    }

    #[test]
    fn replay_stops_at_death() {
        let t = replay(&Scenario::canonical(), &moves(&[Left, Down, Up]), false).unwrap();
        assert_eq!(t.outcome.status, OutcomeStatus::GhostDeath);
        assert_eq!(t.moves.len(), 2);
        assert!(matches!(
            replay(&Scenario::canonical(), &moves(&[Left, Down, Up]), true),
            Err(EngineError::TerminalState(Status::GhostDeath))
        ));
    }

    #[test]
    fn jsonl_round_trip() {
        let t = replay(&Scenario::canonical(), &moves(&[Left, Left]), false).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, [&t, &t]).unwrap();
        let back = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, vec![t.clone(), t]);
    }
}
