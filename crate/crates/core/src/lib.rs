//! Core of the Haunted House benchmark: the 3x3 house, its deterministic
//! rules, the clue catalog, transcripts, an independent oracle and the
//! move-log analyzer.

pub mod analyzer;
pub mod engine;
pub mod geometry;
pub mod messages;
pub mod oracle;
pub mod transcript;

pub use engine::{Command, CommandForm, Feedback, Game, GameState, Phase, Scenario, Status};
pub use geometry::{Direction, Room};
pub use messages::{ClueId, InstructionVariant, MessageCatalog, ParseMode};
pub use transcript::{AgentInfo, AgentKind, MoveRecord, Outcome, OutcomeStatus, Transcript};
