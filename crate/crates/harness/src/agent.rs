//! The agent interface and the scripted players.

use haunted_core::engine::Command;
use haunted_core::geometry::{step, Direction, Room};
use haunted_core::messages::InstructionVariant;
use haunted_core::transcript::{AgentInfo, ChatMessage, Role, Transcript};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("transport failure: {0}")]
    Transport(String),
    /// A scripted agent ran out of replies.
    #[error("agent has no more replies")]
    Exhausted,
}

/// Anything that answers a chat history with one reply.
///
/// Agents see only the instruction text and rendered feedback, never the
/// engine's state.
pub trait Agent: Send {
    fn reply(&mut self, history: &[ChatMessage]) -> Result<String, AgentError>;

    fn info(&self) -> AgentInfo;
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn reply(&mut self, history: &[ChatMessage]) -> Result<String, AgentError> {
        (**self).reply(history)
    }

    fn info(&self) -> AgentInfo {
        (**self).info()
    }
}

/// The command sequence of the published walkthrough: 12 moves to escape.
pub const WALKTHROUGH: [Direction; 12] = [
    Direction::Down,
    Direction::Up,
    Direction::Left,
    Direction::Left,
    Direction::Right,
    Direction::Right,
    Direction::Left,
    Direction::Left,
    Direction::Down,
    Direction::Up,
    Direction::Down,
    Direction::Down,
];

/// The walkthrough as commands of the variant's form.
pub fn walkthrough_commands(variant: InstructionVariant) -> Vec<Command> {
    match variant {
        InstructionVariant::Coordinates => {
            let mut here = Room::C1;
            WALKTHROUGH
                .iter()
                .map(|d| {
                    here = step(here, *d).expect("walkthrough stays on the grid");
                    Command::Goto(here)
                })
                .collect()
        }
        _ => WALKTHROUGH.iter().map(|d| Command::Move(*d)).collect(),
    }
}

fn assistant_turns(history: &[ChatMessage]) -> usize {
    history.iter().filter(|m| m.role == Role::Assistant).count()
}

/// Replies from a fixed list, picking the entry by how many times it has
/// already spoken in `history`.
#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    name: String,
    replies: Vec<String>,
}

impl ScriptedAgent {
    pub fn new(name: impl Into<String>, replies: Vec<String>) -> ScriptedAgent {
        ScriptedAgent {
            name: name.into(),
            replies,
        }
    }

    pub fn from_commands(name: impl Into<String>, commands: &[Command]) -> ScriptedAgent {
        ScriptedAgent::new(name, commands.iter().map(|c| c.to_string()).collect())
    }
}

impl Agent for ScriptedAgent {
    fn reply(&mut self, history: &[ChatMessage]) -> Result<String, AgentError> {
        self.replies
            .get(assistant_turns(history))
            .cloned()
            .ok_or(AgentError::Exhausted)
    }

    fn info(&self) -> AgentInfo {
        AgentInfo::scripted(self.name.clone())
    }
}

pub fn optimal_agent(variant: InstructionVariant) -> ScriptedAgent {
    ScriptedAgent::from_commands("optimal", &walkthrough_commands(variant))
}

/// Re-emits the commands recorded in `transcript`.
pub fn replay_agent(transcript: &Transcript) -> ScriptedAgent {
    ScriptedAgent::from_commands("replay", &transcript.commands())
}

/// Always says the same thing.
#[derive(Debug, Clone)]
pub struct ConstantAgent {
    reply: String,
}

pub fn constant_agent(reply: impl Into<String>) -> ConstantAgent {
    ConstantAgent {
        reply: reply.into(),
    }
}

impl Agent for ConstantAgent {
    fn reply(&mut self, _history: &[ChatMessage]) -> Result<String, AgentError> {
        Ok(self.reply.clone())
    }

    fn info(&self) -> AgentInfo {
        AgentInfo::scripted(format!("constant:{}", self.reply))
    }
}

/// Uniformly random moves from a seeded generator: one of four directions,
/// or one of nine rooms in the coordinates variant.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    rng: ChaCha8Rng,
    variant: InstructionVariant,
}

/// `stream` selects an independent sequence under the same seed, so trial
/// `i` of a batch can use stream `i`.
pub fn random_agent(seed: u64, stream: u64, variant: InstructionVariant) -> RandomAgent {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    RandomAgent { rng, variant }
}

impl RandomAgent {
    pub fn next_command(&mut self) -> Command {
        match self.variant {
            InstructionVariant::Coordinates => {
                Command::Goto(Room::ALL[self.rng.random_range(0..Room::ALL.len())])
            }
            _ => Command::Move(Direction::ALL[self.rng.random_range(0..Direction::ALL.len())]),
        }
    }
}

impl Agent for RandomAgent {
    fn reply(&mut self, _history: &[ChatMessage]) -> Result<String, AgentError> {
        Ok(self.next_command().to_string())
    }

    fn info(&self) -> AgentInfo {
        AgentInfo::scripted("random")
    }
}
