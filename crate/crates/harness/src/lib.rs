//! Runs agents through the game dialogue and records transcripts.

pub mod agent;
pub mod chat;
pub mod stub;
pub mod trial;

pub use agent::{
    constant_agent, optimal_agent, random_agent, replay_agent, walkthrough_commands, Agent,
    AgentError, ConstantAgent, RandomAgent, ScriptedAgent, WALKTHROUGH,
};
pub use chat::{chat_agent, AgentConfig, ChatAgent, ChatError, Sampling};
pub use stub::{StubScript, StubServer};
pub use trial::{
    opening_prompt, run_batch, run_trial, BatchOptions, BatchResult, BatchSummary, HarnessError,
    JsonlSink, ParseFailurePolicy, TranscriptSink, TrialPolicy,
};
