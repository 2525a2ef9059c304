//! The Haunted House state machine.
//!
//! A [`Scenario`] fixes the hidden layout and the scripted ghost events; a
//! [`GameState`] is a plain value that [`Scenario::apply`] maps to its
//! successor together with the clues the player hears. Nothing here reads a
//! clock or a random source.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::geometry::{adjacent, max_distance_room, step, Direction, Room};
use crate::messages::ClueId;

/// Default cap on commands per game, legal and illegal alike.
pub const MOVE_LIMIT: u32 = 20;

/// A player command: a direction, or a target room in the coordinates variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Command {
    Move(Direction),
    Goto(Room),
}

impl Command {
    pub fn form(self) -> CommandForm {
        match self {
            Command::Move(_) => CommandForm::Direction,
            Command::Goto(_) => CommandForm::Coordinates,
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Move(d) => d.fmt(f),
            Command::Goto(r) => r.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid command {0:?}: expected a direction or a room label")]
pub struct ParseCommandError(pub String);

impl FromStr for Command {
    type Err = ParseCommandError;

    fn from_str(s: &str) -> Result<Command, ParseCommandError> {
        let s = s.trim();
        if let Ok(d) = s.parse::<Direction>() {
            return Ok(Command::Move(d));
        }
        s.parse::<Room>()
            .map(Command::Goto)
            .map_err(|_| ParseCommandError(s.to_owned()))
    }
}

impl Serialize for Command {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Command {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Command, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandForm {
    Direction,
    Coordinates,
}

impl CommandForm {
    /// Every command of this form, legal or not.
    pub fn all_commands(self) -> Vec<Command> {
        match self {
            CommandForm::Direction => Direction::ALL.into_iter().map(Command::Move).collect(),
            CommandForm::Coordinates => Room::ALL.into_iter().map(Command::Goto).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Searching,
    Returning,
    /// After the door relocated; the stage counts fired ghost events.
    Endgame(u8),
}

impl Phase {
    pub fn has_key(self) -> bool {
        !matches!(self, Phase::Searching)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Searching => f.write_str("searching"),
            Phase::Returning => f.write_str("returning"),
            Phase::Endgame(s) => write!(f, "endgame:{s}"),
        }
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Phase, String> {
        match s {
            "searching" => Ok(Phase::Searching),
            "returning" => Ok(Phase::Returning),
            _ => s
                .strip_prefix("endgame:")
                .and_then(|n| n.parse().ok())
                .map(Phase::Endgame)
                .ok_or_else(|| format!("invalid phase {s:?}")),
        }
    }
}

impl Serialize for Phase {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Phase {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Phase, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    InProgress,
    Escaped,
    GhostDeath,
    OutOfMoves,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        self != Status::InProgress
    }
}

/// What fires a scripted ghost event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "room")]
pub enum Trigger {
    /// A legal move whose origin is this room.
    Leave(Room),
    /// A legal move whose destination is this room.
    Enter(Room),
}

impl Trigger {
    fn matches(self, from: Room, to: Room) -> bool {
        match self {
            Trigger::Leave(room) => from == room,
            Trigger::Enter(room) => to == room,
        }
    }
}

/// One scripted ghost relocation. Event `i` can only fire at endgame stage `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GhostEvent {
    pub trigger: Trigger,
    pub ghost_from: Room,
    pub ghost_to: Room,
    pub clue: ClueId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelocationRule {
    /// The door moves to the unique room farthest from where the player stands.
    #[default]
    MaxDistanceFromCurrent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub start: Room,
    pub key_room: Room,
    pub ghost_room: Room,
    pub door_room: Room,
    pub move_limit: u32,
    pub relocation_rule: RelocationRule,
    pub events: Vec<GhostEvent>,
}

impl Default for Scenario {
    fn default() -> Scenario {
        Scenario::canonical()
    }
}

impl Scenario {
    /// Start and door in C1, key in A1, ghost in B2, 20 moves.
    pub fn canonical() -> Scenario {
        Scenario {
            start: Room::C1,
            key_room: Room::A1,
            ghost_room: Room::B2,
            door_room: Room::C1,
            move_limit: MOVE_LIMIT,
            relocation_rule: RelocationRule::MaxDistanceFromCurrent,
            events: vec![
                GhostEvent {
                    trigger: Trigger::Leave(Room::C1),
                    ghost_from: Room::B2,
                    ghost_to: Room::B3,
                    clue: ClueId::C7,
                },
                GhostEvent {
                    trigger: Trigger::Enter(Room::A2),
                    ghost_from: Room::B3,
                    ghost_to: Room::A3,
                    clue: ClueId::C8,
                },
                GhostEvent {
                    trigger: Trigger::Leave(Room::A2),
                    ghost_from: Room::A3,
                    ghost_to: Room::C3,
                    clue: ClueId::C9,
                },
            ],
        }
    }

    pub fn with_move_limit(mut self, move_limit: u32) -> Scenario {
        self.move_limit = move_limit;
        self
    }

    /// Final endgame stage, reached once every event has fired.
    pub fn final_stage(&self) -> u8 {
        self.events.len() as u8
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let invalid = |msg: String| Err(EngineError::InvalidScenario(msg));
        if self.door_room != self.start {
            return invalid(format!(
                "door {} must start in the start room {}",
                self.door_room, self.start
            ));
        }
        if self.key_room == self.start {
            return invalid(format!("key cannot be in the start room {}", self.start));
        }
        if self.ghost_room == self.start || self.ghost_room == self.key_room {
            return invalid(format!(
                "ghost room {} collides with the start or key room",
                self.ghost_room
            ));
        }
        if self.move_limit == 0 {
            return invalid("move limit must be positive".into());
        }
        if self.events.len() >= usize::from(u8::MAX) {
            return invalid("too many ghost events".into());
        }
        let mut ghost = self.ghost_room;
        for (i, event) in self.events.iter().enumerate() {
            if event.ghost_from != ghost {
                return invalid(format!(
                    "event {i} moves the ghost from {} but it is in {ghost}",
                    event.ghost_from
                ));
            }
            ghost = event.ghost_to;
        }
        match self.relocation_rule {
            RelocationRule::MaxDistanceFromCurrent => {
                if let Err(e) = max_distance_room(self.start) {
                    return invalid(e.to_string());
                }
            }
        }
        Ok(())
    }

    pub fn new_game(&self) -> Result<GameState, EngineError> {
        self.validate()?;
        Ok(GameState {
            player: self.start,
            ghost: self.ghost_room,
            door: self.door_room,
            has_key: false,
            phase: Phase::Searching,
            moves_used: 0,
            status: Status::InProgress,
        })
    }

    fn relocate_door(&self, from: Room) -> Result<Room, EngineError> {
        match self.relocation_rule {
            RelocationRule::MaxDistanceFromCurrent => Ok(max_distance_room(from)?),
        }
    }

    /// Advances `state` by one command.
    pub fn apply(
        &self,
        state: &GameState,
        cmd: Command,
    ) -> Result<(GameState, Feedback), EngineError> {
        if state.status.is_terminal() {
            return Err(EngineError::TerminalState(state.status));
        }
        let mut next = *state;
        let mut clues = Vec::with_capacity(2);

        match resolve(state.player, cmd) {
            None => clues.push(ClueId::C2),
            Some(room) => {
                let from = next.player;
                next.player = room;
                if room == next.ghost {
                    clues.push(ClueId::C11);
                    next.status = Status::GhostDeath;
                } else {
                    self.enter(&mut next, from, room, &mut clues)?;
                }
            }
        }

        next.moves_used += 1;
        if next.moves_used >= self.move_limit && next.status == Status::InProgress {
            next.status = Status::OutOfMoves;
            clues.push(ClueId::C12);
        }
        let terminal = next.status.is_terminal().then_some(next.status);
        Ok((
            next,
            Feedback {
                clue_ids: clues,
                terminal,
            },
        ))
    }

    /// Events, pickups and room clues for a live entry into `room`.
    fn enter(
        &self,
        next: &mut GameState,
        from: Room,
        room: Room,
        clues: &mut Vec<ClueId>,
    ) -> Result<(), EngineError> {
        if let Phase::Endgame(stage) = next.phase {
            if let Some(event) = self.events.get(usize::from(stage)) {
                if event.trigger.matches(from, room) {
                    next.ghost = event.ghost_to;
                    next.phase = Phase::Endgame(stage + 1);
                    clues.push(event.clue);
                    if next.ghost == room {
                        clues.push(ClueId::C11);
                        next.status = Status::GhostDeath;
                        return Ok(());
                    }
                }
            }
        }

        match next.phase {
            Phase::Searching if room == self.key_room => {
                clues.push(ClueId::C5);
                next.has_key = true;
                next.phase = Phase::Returning;
            }
            Phase::Returning if room == next.door => {
                clues.push(ClueId::C6);
                next.door = self.relocate_door(room)?;
                next.phase = Phase::Endgame(0);
            }
            Phase::Endgame(stage) if stage == self.final_stage() && room == next.door => {
                clues.push(ClueId::C10);
                next.status = Status::Escaped;
            }
            _ => {}
        }

        if clues.is_empty() {
            if next.phase == Phase::Searching {
                if adjacent(room, next.ghost) {
                    clues.push(ClueId::C3);
                }
                if adjacent(room, self.key_room) {
                    clues.push(ClueId::C4);
                }
            }
            if clues.is_empty() {
                clues.push(ClueId::C1);
            }
        }
        Ok(())
    }
}

/// Destination of `cmd` from `player`, or `None` when the move is illegal.
pub fn resolve(player: Room, cmd: Command) -> Option<Room> {
    match cmd {
        Command::Move(d) => step(player, d),
        Command::Goto(target) => adjacent(player, target).then_some(target),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameState {
    pub player: Room,
    pub ghost: Room,
    pub door: Room,
    pub has_key: bool,
    pub phase: Phase,
    pub moves_used: u32,
    pub status: Status,
}

impl GameState {
    /// Commands that would be legal from the player's room, in canonical order.
    pub fn legal_commands(&self, form: CommandForm) -> Vec<Command> {
        form.all_commands()
            .into_iter()
            .filter(|c| resolve(self.player, *c).is_some())
            .collect()
    }
}

pub fn legal_commands(state: &GameState, form: CommandForm) -> Vec<Command> {
    state.legal_commands(form)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub clue_ids: Vec<ClueId>,
    pub terminal: Option<Status>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("game already ended ({0:?})")]
    TerminalState(Status),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

pub fn new_game(scenario: &Scenario) -> Result<GameState, EngineError> {
    scenario.new_game()
}

pub fn apply(
    scenario: &Scenario,
    state: &GameState,
    cmd: Command,
) -> Result<(GameState, Feedback), EngineError> {
    scenario.apply(state, cmd)
}

/// A scenario paired with its running state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Game {
    scenario: Scenario,
    state: GameState,
}

impl Game {
    pub fn new(scenario: Scenario) -> Result<Game, EngineError> {
        let state = scenario.new_game()?;
        Ok(Game { scenario, state })
    }

    pub fn canonical() -> Game {
        Game::new(Scenario::canonical()).expect("canonical scenario is valid")
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn is_over(&self) -> bool {
        self.state.status.is_terminal()
    }

    pub fn play(&mut self, cmd: Command) -> Result<Feedback, EngineError> {
        let (next, feedback) = self.scenario.apply(&self.state, cmd)?;
        self.state = next;
        Ok(feedback)
    }
}
