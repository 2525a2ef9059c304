//! Ground truth for the canonical house, written independently of
//! [`crate::engine`]: a naive reference simulator over raw grid coordinates,
//! the full reachable state graph under the move cap, and exact success
//! probabilities for randomized policies.

use std::collections::{BTreeMap, HashMap, VecDeque};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Command, CommandForm, GameState, Phase, Status};
use crate::geometry::{Direction, Room};
use crate::messages::ClueId;

type Cell = (i8, i8);

const START: Cell = (2, 0);
const KEY: Cell = (0, 0);
const GHOST: Cell = (1, 1);
const A2: Cell = (0, 1);

fn cell(room: Room) -> Cell {
    let label = room.to_string();
    let b = label.as_bytes();
    ((b[0] - b'A') as i8, (b[1] - b'1') as i8)
}

fn room(c: Cell) -> Room {
    let label = format!("{}{}", (b'A' + c.0 as u8) as char, c.1 + 1);
    label.parse().expect("reference cells stay on the grid")
}

fn on_grid(c: Cell) -> bool {
    (0..3).contains(&c.0) && (0..3).contains(&c.1)
}

fn dist(a: Cell, b: Cell) -> i8 {
    (a.0 - b.0).abs() + (a.1 - b.1).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefOutcome {
    Playing,
    Won,
    Caught,
    TimedOut,
}

/// The reference simulator's state. Ghost and door are stored explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OracleState {
    player: Cell,
    ghost: Cell,
    door: Cell,
    has_key: bool,
    door_moved: bool,
    /// Ghost moves so far.
    ghost_moves: u8,
    moves: u32,
    outcome: RefOutcome,
}

impl OracleState {
    pub fn initial() -> OracleState {
        OracleState {
            player: START,
            ghost: GHOST,
            door: START,
            has_key: false,
            door_moved: false,
            ghost_moves: 0,
            moves: 0,
            outcome: RefOutcome::Playing,
        }
    }

    pub fn player(&self) -> Room {
        room(self.player)
    }

    pub fn ghost(&self) -> Room {
        room(self.ghost)
    }

    pub fn moves(&self) -> u32 {
        self.moves
    }

    pub fn outcome(&self) -> RefOutcome {
        self.outcome
    }

    pub fn is_over(&self) -> bool {
        self.outcome != RefOutcome::Playing
    }

    /// The same situation as an engine state.
    pub fn to_game_state(&self) -> GameState {
        let phase = if !self.has_key {
            Phase::Searching
        } else if !self.door_moved {
            Phase::Returning
        } else {
            Phase::Endgame(self.ghost_moves)
        };
        GameState {
            player: room(self.player),
            ghost: room(self.ghost),
            door: room(self.door),
            has_key: self.has_key,
            phase,
            moves_used: self.moves,
            status: match self.outcome {
                RefOutcome::Playing => Status::InProgress,
                RefOutcome::Won => Status::Escaped,
                RefOutcome::Caught => Status::GhostDeath,
                RefOutcome::TimedOut => Status::OutOfMoves,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("the game is already over")]
    GameOver,
    #[error("no winning command sequence within {limit} moves")]
    NoWin { limit: u32 },
    #[error("policy distribution at {state} sums to {sum}, not 1")]
    BadPolicy { state: String, sum: String },
}

/// Rules of the canonical house with a configurable move cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reference {
    pub limit: u32,
}

impl Default for Reference {
    fn default() -> Reference {
        Reference { limit: 20 }
    }
}

impl Reference {
    pub fn new(limit: u32) -> Reference {
        Reference { limit }
    }

    /// One move of the reference rules. Returns the new state and the clues.
    pub fn apply(
        &self,
        s: &OracleState,
        command: Command,
    ) -> Result<(OracleState, Vec<ClueId>), OracleError> {
        if s.is_over() {
            return Err(OracleError::GameOver);
        }
        let mut n = *s;
        let mut said = Vec::new();

        let target = match command {
            Command::Move(d) => {
                let (dx, dy) = match d {
                    Direction::Left => (-1, 0),
                    Direction::Right => (1, 0),
                    Direction::Up => (0, -1),
                    Direction::Down => (0, 1),
                };
                let t = (s.player.0 + dx, s.player.1 + dy);
                on_grid(t).then_some(t)
            }
            Command::Goto(r) => {
                let t = cell(r);
                (dist(t, s.player) == 1).then_some(t)
            }
        };

        match target {
            None => said.push(ClueId::C2),
            Some(t) if t == s.ghost => {
                n.player = t;
                said.push(ClueId::C11);
                n.outcome = RefOutcome::Caught;
            }
            Some(t) => {
                n.player = t;
                // scripted ghost: down one, then left one, then right two
                if s.door_moved {
                    let fired = match s.ghost_moves {
                        0 if s.player == START => Some(((0, 1), ClueId::C7)),
                        1 if t == A2 => Some(((-1, 0), ClueId::C8)),
                        2 if s.player == A2 => Some(((2, 0), ClueId::C9)),
                        _ => None,
                    };
                    if let Some(((dx, dy), clue)) = fired {
                        n.ghost = (s.ghost.0 + dx, s.ghost.1 + dy);
                        n.ghost_moves += 1;
                        said.push(clue);
                        if n.ghost == t {
                            said.push(ClueId::C11);
                            n.outcome = RefOutcome::Caught;
                        }
                    }
                }
                if n.outcome == RefOutcome::Playing {
                    if !s.has_key && t == KEY {
                        n.has_key = true;
                        said.push(ClueId::C5);
                    } else if s.has_key && !s.door_moved && t == s.door {
                        let far = (0..3)
                            .flat_map(|x| (0..3).map(move |y| (x, y)))
                            .max_by_key(|c| dist(*c, t))
                            .expect("grid is nonempty");
                        n.door = far;
                        n.door_moved = true;
                        said.push(ClueId::C6);
                    } else if s.door_moved && n.ghost_moves == 3 && t == s.door {
                        n.outcome = RefOutcome::Won;
                        said.push(ClueId::C10);
                    }
                }
                if said.is_empty() {
                    if !n.has_key && dist(t, n.ghost) == 1 {
                        said.push(ClueId::C3);
                    }
                    if !n.has_key && dist(t, KEY) == 1 {
                        said.push(ClueId::C4);
                    }
                    if said.is_empty() {
                        said.push(ClueId::C1);
                    }
                }
            }
        }

        n.moves += 1;
        if n.moves == self.limit && n.outcome == RefOutcome::Playing {
            n.outcome = RefOutcome::TimedOut;
            said.push(ClueId::C12);
        }
        Ok((n, said))
    }
}

/// Reference move under the default 20-move cap.
pub fn reference_apply(
    state: &OracleState,
    command: Command,
) -> Result<(OracleState, Vec<ClueId>), OracleError> {
    Reference::default().apply(state, command)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub command: Command,
    pub to: usize,
    pub clues: Vec<ClueId>,
}

/// Every state reachable from the start, with one edge per (state, command).
#[derive(Debug, Clone)]
pub struct StateGraph {
    pub rules: Reference,
    pub form: CommandForm,
    pub nodes: Vec<OracleState>,
    pub edges: Vec<Edge>,
    index: HashMap<OracleState, usize>,
}

impl StateGraph {
    pub fn node_id(&self, s: &OracleState) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn outgoing(&self, node: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.from == node)
    }
}

/// Breadth-first closure from the initial state over every command of `form`.
pub fn enumerate_reachable_with(rules: Reference, form: CommandForm) -> StateGraph {
    let commands = form.all_commands();
    let start = OracleState::initial();
    let mut nodes = vec![start];
    let mut index = HashMap::from([(start, 0usize)]);
    let mut edges = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(id) = queue.pop_front() {
        let s = nodes[id];
        if s.is_over() {
            continue;
        }
        for &command in &commands {
            let (t, clues) = rules.apply(&s, command).expect("node is live");
            let to = *index.entry(t).or_insert_with(|| {
                nodes.push(t);
                queue.push_back(nodes.len() - 1);
                nodes.len() - 1
            });
            edges.push(Edge {
                from: id,
                command,
                to,
                clues,
            });
        }
    }
    StateGraph {
        rules,
        form,
        nodes,
        edges,
        index,
    }
}

pub fn enumerate_reachable() -> StateGraph {
    enumerate_reachable_with(Reference::default(), CommandForm::Direction)
}

/// Length of the shortest winning command sequence under `limit`.
pub fn min_win_length_with(limit: u32) -> Result<u32, OracleError> {
    let graph = enumerate_reachable_with(Reference::new(limit), CommandForm::Direction);
    graph
        .nodes
        .iter()
        .filter(|s| s.outcome == RefOutcome::Won)
        .map(|s| s.moves)
        .min()
        .ok_or(OracleError::NoWin { limit })
}

pub fn min_win_length() -> Result<u32, OracleError> {
    min_win_length_with(Reference::default().limit)
}

/// One shortest winning command sequence, by BFS parent pointers.
pub fn shortest_win(rules: Reference) -> Result<Vec<Command>, OracleError> {
    let graph = enumerate_reachable_with(rules, CommandForm::Direction);
    let mut parent: HashMap<usize, (usize, Command)> = HashMap::new();
    let mut queue = VecDeque::from([0usize]);
    let mut seen = vec![false; graph.nodes.len()];
    seen[0] = true;
    let mut by_from: BTreeMap<usize, Vec<&Edge>> = BTreeMap::new();
    for e in &graph.edges {
        by_from.entry(e.from).or_default().push(e);
    }
    while let Some(id) = queue.pop_front() {
        if graph.nodes[id].outcome == RefOutcome::Won {
            let mut path = Vec::new();
            let mut at = id;
            while let Some((prev, cmd)) = parent.get(&at) {
                path.push(*cmd);
                at = *prev;
            }
            path.reverse();
            return Ok(path);
        }
        for e in by_from.get(&id).into_iter().flatten() {
            if !seen[e.to] {
                seen[e.to] = true;
                parent.insert(e.to, (id, e.command));
                queue.push_back(e.to);
            }
        }
    }
    Err(OracleError::NoWin { limit: rules.limit })
}

/// A randomized player: a probability distribution over commands per state.
pub trait Policy {
    fn distribution(&self, state: &OracleState) -> Vec<(Command, BigRational)>;
}

/// Each of the four directions with probability 1/4.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformDirections;

impl Policy for UniformDirections {
    fn distribution(&self, _state: &OracleState) -> Vec<(Command, BigRational)> {
        let quarter = BigRational::new(BigInt::one(), BigInt::from(4));
        Direction::ALL
            .into_iter()
            .map(|d| (Command::Move(d), quarter.clone()))
            .collect()
    }
}

/// Always plays the command chosen by a function of the state.
pub struct Deterministic<F>(pub F);

impl<F: Fn(&OracleState) -> Command> Policy for Deterministic<F> {
    fn distribution(&self, state: &OracleState) -> Vec<(Command, BigRational)> {
        vec![((self.0)(state), BigRational::one())]
    }
}

/// Exact probability that `policy` escapes, by memoized recursion over the
/// move-layered (hence acyclic) state space.
pub fn random_policy_success_with(
    rules: Reference,
    policy: &dyn Policy,
) -> Result<BigRational, OracleError> {
    fn value(
        rules: Reference,
        policy: &dyn Policy,
        s: OracleState,
        memo: &mut HashMap<OracleState, BigRational>,
    ) -> Result<BigRational, OracleError> {
        if let Some(v) = memo.get(&s) {
            return Ok(v.clone());
        }
        let v = match s.outcome {
            RefOutcome::Won => BigRational::one(),
            RefOutcome::Caught | RefOutcome::TimedOut => BigRational::zero(),
            RefOutcome::Playing => {
                let dist = policy.distribution(&s);
                let sum = dist.iter().fold(BigRational::zero(), |acc, (_, p)| acc + p);
                if sum != BigRational::one() || dist.iter().any(|(_, p)| p.is_negative()) {
                    return Err(OracleError::BadPolicy {
                        state: format!("{s:?}"),
                        sum: sum.to_string(),
                    });
                }
                let mut total = BigRational::zero();
                for (command, p) in dist {
                    if p.is_zero() {
                        continue;
                    }
                    let (t, _) = rules.apply(&s, command)?;
                    total += p * value(rules, policy, t, memo)?;
                }
                total
            }
        };
        memo.insert(s, v.clone());
        Ok(v)
    }
    value(rules, policy, OracleState::initial(), &mut HashMap::new())
}

pub fn random_policy_success(policy: &dyn Policy) -> Result<BigRational, OracleError> {
    random_policy_success_with(Reference::default(), policy)
}

/// Fixed-point decimal rendering of a non-negative rational, truncated.
pub fn to_decimal(r: &BigRational, places: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10), places);
    let scaled = (r.numer() * &scale) / r.denom();
    let digits = scaled.to_string();
    if places == 0 {
        return digits;
    }
    let padded = format!("{digits:0>width$}", width = places + 1);
    let (int, frac) = padded.split_at(padded.len() - places);
    format!("{int}.{frac}")
}

pub fn to_f64(r: &BigRational) -> f64 {
    to_decimal(r, 17).parse().unwrap_or(f64::NAN)
}

/// What every complete play-through shares with others that end in the same
/// node: clue counts (capped at 2) and order violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TraceSummary {
    pub counts: [u8; 12],
    pub events_out_of_order: bool,
    pub nearby_after_key: bool,
    pub position_jump: bool,
}

impl TraceSummary {
    pub fn count(&self, id: ClueId) -> u8 {
        self.counts[id as usize]
    }

    fn record(mut self, from: &OracleState, to: &OracleState, clues: &[ClueId]) -> TraceSummary {
        for c in clues {
            let slot = &mut self.counts[*c as usize];
            *slot = (*slot + 1).min(2);
            if matches!(c, ClueId::C3 | ClueId::C4) && from.has_key {
                self.nearby_after_key = true;
            }
        }
        let events = [ClueId::C7, ClueId::C8, ClueId::C9];
        for (i, e) in events.iter().enumerate() {
            if clues.contains(e) && events[..i].iter().any(|prev| self.count(*prev) == 0) {
                self.events_out_of_order = true;
            }
        }
        let d = dist(from.player, to.player);
        let illegal = clues.first() == Some(&ClueId::C2);
        if (illegal && d != 0) || (!illegal && d != 1) {
            self.position_jump = true;
        }
        self
    }
}

/// Every distinct (final state, summary) pair over all complete traces.
/// Exhaustive over the 4^20 command sequences without enumerating them.
pub fn enumerate_trace_summaries(graph: &StateGraph) -> Vec<(OracleState, TraceSummary)> {
    let mut by_from: HashMap<usize, Vec<&Edge>> = HashMap::new();
    for e in &graph.edges {
        by_from.entry(e.from).or_default().push(e);
    }
    let empty = TraceSummary {
        counts: [0; 12],
        events_out_of_order: false,
        nearby_after_key: false,
        position_jump: false,
    };
    let mut seen = std::collections::HashSet::from([(0usize, empty)]);
    let mut queue = VecDeque::from([(0usize, empty)]);
    let mut finals = Vec::new();
    while let Some((id, summary)) = queue.pop_front() {
        let s = graph.nodes[id];
        if s.is_over() {
            finals.push((s, summary));
            continue;
        }
        for e in by_from.get(&id).into_iter().flatten() {
            let next = summary.record(&s, &graph.nodes[e.to], &e.clues);
            if seen.insert((e.to, next)) {
                queue.push_back((e.to, next));
            }
        }
    }
    finals.sort();
    finals
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactProbability {
    pub numerator: String,
    pub denominator: String,
    pub decimal: String,
}

impl From<&BigRational> for ExactProbability {
    fn from(r: &BigRational) -> ExactProbability {
        ExactProbability {
            numerator: r.numer().to_string(),
            denominator: r.denom().to_string(),
            decimal: to_decimal(r, 15),
        }
    }
}

/// Constants computed from the state graph, written to the derived-values file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedValues {
    pub move_limit: u32,
    pub min_win_length: u32,
    pub shortest_win: Vec<Command>,
    pub uniform_random_success: ExactProbability,
    pub node_count: usize,
    pub edge_count: usize,
    pub terminal_nodes: BTreeMap<String, usize>,
}

pub fn derived_values() -> DerivedValues {
    let rules = Reference::default();
    let graph = enumerate_reachable_with(rules, CommandForm::Direction);
    let mut terminal_nodes = BTreeMap::new();
    for s in graph.nodes.iter().filter(|s| s.is_over()) {
        let key = serde_json::to_value(s.outcome)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        *terminal_nodes.entry(key).or_insert(0) += 1;
    }
    let p =
        random_policy_success_with(rules, &UniformDirections).expect("uniform is a distribution");
    DerivedValues {
        move_limit: rules.limit,
        min_win_length: min_win_length_with(rules.limit).expect("canonical house is winnable"),
        shortest_win: shortest_win(rules).expect("canonical house is winnable"),
        uniform_random_success: (&p).into(),
        node_count: graph.nodes.len(),
        edge_count: graph.edges.len(),
        terminal_nodes,
    }
}
