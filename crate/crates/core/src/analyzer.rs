//! Move-log analysis: what a player could know about their position, the
//! error patterns visible in a move log, sub-objective completion, and
//! grouped summaries in the layout of a results table.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{resolve, Scenario};
use crate::geometry::{adjacent, Room};
use crate::messages::ClueId;
use crate::transcript::{MoveRecord, OutcomeStatus, Transcript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeliefMode {
    /// Only the legal/illegal pattern of past commands is used.
    #[default]
    WallsOnly,
    /// Also requires some ghost/key placement that explains every clue heard.
    ClueAugmented,
}

impl BeliefMode {
    pub fn label(self) -> &'static str {
        match self {
            BeliefMode::WallsOnly => "walls-only",
            BeliefMode::ClueAugmented => "clue-augmented",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyzerError {
    #[error("no starting room is consistent with the first {moves} moves")]
    InconsistentHistory { moves: usize },
}

/// One world the player cannot yet rule out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Hypothesis {
    start: Room,
    current: Room,
    ghost: Option<Room>,
    key: Option<Room>,
    has_key: bool,
    door_moved: bool,
}

impl Hypothesis {
    /// Clues this world predicts for a live entry into `room`, or `None`
    /// once the scripted endgame makes the prediction depend on hidden events.
    fn predicted(&self, room: Room) -> Option<Vec<ClueId>> {
        let ghost = self.ghost?;
        let key = self.key?;
        if self.door_moved {
            return None;
        }
        if room == ghost {
            return Some(vec![ClueId::C11]);
        }
        if self.has_key {
            let clue = if room == self.start {
                ClueId::C6
            } else {
                ClueId::C1
            };
            return Some(vec![clue]);
        }
        if room == key {
            return Some(vec![ClueId::C5]);
        }
        let mut clues = Vec::new();
        if adjacent(room, ghost) {
            clues.push(ClueId::C3);
        }
        if adjacent(room, key) {
            clues.push(ClueId::C4);
        }
        if clues.is_empty() {
            clues.push(ClueId::C1);
        }
        Some(clues)
    }

    fn advance(mut self, record: &MoveRecord) -> Option<Hypothesis> {
        let dest = resolve(self.current, record.command);
        if dest.is_some() != record.legal {
            return None;
        }
        let Some(room) = dest else {
            return Some(self);
        };
        if let Some(expected) = self.predicted(room) {
            let heard: Vec<ClueId> = record
                .clue_ids
                .iter()
                .copied()
                .filter(|c| *c != ClueId::C12)
                .collect();
            if heard != expected {
                return None;
            }
            match expected.first() {
                Some(ClueId::C5) => self.has_key = true,
                Some(ClueId::C6) => self.door_moved = true,
                _ => {}
            }
        }
        self.current = room;
        Some(self)
    }
}

/// Incremental belief over (start, current) pairs.
#[derive(Debug, Clone)]
pub struct BeliefTracker {
    mode: BeliefMode,
    hypotheses: BTreeSet<Hypothesis>,
    seen: usize,
}

impl BeliefTracker {
    pub fn new(mode: BeliefMode) -> BeliefTracker {
        let mut hypotheses = BTreeSet::new();
        for start in Room::ALL {
            let base = Hypothesis {
                start,
                current: start,
                ghost: None,
                key: None,
                has_key: false,
                door_moved: false,
            };
            match mode {
                BeliefMode::WallsOnly => {
                    hypotheses.insert(base);
                }
                BeliefMode::ClueAugmented => {
                    for ghost in Room::ALL {
                        for key in Room::ALL {
                            if ghost != key && ghost != start && key != start {
                                hypotheses.insert(Hypothesis {
                                    ghost: Some(ghost),
                                    key: Some(key),
                                    ..base
                                });
                            }
                        }
                    }
                }
            }
        }
        BeliefTracker {
            mode,
            hypotheses,
            seen: 0,
        }
    }

    pub fn observe(&mut self, record: &MoveRecord) -> Result<(), AnalyzerError> {
        self.seen += 1;
        self.hypotheses = self
            .hypotheses
            .iter()
            .filter_map(|h| h.advance(record))
            .collect();
        if self.hypotheses.is_empty() {
            return Err(AnalyzerError::InconsistentHistory { moves: self.seen });
        }
        Ok(())
    }

    pub fn state(&self) -> BeliefState {
        BeliefState {
            mode: self.mode,
            candidates: self
                .hypotheses
                .iter()
                .map(|h| (h.start, h.current))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeliefState {
    pub mode: BeliefMode,
    /// (start, current) pairs consistent with the history.
    pub candidates: BTreeSet<(Room, Room)>,
}

impl BeliefState {
    pub fn currents(&self) -> BTreeSet<Room> {
        self.candidates.iter().map(|(_, c)| *c).collect()
    }

    /// The player's room, if the history pins it down.
    pub fn located(&self) -> Option<Room> {
        let currents = self.currents();
        match currents.len() {
            1 => currents.into_iter().next(),
            _ => None,
        }
    }
}

pub fn belief(history: &[MoveRecord], mode: BeliefMode) -> Result<BeliefState, AnalyzerError> {
    let mut tracker = BeliefTracker::new(mode);
    for record in history {
        tracker.observe(record)?;
    }
    Ok(tracker.state())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorKind {
    /// Illegal move although the history pinned down the player's room.
    #[serde(rename = "E1_self_location")]
    E1SelfLocation,
    /// From B1 into A1 or B2 before ever visiting C2.
    #[serde(rename = "E2a_b1_guess")]
    E2aB1Guess,
    /// From C2 into B2 or C3 before ever visiting B1.
    #[serde(rename = "E2b_c2_high_risk")]
    E2bC2HighRisk,
    /// Into B2 after visiting both B1 and C2.
    #[serde(rename = "E2c_ignored_evidence")]
    E2cIgnoredEvidence,
    /// Into the ghost's room after the door relocated.
    #[serde(rename = "E3_ghost_tracking")]
    E3GhostTracking,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 5] = [
        ErrorKind::E1SelfLocation,
        ErrorKind::E2aB1Guess,
        ErrorKind::E2bC2HighRisk,
        ErrorKind::E2cIgnoredEvidence,
        ErrorKind::E3GhostTracking,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ErrorKind::E1SelfLocation => "E1",
            ErrorKind::E2aB1Guess => "E2a",
            ErrorKind::E2bC2HighRisk => "E2b",
            ErrorKind::E2cIgnoredEvidence => "E2c",
            ErrorKind::E3GhostTracking => "E3",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ErrorKind::E1SelfLocation => "Self-location",
            ErrorKind::E2aB1Guess => "Guess from B1",
            ErrorKind::E2bC2HighRisk => "High-risk from C2",
            ErrorKind::E2cIgnoredEvidence => "Ignored evidence",
            ErrorKind::E3GhostTracking => "Ghost tracking",
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorInstance {
    pub kind: ErrorKind,
    /// 1-based index of the offending move.
    pub move_index: u32,
    pub evidence: String,
}

/// Finds every error instance in `t`. Room-based, so all variants share it.
///
/// A transcript whose legality pattern no start explains is treated as
/// carrying no E1 information past that point.
pub fn detect_errors(t: &Transcript, mode: BeliefMode) -> Vec<ErrorInstance> {
    let scenario = Scenario::canonical();
    let mut out = Vec::new();

    let mut tracker = BeliefTracker::new(mode);
    let mut tracking = true;

    let mut here = scenario.start;
    let mut ghost = scenario.ghost_room;
    let mut visited: BTreeSet<Room> = BTreeSet::from([here]);
    let mut has_key = false;
    let mut door_moved = false;

    for m in &t.moves {
        if tracking && !m.legal {
            if let Some(r) = tracker.state().located() {
                if resolve(r, m.command).is_none() {
                    out.push(ErrorInstance {
                        kind: ErrorKind::E1SelfLocation,
                        move_index: m.index,
                        evidence: format!(
                            "`{}` is illegal from {r}, the only room consistent with earlier moves",
                            m.command
                        ),
                    });
                }
            }
        }
        if tracking && tracker.observe(m).is_err() {
            tracking = false;
        }

        if m.legal {
            let dest = m.player_after;
            let mut push = |kind, evidence: String| {
                out.push(ErrorInstance {
                    kind,
                    move_index: m.index,
                    evidence,
                })
            };
            if !has_key {
                if here == Room::B1
                    && !visited.contains(&Room::C2)
                    && matches!(dest, Room::A1 | Room::B2)
                {
                    push(
                        ErrorKind::E2aB1Guess,
                        format!("B1 -> {dest} without having visited C2"),
                    );
                }
                if here == Room::C2
                    && !visited.contains(&Room::B1)
                    && matches!(dest, Room::B2 | Room::C3)
                {
                    push(
                        ErrorKind::E2bC2HighRisk,
                        format!("C2 -> {dest} without having visited B1"),
                    );
                }
                if dest == Room::B2 && visited.contains(&Room::B1) && visited.contains(&Room::C2) {
                    push(
                        ErrorKind::E2cIgnoredEvidence,
                        format!("{here} -> B2 after visiting both B1 and C2"),
                    );
                }
            }
            if door_moved && (dest == ghost || m.clue_ids.contains(&ClueId::C11)) {
                push(
                    ErrorKind::E3GhostTracking,
                    format!("{here} -> {dest} into the ghost's room"),
                );
            }
            here = dest;
            visited.insert(dest);
        }
        ghost = m.ghost_after;
        has_key |= m.clue_ids.contains(&ClueId::C5);
        door_moved |= m.clue_ids.contains(&ClueId::C6);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SubObjectiveFlags {
    pub found_key: bool,
    pub returned_c1: bool,
    pub reached_a2: bool,
    pub avoided_a3: bool,
    pub escaped: bool,
}

impl SubObjectiveFlags {
    pub fn as_array(self) -> [bool; 5] {
        [
            self.found_key,
            self.returned_c1,
            self.reached_a2,
            self.avoided_a3,
            self.escaped,
        ]
    }

    /// Each flag implies every earlier one.
    pub fn is_monotone(self) -> bool {
        self.as_array().windows(2).all(|w| w[0] || !w[1])
    }
}

pub const SUBOBJECTIVE_TITLES: [&str; 5] = [
    "Find the key",
    "Move back to C1",
    "Move to A2",
    "Avoid A3",
    "Escape",
];

pub fn subobjectives_from(moves: &[MoveRecord], status: OutcomeStatus) -> SubObjectiveFlags {
    let heard = |id: ClueId| moves.iter().any(|m| m.clue_ids.contains(&id));
    SubObjectiveFlags {
        found_key: heard(ClueId::C5),
        returned_c1: heard(ClueId::C6),
        reached_a2: heard(ClueId::C8),
        avoided_a3: heard(ClueId::C9),
        escaped: status == OutcomeStatus::Escaped,
    }
}

pub fn detect_subobjectives(t: &Transcript) -> SubObjectiveFlags {
    subobjectives_from(&t.moves, t.outcome.status)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptAnalysis {
    pub session_id: String,
    pub group: String,
    pub status: OutcomeStatus,
    pub moves_used: u32,
    pub flags: SubObjectiveFlags,
    pub errors: Vec<ErrorInstance>,
}

impl TranscriptAnalysis {
    pub fn error_kinds(&self) -> BTreeSet<ErrorKind> {
        self.errors.iter().map(|e| e.kind).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    /// Every transcript in the group, invalid ones included.
    pub total: usize,
    pub invalid: usize,
    /// Denominator for the rates below.
    pub n: usize,
    pub passes: usize,
    /// Counts per sub-objective, in [`SUBOBJECTIVE_TITLES`] order.
    pub subobjectives: [usize; 5],
    /// Transcripts with at least one instance of each kind.
    pub error_participants: BTreeMap<ErrorKind, usize>,
    pub error_instances: BTreeMap<ErrorKind, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub mode: BeliefMode,
    pub include_invalid: bool,
    pub transcripts: Vec<TranscriptAnalysis>,
    pub groups: Vec<GroupSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AggregateOptions {
    pub mode: BeliefMode,
    /// Count invalid (broken-dialogue) trials in the denominators.
    pub include_invalid: bool,
}

pub fn analyze(t: &Transcript, group: &str, mode: BeliefMode) -> TranscriptAnalysis {
    TranscriptAnalysis {
        session_id: t.session_id.clone(),
        group: group.to_owned(),
        status: t.outcome.status,
        moves_used: t.outcome.moves_used,
        flags: detect_subobjectives(t),
        errors: detect_errors(t, mode),
    }
}

/// Groups labelled transcripts (first-seen label order) and counts per group.
pub fn aggregate<'a, I>(labelled: I, options: AggregateOptions) -> AnalysisReport
where
    I: IntoIterator<Item = (String, &'a Transcript)>,
{
    let analyses: Vec<TranscriptAnalysis> = labelled
        .into_iter()
        .map(|(label, t)| analyze(t, &label, options.mode))
        .collect();

    let mut order: Vec<String> = Vec::new();
    for a in &analyses {
        if !order.contains(&a.group) {
            order.push(a.group.clone());
        }
    }
    let groups = order
        .into_iter()
        .map(|group| {
            let members: Vec<&TranscriptAnalysis> =
                analyses.iter().filter(|a| a.group == group).collect();
            summarize(group, &members, options.include_invalid)
        })
        .collect();

    AnalysisReport {
        mode: options.mode,
        include_invalid: options.include_invalid,
        transcripts: analyses,
        groups,
    }
}

/// Groups by each transcript's agent label.
pub fn aggregate_by_agent(ts: &[Transcript], options: AggregateOptions) -> AnalysisReport {
    aggregate(ts.iter().map(|t| (t.agent.label(), t)), options)
}

fn summarize(
    group: String,
    members: &[&TranscriptAnalysis],
    include_invalid: bool,
) -> GroupSummary {
    let invalid = members
        .iter()
        .filter(|a| a.status == OutcomeStatus::Invalid)
        .count();
    let counted: Vec<&&TranscriptAnalysis> = members
        .iter()
        .filter(|a| include_invalid || a.status != OutcomeStatus::Invalid)
        .collect();

    let mut subobjectives = [0usize; 5];
    let mut error_participants: BTreeMap<ErrorKind, usize> =
        ErrorKind::ALL.iter().map(|k| (*k, 0)).collect();
    let mut error_instances = error_participants.clone();
    for a in &counted {
        for (slot, hit) in subobjectives.iter_mut().zip(a.flags.as_array()) {
            *slot += usize::from(hit);
        }
        for kind in a.error_kinds() {
            *error_participants.entry(kind).or_default() += 1;
        }
        for e in &a.errors {
            *error_instances.entry(e.kind).or_default() += 1;
        }
    }

    GroupSummary {
        group,
        total: members.len(),
        invalid,
        n: counted.len(),
        passes: subobjectives[4],
        subobjectives,
        error_participants,
        error_instances,
    }
}

/// Whole-number percentage, rounding halves up. Zero when `of` is zero.
pub fn percent(count: usize, of: usize) -> usize {
    if of == 0 {
        0
    } else {
        (200 * count + of) / (2 * of)
    }
}

/// `"20 (69%)"`, or a bare `"0"` for a zero count.
pub fn format_count(count: usize, of: usize) -> String {
    if count == 0 || of == 0 {
        count.to_string()
    } else {
        format!("{count} ({}%)", percent(count, of))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<ReportFormat, String> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" | "structured" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

pub fn render(report: &AnalysisReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => render_text(report),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Json => {
            serde_json::to_string_pretty(report).expect("reports always serialize") + "\n"
        }
    }
}

fn render_text(report: &AnalysisReport) -> String {
    let mut header: Vec<String> = vec!["Participant".into(), "n".into()];
    header.extend(SUBOBJECTIVE_TITLES.iter().map(|s| s.to_string()));
    header.extend(
        ErrorKind::ALL
            .iter()
            .map(|k| format!("{} ({})", k.title(), k.code())),
    );
    header.push("Invalid".into());

    let mut rows = vec![header];
    for g in &report.groups {
        let mut row = vec![g.group.clone(), g.n.to_string()];
        row.extend(g.subobjectives.iter().map(|c| format_count(*c, g.n)));
        row.extend(
            ErrorKind::ALL
                .iter()
                .map(|k| format_count(g.error_participants[k], g.n)),
        );
        row.push(g.invalid.to_string());
        rows.push(row);
    }

    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "\nBelief mode: {}. Invalid trials {} the denominators.",
        report.mode.label(),
        if report.include_invalid {
            "are included in"
        } else {
            "are excluded from"
        }
    );
    out
}

fn render_csv(report: &AnalysisReport) -> String {
    let mut out = String::from("group,metric,count,denominator,percent\n");
    let mut row = |group: &str, metric: &str, count: usize, of: usize| {
        let pct = if of == 0 {
            0.0
        } else {
            100.0 * count as f64 / of as f64
        };
        let _ = writeln!(out, "{},{metric},{count},{of},{pct:.2}", csv_field(group));
    };
    for g in &report.groups {
        row(&g.group, "total", g.total, g.total);
        row(&g.group, "invalid", g.invalid, g.total);
        row(&g.group, "pass", g.passes, g.n);
        for (title, count) in SUBOBJECTIVE_TITLES.iter().zip(g.subobjectives) {
            let metric = title.to_lowercase().replace(' ', "_");
            row(&g.group, &metric, count, g.n);
        }
        for k in ErrorKind::ALL {
            row(
                &g.group,
                &format!("{}_participants", k.code()),
                g.error_participants[&k],
                g.n,
            );
            row(
                &g.group,
                &format!("{}_instances", k.code()),
                g.error_instances[&k],
                g.n,
            );
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Command;
    use crate::geometry::Direction::{self, *};
    use crate::transcript::replay;

    fn play(ds: &[Direction]) -> Transcript {
        let cmds: Vec<Command> = ds.iter().map(|d| Command::Move(*d)).collect();
        replay(&Scenario::canonical(), &cmds, true).unwrap()
    }

    fn kinds(t: &Transcript) -> Vec<(ErrorKind, u32)> {
        detect_errors(t, BeliefMode::WallsOnly)
            .into_iter()
            .map(|e| (e.kind, e.move_index))
            .collect()
    }

    #[test]
    fn empty_history_knows_nothing() {
        let b = belief(&[], BeliefMode::WallsOnly).unwrap();
        assert_eq!(b.currents().len(), 9);
        assert_eq!(b.located(), None);
    }

    #[test]
    fn two_bumps_locate_the_corner() {
        let t = play(&[Up, Right]);
        let b = belief(&t.moves, BeliefMode::WallsOnly).unwrap();
        assert_eq!(b.currents(), BTreeSet::from([Room::C1]));
        assert_eq!(b.candidates, BTreeSet::from([(Room::C1, Room::C1)]));
    }

    #[test]
    fn one_legal_left() {
        let t = play(&[Left]);
        let b = belief(&t.moves, BeliefMode::WallsOnly).unwrap();
        assert_eq!(
            b.currents(),
            BTreeSet::from([Room::A1, Room::B1, Room::A2, Room::B2, Room::A3, Room::B3])
        );
    }

    #[test]
    fn clues_narrow_the_belief() {
        // ghost and key both nearby after one Left: the clue-aware belief
        // must still contain the truth and be no larger than walls-only.
        let t = play(&[Left]);
        let walls = belief(&t.moves, BeliefMode::WallsOnly).unwrap().currents();
        let clues = belief(&t.moves, BeliefMode::ClueAugmented)
            .unwrap()
            .currents();
        assert!(clues.contains(&Room::B1));
        assert!(clues.is_subset(&walls));

        // C6 is only heard back in the start room
        let t = play(&[Left, Left, Right, Right]);
        let b = belief(&t.moves, BeliefMode::ClueAugmented).unwrap();
        assert!(b.candidates.iter().all(|(start, current)| start == current));
        assert!(b.currents().contains(&Room::C1));
    }

    #[test]
    fn impossible_history() {
        // three legal Ups cannot happen on a three-row grid
        let mut t = play(&[Up, Up, Up]);
        for m in &mut t.moves {
            m.legal = true;
        }
        assert!(matches!(
            belief(&t.moves, BeliefMode::WallsOnly),
            Err(AnalyzerError::InconsistentHistory { moves: 3 })
        ));
    }

    #[test]
    fn error_fixtures() {
        assert_eq!(
            kinds(&play(&[Up, Right, Right])),
            [(ErrorKind::E1SelfLocation, 3)]
        );
        assert_eq!(kinds(&play(&[Left, Left])), [(ErrorKind::E2aB1Guess, 2)]);
        assert_eq!(kinds(&play(&[Left, Down])), [(ErrorKind::E2aB1Guess, 2)]);
        assert_eq!(kinds(&play(&[Down, Down])), [(ErrorKind::E2bC2HighRisk, 2)]);
        assert_eq!(
            kinds(&play(&[Left, Right, Down, Left])),
            [(ErrorKind::E2cIgnoredEvidence, 4)]
        );
        assert_eq!(
            kinds(&play(&[
                Down, Up, Left, Left, Right, Right, Down, Down, Left
            ])),
            [(ErrorKind::E3GhostTracking, 9)]
        );
    }

    #[test]
    fn walkthrough_is_clean() {
        let t = play(&[
            Down, Up, Left, Left, Right, Right, Left, Left, Down, Up, Down, Down,
        ]);
        assert!(detect_errors(&t, BeliefMode::WallsOnly).is_empty());
        assert!(detect_errors(&t, BeliefMode::ClueAugmented).is_empty());
        let f = detect_subobjectives(&t);
        assert_eq!(f.as_array(), [true; 5]);
    }

    #[test]
    fn subobjective_examples() {
        assert_eq!(
            detect_subobjectives(&play(&[Left, Down])).as_array(),
            [false; 5]
        );
        let t = play(&[Left, Left, Right, Right, Left, Left, Down, Down]);
        assert_eq!(t.outcome.status, OutcomeStatus::GhostDeath);
        assert_eq!(
            detect_subobjectives(&t).as_array(),
            [true, true, true, false, false]
        );
        // the fatal A3 step is a ghost-tracking error
        assert_eq!(
            kinds(&t),
            [(ErrorKind::E2aB1Guess, 2), (ErrorKind::E3GhostTracking, 8)]
        );
    }

    #[test]
    fn percent_formatting() {
        assert_eq!(format_count(20, 29), "20 (69%)");
        assert_eq!(format_count(16, 29), "16 (55%)");
        assert_eq!(format_count(10, 29), "10 (34%)");
        assert_eq!(format_count(9, 29), "9 (31%)");
        assert_eq!(format_count(1, 20), "1 (5%)");
        assert_eq!(format_count(0, 20), "0");
        assert_eq!(percent(1, 8), 13);
        assert_eq!(percent(3, 0), 0);
    }

    #[test]
    fn empty_report() {
        let report = aggregate_by_agent(&[], AggregateOptions::default());
        assert!(report.groups.is_empty());
        assert!(render(&report, ReportFormat::Text).contains("Participant"));
        assert_eq!(
            render(&report, ReportFormat::Csv),
            "group,metric,count,denominator,percent\n"
        );
    }

    #[test]
    fn invalid_trials_leave_the_denominator() {
        let win = play(&[
            Down, Up, Left, Left, Right, Right, Left, Left, Down, Up, Down, Down,
        ]);
        let mut broken = play(&[]);
        broken.outcome.status = OutcomeStatus::Invalid;
        let ts = vec![win.clone(), broken];
        let r = aggregate_by_agent(&ts, AggregateOptions::default());
        assert_eq!(r.groups[0].total, 2);
        assert_eq!(r.groups[0].n, 1);
        assert_eq!(r.groups[0].invalid, 1);
        let r = aggregate_by_agent(
            &ts,
            AggregateOptions {
                include_invalid: true,
                ..Default::default()
            },
        );
        assert_eq!(r.groups[0].n, 2);
    }
}
