//! Clue catalog, instruction text for the three variants, feedback rendering
//! and parsing of free-text replies into commands.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Command, CommandForm, Feedback};
use crate::geometry::{Direction, Room};

const ENGLISH: &str = include_str!("../catalog/en.txt");

pub const DEFAULT_LOCALE: &str = "en";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClueId {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
    C8,
    C9,
    C10,
    C11,
    /// Out of moves.
    C12,
}

impl ClueId {
    pub const ALL: [ClueId; 12] = [
        ClueId::C1,
        ClueId::C2,
        ClueId::C3,
        ClueId::C4,
        ClueId::C5,
        ClueId::C6,
        ClueId::C7,
        ClueId::C8,
        ClueId::C9,
        ClueId::C10,
        ClueId::C11,
        ClueId::C12,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ClueId::C1 => "C1",
            ClueId::C2 => "C2",
            ClueId::C3 => "C3",
            ClueId::C4 => "C4",
            ClueId::C5 => "C5",
            ClueId::C6 => "C6",
            ClueId::C7 => "C7",
            ClueId::C8 => "C8",
            ClueId::C9 => "C9",
            ClueId::C10 => "C10",
            ClueId::C11 => "C11",
            ClueId::C12 => "C12",
        }
    }

    /// Clues that end the game.
    pub fn is_terminal(self) -> bool {
        matches!(self, ClueId::C10 | ClueId::C11 | ClueId::C12)
    }
}

impl fmt::Display for ClueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ClueId {
    type Err = MessageError;

    fn from_str(s: &str) -> Result<ClueId, MessageError> {
        ClueId::ALL
            .into_iter()
            .find(|id| id.key().eq_ignore_ascii_case(s))
            .ok_or_else(|| MessageError::UnknownClue(s.to_owned()))
    }
}

impl Serialize for ClueId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.key())
    }
}

impl<'de> Deserialize<'de> for ClueId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<ClueId, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstructionVariant {
    #[default]
    Original,
    /// Original plus the stationary-ghost statement.
    Ghost,
    /// Ghost plus a labeled grid, a known start and coordinate movement.
    Coordinates,
}

impl InstructionVariant {
    pub const ALL: [InstructionVariant; 3] = [
        InstructionVariant::Original,
        InstructionVariant::Ghost,
        InstructionVariant::Coordinates,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InstructionVariant::Original => "original",
            InstructionVariant::Ghost => "ghost",
            InstructionVariant::Coordinates => "coordinates",
        }
    }

    pub fn command_form(self) -> CommandForm {
        match self {
            InstructionVariant::Coordinates => CommandForm::Coordinates,
            _ => CommandForm::Direction,
        }
    }
}

impl fmt::Display for InstructionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InstructionVariant {
    type Err = MessageError;

    fn from_str(s: &str) -> Result<InstructionVariant, MessageError> {
        InstructionVariant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| MessageError::UnknownVariant(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MessageError {
    #[error("no message catalog for locale {0:?}")]
    UnknownLocale(String),
    #[error("catalog {locale:?} has no entry {key:?}")]
    MissingEntry { locale: String, key: String },
    #[error("catalog line {line}: expected `<key> = <text>`")]
    Malformed { line: usize },
    #[error("unknown clue id {0:?}")]
    UnknownClue(String),
    #[error("unknown instruction variant {0:?}")]
    UnknownVariant(String),
    #[error("reading catalog: {0}")]
    Io(String),
}

/// Non-clue keys every catalog must provide.
const FRAGMENT_KEYS: &[&str] = &[
    "instructions.title",
    "instructions.intro",
    "instructions.info_heading",
    "instructions.grid",
    "instructions.grid.coordinates",
    "instructions.start",
    "instructions.start.coordinates",
    "instructions.door",
    "instructions.avoid",
    "instructions.stationary",
    "instructions.movement_heading",
    "instructions.one_room",
    "instructions.no_diagonal",
    "instructions.how_to_move",
    "instructions.how_to_move.coordinates",
    "instructions.clues_heading",
    "instructions.clue_on_entry",
    "instructions.key_clue",
    "instructions.ghost_clue",
    "instructions.other_clues",
    "instructions.begin",
    "instructions.begin.coordinates",
    "harness.opening",
    "harness.reprompt.direction",
    "harness.reprompt.coordinates",
];

/// A locale's message table. Every clue and instruction fragment is
/// guaranteed present once constructed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageCatalog {
    locale: String,
    entries: BTreeMap<String, String>,
}

impl MessageCatalog {
    /// The built-in English catalog.
    pub fn english() -> MessageCatalog {
        MessageCatalog::parse(DEFAULT_LOCALE, ENGLISH).expect("built-in catalog is complete")
    }

    /// Looks up a built-in catalog by locale tag.
    pub fn for_locale(locale: &str) -> Result<MessageCatalog, MessageError> {
        if locale.eq_ignore_ascii_case(DEFAULT_LOCALE) {
            Ok(MessageCatalog::english())
        } else {
            Err(MessageError::UnknownLocale(locale.to_owned()))
        }
    }

    pub fn available_locales() -> &'static [&'static str] {
        &[DEFAULT_LOCALE]
    }

    pub fn load(locale: &str, path: &Path) -> Result<MessageCatalog, MessageError> {
        let text = std::fs::read_to_string(path).map_err(|e| MessageError::Io(e.to_string()))?;
        MessageCatalog::parse(locale, &text)
    }

    /// Parses `<key> = <text>` lines. Blank lines and `#` comments are skipped.
    pub fn parse(locale: &str, text: &str) -> Result<MessageCatalog, MessageError> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(MessageError::Malformed { line: n + 1 })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(MessageError::Malformed { line: n + 1 });
            }
            entries.insert(key.to_owned(), value.trim().to_owned());
        }
        let catalog = MessageCatalog {
            locale: locale.to_owned(),
            entries,
        };
        let required = ClueId::ALL
            .iter()
            .map(|id| id.key())
            .chain(FRAGMENT_KEYS.iter().copied());
        for key in required {
            if !catalog.entries.contains_key(key) {
                return Err(MessageError::MissingEntry {
                    locale: locale.to_owned(),
                    key: key.to_owned(),
                });
            }
        }
        Ok(catalog)
    }

    pub fn locale(&self) -> &str {
        &self.locale
    }

    /// Raw entry lookup.
    pub fn get(&self, key: &str) -> Result<&str, MessageError> {
        self.entries
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| MessageError::MissingEntry {
                locale: self.locale.clone(),
                key: key.to_owned(),
            })
    }

    fn fragment(&self, key: &str) -> &str {
        self.get(key).expect("fragment keys validated at load")
    }

    pub fn clue(&self, id: ClueId) -> &str {
        self.fragment(id.key())
    }

    pub fn opening_prompt(&self) -> &str {
        self.fragment("harness.opening")
    }

    pub fn reprompt(&self, form: CommandForm) -> &str {
        match form {
            CommandForm::Direction => self.fragment("harness.reprompt.direction"),
            CommandForm::Coordinates => self.fragment("harness.reprompt.coordinates"),
        }
    }

    /// Full instruction text for `variant`.
    pub fn instructions(&self, variant: InstructionVariant) -> String {
        let coords = variant == InstructionVariant::Coordinates;
        let pick = |plain: &str| -> &str {
            let alt = format!("{plain}.coordinates");
            if coords {
                self.fragment(&alt)
            } else {
                self.fragment(plain)
            }
        };
        let f = |key: &str| self.fragment(key);

        let mut info = vec![
            pick("instructions.grid"),
            pick("instructions.start"),
            f("instructions.door"),
            f("instructions.avoid"),
        ];
        if variant != InstructionVariant::Original {
            info.push(f("instructions.stationary"));
        }
        let movement = [
            f("instructions.one_room"),
            f("instructions.no_diagonal"),
            pick("instructions.how_to_move"),
        ];
        let clues = [
            f("instructions.clue_on_entry"),
            f("instructions.key_clue"),
            f("instructions.ghost_clue"),
            f("instructions.other_clues"),
        ];

        let bullets = |items: &[&str]| {
            items
                .iter()
                .map(|s| format!("- {s}"))
                .collect::<Vec<_>>()
                .join("\n")
        };
        [
            f("instructions.title").to_owned(),
            f("instructions.intro").to_owned(),
            f("instructions.info_heading").to_owned(),
            bullets(&info),
            f("instructions.movement_heading").to_owned(),
            bullets(&movement),
            f("instructions.clues_heading").to_owned(),
            bullets(&clues),
            pick("instructions.begin").to_owned(),
        ]
        .join("\n\n")
    }

    /// Renders each clue as a sentence and joins them with single spaces.
    pub fn render(&self, clues: &[ClueId]) -> String {
        clues
            .iter()
            .map(|id| as_sentence(self.clue(*id)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn render_feedback(&self, feedback: &Feedback) -> String {
        self.render(&feedback.clue_ids)
    }
}

impl Default for MessageCatalog {
    fn default() -> MessageCatalog {
        MessageCatalog::english()
    }
}

fn as_sentence(text: &str) -> String {
    if text.ends_with(['.', '!', '?']) {
        text.to_owned()
    } else {
        format!("{text}.")
    }
}

pub fn clue_text(id: ClueId, catalog: &MessageCatalog) -> &str {
    catalog.clue(id)
}

pub fn render_feedback(feedback: &Feedback, catalog: &MessageCatalog) -> String {
    catalog.render_feedback(feedback)
}

pub fn instructions(variant: InstructionVariant, catalog: &MessageCatalog) -> String {
    catalog.instructions(variant)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseMode {
    /// The last movement token anywhere in the reply wins.
    #[default]
    LastToken,
    /// The whole reply must be one movement token (surrounding punctuation allowed).
    Strict,
}

fn tokens(reply: &str) -> impl Iterator<Item = &str> {
    reply
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
}

fn token_command(token: &str, form: CommandForm) -> Option<Command> {
    match form {
        CommandForm::Direction => token.parse::<Direction>().ok().map(Command::Move),
        CommandForm::Coordinates => token.parse::<Room>().ok().map(Command::Goto),
    }
}

/// Extracts a command from a free-text reply using [`ParseMode::LastToken`].
pub fn parse_command(reply: &str, variant: InstructionVariant) -> Option<Command> {
    parse_command_with(reply, variant, ParseMode::LastToken)
}

pub fn parse_command_with(
    reply: &str,
    variant: InstructionVariant,
    mode: ParseMode,
) -> Option<Command> {
    let form = variant.command_form();
    match mode {
        ParseMode::LastToken => tokens(reply).filter_map(|t| token_command(t, form)).last(),
        ParseMode::Strict => {
            let mut it = tokens(reply);
            match (it.next(), it.next()) {
                (Some(only), None) => token_command(only, form),
                _ => None,
            }
        }
    }
}
