//! Rooms, directions and distances on the 3x3 house grid.
//!
//! Columns run `A..C` left to right and rows `1..3` top to bottom, so the
//! top-right room is `C1` and the bottom-left room is `A3`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Grid side length.
pub const SIDE: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Column {
    A,
    B,
    C,
}

impl Column {
    pub const ALL: [Column; 3] = [Column::A, Column::B, Column::C];

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(index: u8) -> Option<Column> {
        Column::ALL.get(usize::from(index)).copied()
    }

    pub fn letter(self) -> char {
        (b'A' + self.index()) as char
    }
}

/// One of the nine rooms. Ordering is row-major: `A1, B1, C1, A2, ...`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Room(u8);

impl Room {
    pub const A1: Room = Room(0);
    pub const B1: Room = Room(1);
    pub const C1: Room = Room(2);
    pub const A2: Room = Room(3);
    pub const B2: Room = Room(4);
    pub const C2: Room = Room(5);
    pub const A3: Room = Room(6);
    pub const B3: Room = Room(7);
    pub const C3: Room = Room(8);

    /// All rooms in row-major order.
    pub const ALL: [Room; 9] = [
        Room::A1,
        Room::B1,
        Room::C1,
        Room::A2,
        Room::B2,
        Room::C2,
        Room::A3,
        Room::B3,
        Room::C3,
    ];

    /// Builds a room from a column and a 1-based row. Returns `None` off-grid.
    pub fn new(column: Column, row: u8) -> Option<Room> {
        (1..=SIDE)
            .contains(&row)
            .then(|| Room((row - 1) * SIDE + column.index()))
    }

    /// Zero-based column and row.
    fn from_xy(x: i8, y: i8) -> Option<Room> {
        let side = SIDE as i8;
        ((0..side).contains(&x) && (0..side).contains(&y)).then(|| Room((y * side + x) as u8))
    }

    pub fn column(self) -> Column {
        Column::ALL[usize::from(self.0 % SIDE)]
    }

    /// 1-based row number.
    pub fn row(self) -> u8 {
        self.0 / SIDE + 1
    }

    /// Row-major index in `0..9`.
    pub fn index(self) -> usize {
        usize::from(self.0)
    }

    pub fn from_index(index: usize) -> Option<Room> {
        Room::ALL.get(index).copied()
    }

    fn xy(self) -> (i8, i8) {
        ((self.0 % SIDE) as i8, (self.0 / SIDE) as i8)
    }

    pub fn is_corner(self) -> bool {
        self.legal_directions().count() == 2
    }

    /// Directions with a room behind them, in `Direction::ALL` order.
    pub fn legal_directions(self) -> impl Iterator<Item = Direction> {
        Direction::ALL
            .into_iter()
            .filter(move |d| step(self, *d).is_some())
    }

    /// Orthogonal neighbours in row-major order.
    pub fn neighbours(self) -> impl Iterator<Item = Room> {
        Room::ALL.into_iter().filter(move |r| adjacent(self, *r))
    }
}

impl fmt::Display for Room {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.column().letter(), self.row())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid room label {0:?}: expected a column A-C followed by a row 1-3")]
pub struct ParseRoomError(pub String);

impl FromStr for Room {
    type Err = ParseRoomError;

    fn from_str(label: &str) -> Result<Room, ParseRoomError> {
        let err = || ParseRoomError(label.to_owned());
        let bytes = label.as_bytes();
        if bytes.len() != 2 {
            return Err(err());
        }
        let column = match bytes[0].to_ascii_uppercase() {
            b'A' => Column::A,
            b'B' => Column::B,
            b'C' => Column::C,
            _ => return Err(err()),
        };
        let row = match bytes[1] {
            b @ b'1'..=b'3' => b - b'0',
            _ => return Err(err()),
        };
        Room::new(column, row).ok_or_else(err)
    }
}

impl Serialize for Room {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Room {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Room, D::Error> {
        let label = String::deserialize(deserializer)?;
        label.parse().map_err(serde::de::Error::custom)
    }
}

pub fn parse_room(label: &str) -> Result<Room, ParseRoomError> {
    label.parse()
}

pub fn format_room(room: Room) -> String {
    room.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
    Up,
    Down,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Left,
        Direction::Right,
        Direction::Up,
        Direction::Down,
    ];

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }

    /// Column and row delta. Up decrements the row.
    pub fn delta(self) -> (i8, i8) {
        match self {
            Direction::Left => (-1, 0),
            Direction::Right => (1, 0),
            Direction::Up => (0, -1),
            Direction::Down => (0, 1),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid direction {0:?}: expected left, right, up or down")]
pub struct ParseDirectionError(pub String);

impl FromStr for Direction {
    type Err = ParseDirectionError;

    fn from_str(s: &str) -> Result<Direction, ParseDirectionError> {
        Direction::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ParseDirectionError(s.to_owned()))
    }
}

/// The orthogonal neighbour of `from` in direction `dir`, if it is on the grid.
pub fn step(from: Room, dir: Direction) -> Option<Room> {
    let (x, y) = from.xy();
    let (dx, dy) = dir.delta();
    Room::from_xy(x + dx, y + dy)
}

pub fn manhattan(a: Room, b: Room) -> u8 {
    let (ax, ay) = a.xy();
    let (bx, by) = b.xy();
    (ax - bx).unsigned_abs() + (ay - by).unsigned_abs()
}

/// True iff the rooms share a wall. A room is not adjacent to itself.
pub fn adjacent(a: Room, b: Room) -> bool {
    manhattan(a, b) == 1
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("no unique farthest room from {from}: {candidates:?} are tied")]
    AmbiguousTarget { from: Room, candidates: Vec<Room> },
}

/// The unique room farthest from `from` by Manhattan distance.
pub fn max_distance_room(from: Room) -> Result<Room, GeometryError> {
    let best = Room::ALL
        .iter()
        .map(|r| manhattan(from, *r))
        .max()
        .unwrap_or(0);
    let candidates: Vec<Room> = Room::ALL
        .into_iter()
        .filter(|r| manhattan(from, *r) == best)
        .collect();
    match candidates.as_slice() {
        [only] => Ok(*only),
        _ => Err(GeometryError::AmbiguousTarget { from, candidates }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn room(label: &str) -> Room {
        label.parse().unwrap()
    }

    #[test]
    fn step_examples() {
        assert_eq!(step(Room::C1, Direction::Right), None);
        assert_eq!(step(Room::C1, Direction::Left), Some(Room::B1));
        assert_eq!(step(Room::B2, Direction::Down), Some(Room::B3));
        assert_eq!(step(Room::A2, Direction::Up), Some(Room::A1));
    }

    #[test]
    fn adjacency_examples() {
        assert!(adjacent(Room::B1, Room::A1));
        assert!(!adjacent(Room::C2, Room::A1));
        for r in Room::ALL {
            assert!(!adjacent(r, r));
        }
    }

    #[test]
    fn manhattan_examples() {
        assert_eq!(manhattan(Room::C1, Room::A3), 4);
        assert_eq!(manhattan(Room::B2, Room::B2), 0);
        assert_eq!(manhattan(Room::A1, Room::C1), 2);
    }

    #[test]
    fn farthest_room() {
        assert_eq!(max_distance_room(Room::C1), Ok(Room::A3));
        assert_eq!(max_distance_room(Room::A1), Ok(Room::C3));
        match max_distance_room(Room::B2) {
            Err(GeometryError::AmbiguousTarget { candidates, .. }) => {
                assert_eq!(candidates, vec![Room::A1, Room::C1, Room::A3, Room::C3]);
            }
            other => panic!("expected a tie, got {other:?}"),
        }
        // edge rooms tie between the two far corners
        assert!(max_distance_room(Room::B1).is_err());
    }

    #[test]
    fn every_corner_maps_to_its_opposite() {
        for r in Room::ALL.into_iter().filter(|r| r.is_corner()) {
            let far = max_distance_room(r).unwrap();
            assert_eq!(manhattan(r, far), 4);
            assert_ne!(far.column(), r.column());
            assert_ne!(far.row(), r.row());
        }
    }

    #[test]
    fn labels() {
        assert_eq!(room("c3"), Room::C3);
        assert_eq!(format_room(parse_room("B2").unwrap()), "B2");
        assert!(parse_room("D4").is_err());
        assert!(parse_room("A0").is_err());
        assert!(parse_room("A").is_err());
        assert!(parse_room("A12").is_err());
        assert!(parse_room("").is_err());
        let labels: Vec<String> = Room::ALL.iter().map(|r| r.to_string()).collect();
        assert_eq!(
            labels,
            ["A1", "B1", "C1", "A2", "B2", "C2", "A3", "B3", "C3"]
        );
    }

    #[test]
    fn legal_direction_counts() {
        for r in Room::ALL {
            let n = r.legal_directions().count();
            let expected = match r {
                Room::B2 => 4,
                Room::A1 | Room::C1 | Room::A3 | Room::C3 => 2,
                _ => 3,
            };
            assert_eq!(n, expected, "{r}");
        }
    }

    #[test]
    fn serde_uses_labels() {
        assert_eq!(serde_json::to_string(&Room::B3).unwrap(), "\"B3\"");
        assert_eq!(serde_json::from_str::<Room>("\"a2\"").unwrap(), Room::A2);
        assert_eq!(serde_json::to_string(&Direction::Down).unwrap(), "\"down\"");
    }

    fn any_room() -> impl Strategy<Value = Room> {
        (0usize..9).prop_map(|i| Room::ALL[i])
    }

    fn any_direction() -> impl Strategy<Value = Direction> {
        (0usize..4).prop_map(|i| Direction::ALL[i])
    }

    proptest! {
        #[test]
        fn step_moves_exactly_one_and_reverses(r in any_room(), d in any_direction()) {
            if let Some(s) = step(r, d) {
                prop_assert_eq!(manhattan(r, s), 1);
                prop_assert_eq!(step(s, d.opposite()), Some(r));
            }
        }

        #[test]
        fn label_round_trip(r in any_room(), lower in any::<bool>()) {
            let label = if lower { r.to_string().to_lowercase() } else { r.to_string() };
            prop_assert_eq!(parse_room(&label), Ok(r));
        }

        #[test]
        fn manhattan_is_a_metric(a in any_room(), b in any_room(), c in any_room()) {
            prop_assert_eq!(manhattan(a, b), manhattan(b, a));
            prop_assert!(manhattan(a, c) <= manhattan(a, b) + manhattan(b, c));
            prop_assert_eq!(manhattan(a, b) == 0, a == b);
        }
    }
}
