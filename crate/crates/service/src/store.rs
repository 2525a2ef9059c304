//! Append-only event log, one JSON event per line.
//!
//! Sessions are rebuilt at startup by replaying each recorded command through
//! the engine; a recomputed move that differs from the stored one is an error.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use haunted_core::messages::InstructionVariant;
use haunted_core::transcript::MoveRecord;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created {
        session_id: String,
        created_at: DateTime<Utc>,
        variant: InstructionVariant,
        locale: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        meta: Option<Map<String, Value>>,
    },
    Moved {
        session_id: String,
        record: MoveRecord,
    },
    /// The session expired before finishing.
    Frozen {
        session_id: String,
        at: DateTime<Utc>,
    },
}

impl Event {
    pub fn session_id(&self) -> &str {
        match self {
            Event::Created { session_id, .. }
            | Event::Moved { session_id, .. }
            | Event::Frozen { session_id, .. } => session_id,
        }
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("event store {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("event store line {line}: {source}")]
    Corrupt {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("session {session}: {detail}")]
    Inconsistent { session: String, detail: String },
}

#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl EventLog {
    /// Opens (creating if needed) the log and returns the events it holds.
    ///
    /// A final line without a newline is a torn write from a crash and is
    /// dropped; a bad line anywhere else is corruption.
    pub fn open(path: &Path) -> Result<(EventLog, Vec<Event>), StoreError> {
        let io_err = |source| StoreError::Io {
            path: path.to_owned(),
            source,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io_err)?;
        }
        let mut events = Vec::new();
        let mut keep_bytes = 0u64;
        if path.exists() {
            let mut reader = BufReader::new(File::open(path).map_err(io_err)?);
            let mut line = String::new();
            let mut n = 0;
            loop {
                line.clear();
                let read = reader.read_line(&mut line).map_err(io_err)?;
                if read == 0 {
                    break;
                }
                n += 1;
                let complete = line.ends_with('\n');
                if line.trim().is_empty() {
                    keep_bytes += read as u64;
                    continue;
                }
                if !complete {
                    log::warn!("dropping torn final line {n} of {}", path.display());
                    break;
                }
                let event = serde_json::from_str::<Event>(line.trim_end())
                    .map_err(|source| StoreError::Corrupt { line: n, source })?;
                events.push(event);
                keep_bytes += read as u64;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err)?;
        file.set_len(keep_bytes).map_err(io_err)?;
        Ok((
            EventLog {
                path: path.to_owned(),
                file: Mutex::new(file),
            },
            events,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes one event as a single line and syncs it to disk.
    pub fn append(&self, event: &Event) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(event).expect("events always serialize");
        line.push('\n');
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        file.write_all(line.as_bytes())
            .and_then(|_| file.sync_data())
            .map_err(|source| StoreError::Io {
                path: self.path.clone(),
                source,
            })
    }
}

/// Events grouped per session, in first-seen order.
pub fn group_events(events: Vec<Event>) -> Vec<(String, Vec<Event>)> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<Event>> = HashMap::new();
    for event in events {
        let id = event.session_id().to_owned();
        groups
            .entry(id.clone())
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push(event);
    }
    order
        .into_iter()
        .map(|id| {
            let evs = groups.remove(&id).unwrap_or_default();
            (id, evs)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn created(id: &str) -> Event {
        Event::Created {
            session_id: id.into(),
            created_at: DateTime::from_timestamp(0, 0).unwrap(),
            variant: InstructionVariant::Original,
            locale: "en".into(),
            meta: None,
        }
    }

    #[test]
    fn round_trip_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        {
            let (log, events) = EventLog::open(&path).unwrap();
            assert!(events.is_empty());
            log.append(&created("a")).unwrap();
            log.append(&created("b")).unwrap();
        }
        // simulate a crash in the middle of a write
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"event\":\"created\",\"sess").unwrap();
        drop(f);

        let (log, events) = EventLog::open(&path).unwrap();
        assert_eq!(events, vec![created("a"), created("b")]);
        log.append(&created("c")).unwrap();
        drop(log);
        let (_, events) = EventLog::open(&path).unwrap();
        assert_eq!(events.len(), 3);
    }

    #[test]
    fn corruption_in_the_middle_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        std::fs::write(&path, "garbage\n{}\n").unwrap();
        assert!(matches!(
            EventLog::open(&path),
            Err(StoreError::Corrupt { line: 1, .. })
        ));
    }

    #[test]
    fn grouping_keeps_first_seen_order() {
        let groups = group_events(vec![
            created("b"),
            created("a"),
            Event::Frozen {
                session_id: "b".into(),
                at: DateTime::from_timestamp(1, 0).unwrap(),
            },
        ]);
        let ids: Vec<&str> = groups.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids, ["b", "a"]);
        assert_eq!(groups[0].1.len(), 2);
    }
}
