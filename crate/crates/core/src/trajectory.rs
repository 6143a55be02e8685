//! Line-delimited trajectory persistence.
//!
//! One self-describing JSON record per line, UTF-8, appendable. Whole-line
//! discipline makes the format crash-tolerant: an interrupted writer leaves
//! at most one partial final line, which readers drop with a warning.
//! Unknown fields round-trip opaquely for forward compatibility.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::model::TrajectoryEntry;

/// File extension for trajectory files.
pub const TRAJECTORY_EXTENSION: &str = "aimtrj";

/// Serializes one entry as a single physical line (no trailing newline).
/// Embedded newlines in proof or statement text are escaped by the JSON
/// encoding.
pub fn entry_to_line(entry: &TrajectoryEntry) -> Result<String, TrajectoryError> {
    serde_json::to_string(entry).map_err(|e| TrajectoryError::Serialize {
        detail: e.to_string(),
    })
}

/// Serializes a whole trajectory: one line per entry, each terminated by a
/// newline, so the output is directly appendable.
pub fn write_trajectory(entries: &[TrajectoryEntry]) -> Result<String, TrajectoryError> {
    let mut out = String::new();
    for entry in entries {
        out.push_str(&entry_to_line(entry)?);
        out.push('\n');
    }
    Ok(out)
}

/// What a crash-tolerant read produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadOutcome {
    pub entries: Vec<TrajectoryEntry>,
    /// True when the stream ended mid-line; the partial record was dropped.
    pub truncated_tail: bool,
}

/// Parses a trajectory stream. Exact inverse of [`write_trajectory`] on its
/// own output. A final line without a terminating newline is treated as a
/// truncated write and dropped (`truncated_tail` reports it); a *complete*
/// line that fails to parse is an error carrying its 1-based line number.
pub fn read_trajectory(bytes: &[u8]) -> Result<ReadOutcome, TrajectoryError> {
    let mut entries = Vec::new();
    let mut line_no = 0usize;
    let mut rest = bytes;
    loop {
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            // No newline left: either clean EOF or a truncated tail.
            return Ok(ReadOutcome {
                entries,
                truncated_tail: !rest.is_empty(),
            });
        };
        let line = &rest[..nl];
        rest = &rest[nl + 1..];
        line_no += 1;
        let text = core::str::from_utf8(line).map_err(|_| TrajectoryError::MalformedRecord {
            line: line_no,
            detail: "invalid UTF-8".to_string(),
        })?;
        let entry: TrajectoryEntry =
            serde_json::from_str(text).map_err(|e| TrajectoryError::MalformedRecord {
                line: line_no,
                detail: e.to_string(),
            })?;
        entries.push(entry);
    }
}

/// Receives entries as they are appended; the orchestrator flushes every
/// entry through its sink before continuing, so aborted runs stay
/// inspectable. Implementations must preserve whole-line discipline.
pub trait TrajectorySink {
    fn append(&mut self, entry: &TrajectoryEntry) -> Result<(), SinkError>;
}

/// Sink that drops everything (for runs that only need the in-memory
/// trajectory).
#[derive(Debug, Clone, Copy, Default)]
pub struct NullSink;

impl TrajectorySink for NullSink {
    fn append(&mut self, _entry: &TrajectoryEntry) -> Result<(), SinkError> {
        Ok(())
    }
}

/// Sink that accumulates the serialized stream in memory; what a file sink
/// would have written.
#[derive(Debug, Clone, Default)]
pub struct BufferSink {
    pub buf: String,
}

impl TrajectorySink for BufferSink {
    fn append(&mut self, entry: &TrajectoryEntry) -> Result<(), SinkError> {
        let line = entry_to_line(entry).map_err(|e| SinkError {
            detail: e.to_string(),
        })?;
        self.buf.push_str(&line);
        self.buf.push('\n');
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("trajectory sink failure: {detail}")]
pub struct SinkError {
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TrajectoryError {
    #[error("malformed trajectory record at line {line}: {detail}")]
    MalformedRecord { line: usize, detail: String },
    #[error("trajectory serialization failed: {detail}")]
    Serialize { detail: String },
}
