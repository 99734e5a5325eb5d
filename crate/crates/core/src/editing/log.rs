//! JSON-lines edit log: one event per line, replayable from an empty project.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::command::EditCommand;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum LogEvent {
    Apply { command: EditCommand },
    Undo,
    Redo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub event: LogEvent,
}

impl LogRecord {
    pub fn now(event: LogEvent) -> Self {
        Self {
            at: Utc::now(),
            event,
        }
    }

    /// One line including the trailing newline.
    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("log record serializes");
        line.push('\n');
        line
    }
}

#[derive(Debug, Error)]
#[error("edit log line {line}: {source}")]
pub struct LogParseError {
    pub line: usize,
    #[source]
    pub source: serde_json::Error,
}

/// Parses a log. A final line without a newline that fails to parse is a
/// torn append and is ignored; any other bad line is an error.
pub fn parse_log(text: &str) -> Result<Vec<LogRecord>, LogParseError> {
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(record) => out.push(record),
            Err(_) if !complete && i + 1 == lines.len() => break,
            Err(source) => return Err(LogParseError { line: i + 1, source }),
        }
    }
    Ok(out)
}
