//! Undoable editing of a project's plan and FSMs.
//!
//! Every command either leaves the content valid (plan rules hold, every
//! FSM validates cleanly) or is refused without side effects. The inverse of
//! a command is a snapshot of whatever it touched.

mod apply;
mod command;
mod history;
mod log;

use chrono::Utc;
use thiserror::Error;

use crate::ids::{SessionId, StateId};
use crate::model::{Defect, PlanViolation};
use crate::project::{ContentHash, Project};

pub use command::{EditCommand, EditKind, STUB_UTTERANCE};
pub use history::{count_revisions, EditHistory, HistoryEntry, HistorySummary};
pub use log::{parse_log, LogEvent, LogParseError, LogRecord};

use apply::apply_command;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EditError {
    #[error("session {0} does not exist or has no dialogue")]
    UnknownSession(SessionId),
    #[error("state {state} does not exist in session {session}")]
    UnknownState { session: SessionId, state: StateId },
    #[error("state {state} in session {session} has no option {index}")]
    UnknownOption {
        session: SessionId,
        state: StateId,
        index: usize,
    },
    #[error("state {state} is the entry of session {session}; choose another entry first")]
    WouldOrphanEntry { session: SessionId, state: StateId },
    #[error("state {state} in session {session} already has an option labelled {label:?}")]
    DuplicateLabel {
        session: SessionId,
        state: StateId,
        label: String,
    },
    #[error("state {state} already exists in session {session}")]
    DuplicateState { session: SessionId, state: StateId },
    #[error("a topic titled {0:?} already exists")]
    DuplicateTopic(String),
    #[error("session id {0} is already in the plan")]
    DuplicateSession(SessionId),
    #[error("{0} must not be empty")]
    EmptyText(&'static str),
    #[error("the edit would leave session {session} invalid: {}", join(defects))]
    InvalidFsm {
        session: SessionId,
        defects: Vec<Defect>,
    },
    #[error("the edit would leave the plan invalid: {}", join(.0))]
    InvalidPlan(Vec<PlanViolation>),
    #[error("{0}")]
    InvalidCommand(String),
    #[error("nothing to undo")]
    NothingToUndo,
    #[error("nothing to redo")]
    NothingToRedo,
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl EditError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            EditError::UnknownSession(_)
            | EditError::UnknownState { .. }
            | EditError::UnknownOption { .. } => "unknown-target",
            EditError::WouldOrphanEntry { .. } => "would-orphan-entry",
            EditError::DuplicateLabel { .. } => "duplicate-label",
            EditError::DuplicateState { .. } => "duplicate-state",
            EditError::DuplicateTopic(_) => "duplicate-topic",
            EditError::DuplicateSession(_) => "duplicate-session",
            EditError::EmptyText(_) => "empty-text",
            EditError::InvalidFsm { .. } => "invalid-fsm",
            EditError::InvalidPlan(_) => "invalid-plan",
            EditError::InvalidCommand(_) => "invalid-command",
            EditError::NothingToUndo => "nothing-to-undo",
            EditError::NothingToRedo => "nothing-to-redo",
        }
    }

    pub fn is_unknown_target(&self) -> bool {
        self.code() == "unknown-target"
    }
}

impl Project {
    /// Applies `cmd`, discarding any redo branch. Returns the new content hash.
    pub fn apply(&mut self, cmd: EditCommand) -> Result<ContentHash, EditError> {
        let inverse = apply_command(&mut self.content, &cmd)?;
        let hash = self.content.hash();
        self.history.push(HistoryEntry {
            command: cmd,
            hash_after: hash.clone(),
            inverse,
        });
        self.modified = Utc::now();
        Ok(hash)
    }

    pub fn undo(&mut self) -> Result<ContentHash, EditError> {
        let entry = self.history.step_back().ok_or(EditError::NothingToUndo)?;
        entry.inverse.restore(&mut self.content);
        let hash = self.content.hash();
        debug_assert_eq!(&hash, self.history.expected_hash());
        self.modified = Utc::now();
        Ok(hash)
    }

    pub fn redo(&mut self) -> Result<ContentHash, EditError> {
        let entry = self.history.step_forward().ok_or(EditError::NothingToRedo)?;
        // Undo restored the exact prior content, so re-running the command
        // reproduces the recorded result.
        let inverse = apply_command(&mut self.content, &entry.command)?;
        entry.inverse = inverse;
        let hash = self.content.hash();
        debug_assert_eq!(&hash, &entry.hash_after);
        self.modified = Utc::now();
        Ok(hash)
    }

    pub fn apply_event(&mut self, event: &LogEvent) -> Result<ContentHash, EditError> {
        match event {
            LogEvent::Apply { command } => self.apply(command.clone()),
            LogEvent::Undo => self.undo(),
            LogEvent::Redo => self.redo(),
        }
    }

    /// Replays a log onto this project. Stops at the first refused event.
    pub fn replay<'a>(
        &mut self,
        events: impl IntoIterator<Item = &'a LogEvent>,
    ) -> Result<(), EditError> {
        for event in events {
            self.apply_event(event)?;
        }
        Ok(())
    }

    pub fn revision_count(&self) -> usize {
        self.history.revision_count()
    }
}
