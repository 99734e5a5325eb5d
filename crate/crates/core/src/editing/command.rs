use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::{SessionId, StateId};
use crate::model::{DialogueFsm, SessionPlan, Target};

/// Placeholder utterance for a state created from an accepted suggestion.
pub const STUB_UTTERANCE: &str = "(agent utterance to be written)";

/// One author-level mutation. Options are addressed by their 0-based
/// position within a state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EditCommand {
    EditUtterance {
        session: SessionId,
        state: StateId,
        text: String,
    },
    /// Adds a state together with the option that leads to it, so the new
    /// state is reachable from the moment it exists.
    AddState {
        session: SessionId,
        state: StateId,
        utterance: String,
        from: StateId,
        label: String,
    },
    DeleteState {
        session: SessionId,
        state: StateId,
    },
    AddOption {
        session: SessionId,
        state: StateId,
        label: String,
        target: Target,
    },
    EditOptionLabel {
        session: SessionId,
        state: StateId,
        index: usize,
        label: String,
    },
    DeleteOption {
        session: SessionId,
        state: StateId,
        index: usize,
    },
    ConnectOption {
        session: SessionId,
        state: StateId,
        index: usize,
        target: Target,
    },
    SetEntry {
        session: SessionId,
        state: StateId,
    },
    ReorderTopics {
        order: Vec<SessionId>,
    },
    AddTopic {
        session: SessionId,
        title: String,
        key_points: Vec<String>,
        /// 0-based insertion index; appended when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        position: Option<usize>,
    },
    DeleteTopic {
        session: SessionId,
    },
    RenameTopic {
        session: SessionId,
        title: String,
    },
    SetKeyPoints {
        session: SessionId,
        key_points: Vec<String>,
    },
    /// Adds a suggested option. With `create_stub`, `target` names a new
    /// state that is created with a placeholder utterance.
    AcceptSuggestion {
        session: SessionId,
        state: StateId,
        label: String,
        target: Target,
        #[serde(default)]
        create_stub: bool,
    },
    /// Installs a planner result. FSMs of sessions absent from the new plan
    /// are dropped.
    ReplacePlan {
        plan: SessionPlan,
    },
    /// Installs a generated or imported FSM for `fsm.session_id`.
    ReplaceFsm {
        fsm: DialogueFsm,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EditKind {
    EditUtterance,
    AddState,
    DeleteState,
    AddOption,
    EditOptionLabel,
    DeleteOption,
    ConnectOption,
    SetEntry,
    ReorderTopics,
    AddTopic,
    DeleteTopic,
    RenameTopic,
    SetKeyPoints,
    AcceptSuggestion,
    ReplacePlan,
    ReplaceFsm,
}

impl EditKind {
    pub const ALL: [EditKind; 16] = [
        EditKind::EditUtterance,
        EditKind::AddState,
        EditKind::DeleteState,
        EditKind::AddOption,
        EditKind::EditOptionLabel,
        EditKind::DeleteOption,
        EditKind::ConnectOption,
        EditKind::SetEntry,
        EditKind::ReorderTopics,
        EditKind::AddTopic,
        EditKind::DeleteTopic,
        EditKind::RenameTopic,
        EditKind::SetKeyPoints,
        EditKind::AcceptSuggestion,
        EditKind::ReplacePlan,
        EditKind::ReplaceFsm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EditKind::EditUtterance => "edit-utterance",
            EditKind::AddState => "add-state",
            EditKind::DeleteState => "delete-state",
            EditKind::AddOption => "add-option",
            EditKind::EditOptionLabel => "edit-option-label",
            EditKind::DeleteOption => "delete-option",
            EditKind::ConnectOption => "connect-option",
            EditKind::SetEntry => "set-entry",
            EditKind::ReorderTopics => "reorder-topics",
            EditKind::AddTopic => "add-topic",
            EditKind::DeleteTopic => "delete-topic",
            EditKind::RenameTopic => "rename-topic",
            EditKind::SetKeyPoints => "set-key-points",
            EditKind::AcceptSuggestion => "accept-suggestion",
            EditKind::ReplacePlan => "replace-plan",
            EditKind::ReplaceFsm => "replace-fsm",
        }
    }

    /// Whether a command of this kind is an authored content change.
    /// Wiring (connections, entry choice, topic order) and wholesale
    /// replacement by the generators are not.
    pub fn is_content_revision(self) -> bool {
        !matches!(
            self,
            EditKind::ConnectOption
                | EditKind::SetEntry
                | EditKind::ReorderTopics
                | EditKind::ReplacePlan
                | EditKind::ReplaceFsm
        )
    }
}

impl fmt::Display for EditKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl EditCommand {
    pub fn kind(&self) -> EditKind {
        match self {
            EditCommand::EditUtterance { .. } => EditKind::EditUtterance,
            EditCommand::AddState { .. } => EditKind::AddState,
            EditCommand::DeleteState { .. } => EditKind::DeleteState,
            EditCommand::AddOption { .. } => EditKind::AddOption,
            EditCommand::EditOptionLabel { .. } => EditKind::EditOptionLabel,
            EditCommand::DeleteOption { .. } => EditKind::DeleteOption,
            EditCommand::ConnectOption { .. } => EditKind::ConnectOption,
            EditCommand::SetEntry { .. } => EditKind::SetEntry,
            EditCommand::ReorderTopics { .. } => EditKind::ReorderTopics,
            EditCommand::AddTopic { .. } => EditKind::AddTopic,
            EditCommand::DeleteTopic { .. } => EditKind::DeleteTopic,
            EditCommand::RenameTopic { .. } => EditKind::RenameTopic,
            EditCommand::SetKeyPoints { .. } => EditKind::SetKeyPoints,
            EditCommand::AcceptSuggestion { .. } => EditKind::AcceptSuggestion,
            EditCommand::ReplacePlan { .. } => EditKind::ReplacePlan,
            EditCommand::ReplaceFsm { .. } => EditKind::ReplaceFsm,
        }
    }

    /// The session whose FSM this command touches, if any.
    pub fn fsm_session(&self) -> Option<&SessionId> {
        match self {
            EditCommand::EditUtterance { session, .. }
            | EditCommand::AddState { session, .. }
            | EditCommand::DeleteState { session, .. }
            | EditCommand::AddOption { session, .. }
            | EditCommand::EditOptionLabel { session, .. }
            | EditCommand::DeleteOption { session, .. }
            | EditCommand::ConnectOption { session, .. }
            | EditCommand::SetEntry { session, .. }
            | EditCommand::AcceptSuggestion { session, .. }
            | EditCommand::DeleteTopic { session } => Some(session),
            EditCommand::ReplaceFsm { fsm } => Some(&fsm.session_id),
            _ => None,
        }
    }
}
