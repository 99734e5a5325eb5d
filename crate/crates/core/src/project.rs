use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::editing::EditHistory;
use crate::ids::{ProjectId, SessionId};
use crate::markup::{Dialogue, MarkupDocument};
use crate::model::{DialogueFsm, Material, SessionPlan};

/// Hex SHA-256 of a project's authored content.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContentHash(String);

impl ContentHash {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Everything an author edits: the plan and one FSM per generated session.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectContent {
    pub plan: SessionPlan,
    pub fsms: BTreeMap<SessionId, DialogueFsm>,
}

impl ProjectContent {
    pub fn hash(&self) -> ContentHash {
        let bytes = serde_json::to_vec(self).expect("content serializes");
        ContentHash(hex::encode(Sha256::digest(&bytes)))
    }

    /// FSMs in plan order, paired with their topic titles. Sessions that have
    /// not been generated yet are skipped.
    pub fn to_document(&self) -> MarkupDocument {
        let dialogues = self
            .plan
            .sessions
            .iter()
            .filter_map(|s| {
                self.fsms.get(&s.id).map(|fsm| Dialogue {
                    title: s.title.clone(),
                    fsm: fsm.clone(),
                })
            })
            .collect();
        MarkupDocument::new(dialogues)
    }

    /// Sessions present in `fsms` but missing from the plan. Always empty for
    /// content reached through the editing commands.
    pub fn orphan_fsms(&self) -> Vec<&SessionId> {
        self.fsms
            .keys()
            .filter(|id| self.plan.session(id).is_none())
            .collect()
    }
}

/// The authoring unit: material, plan, FSMs and the edit history.
#[derive(Debug, Clone)]
pub struct Project {
    pub id: ProjectId,
    pub material: Material,
    pub(crate) content: ProjectContent,
    pub(crate) history: EditHistory,
    /// Set once the author approves the plan; cleared when the planner runs.
    pub plan_approved: bool,
    pub created: DateTime<Utc>,
    pub modified: DateTime<Utc>,
}

impl Project {
    pub fn new(material: Material) -> Self {
        Self::with_id(ProjectId::generate(), material, Utc::now())
    }

    pub fn with_id(id: ProjectId, material: Material, created: DateTime<Utc>) -> Self {
        let content = ProjectContent::default();
        let history = EditHistory::new(content.hash());
        Self {
            id,
            material,
            content,
            history,
            plan_approved: false,
            created,
            modified: created,
        }
    }

    pub fn title(&self) -> &str {
        &self.material.title
    }

    pub fn content(&self) -> &ProjectContent {
        &self.content
    }

    pub fn plan(&self) -> &SessionPlan {
        &self.content.plan
    }

    pub fn fsm(&self, session: &SessionId) -> Option<&DialogueFsm> {
        self.content.fsms.get(session)
    }

    pub fn fsms(&self) -> &BTreeMap<SessionId, DialogueFsm> {
        &self.content.fsms
    }

    pub fn history(&self) -> &EditHistory {
        &self.history
    }

    pub fn content_hash(&self) -> ContentHash {
        self.content.hash()
    }

    pub fn to_document(&self) -> MarkupDocument {
        self.content.to_document()
    }
}
