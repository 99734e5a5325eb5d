//! The session plan JSON contract:
//!
//! ```json
//! {"sessions": [{"id": "s1", "topic": "What is cancer", "key_points": ["definition"]}]}
//! ```
//!
//! Ordinals come from array order. Unknown fields are ignored.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ids::SessionId;
use crate::model::{normalize_label, SessionPlan, SessionTopic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanParseErrorKind {
    MalformedContainer,
    MissingField,
    InvalidField,
    DuplicateTopic,
    DuplicateId,
    EmptyKeyPoints,
    EmptyPlan,
}

impl fmt::Display for PlanParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PlanParseErrorKind::MalformedContainer => "malformed-container",
            PlanParseErrorKind::MissingField => "missing-field",
            PlanParseErrorKind::InvalidField => "invalid-field",
            PlanParseErrorKind::DuplicateTopic => "duplicate-topic",
            PlanParseErrorKind::DuplicateId => "duplicate-id",
            PlanParseErrorKind::EmptyKeyPoints => "empty-key-points",
            PlanParseErrorKind::EmptyPlan => "empty-plan",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanParseError {
    pub kind: PlanParseErrorKind,
    /// JSON path of the offending value, e.g. `sessions[1].topic`.
    pub path: String,
    pub message: String,
    /// Set for syntax errors only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
}

impl fmt::Display for PlanParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, "{l}:{c}: ")?;
        }
        if !self.path.is_empty() {
            write!(f, "{}: ", self.path)?;
        }
        write!(f, "{}: {}", self.kind, self.message)
    }
}

fn err(kind: PlanParseErrorKind, path: impl Into<String>, message: impl Into<String>) -> PlanParseError {
    PlanParseError {
        kind,
        path: path.into(),
        message: message.into(),
        line: None,
        column: None,
    }
}

pub fn parse_session_plan_json(text: &str) -> Result<SessionPlan, Vec<PlanParseError>> {
    let value: Value = serde_json::from_str(text).map_err(|e| {
        vec![PlanParseError {
            kind: PlanParseErrorKind::MalformedContainer,
            path: String::new(),
            message: e.to_string(),
            line: Some(e.line().max(1)),
            column: Some(e.column().max(1)),
        }]
    })?;
    use PlanParseErrorKind::*;

    let Some(root) = value.as_object() else {
        return Err(vec![err(MalformedContainer, "", "top level must be an object")]);
    };
    let sessions = match root.get("sessions") {
        None => return Err(vec![err(MissingField, "sessions", "missing `sessions` array")]),
        Some(Value::Array(items)) => items,
        Some(_) => return Err(vec![err(MalformedContainer, "sessions", "`sessions` must be an array")]),
    };
    let revision_note = match root.get("revision_note") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(vec![err(InvalidField, "revision_note", "must be a string")]),
    };
    if sessions.is_empty() {
        return Err(vec![err(EmptyPlan, "sessions", "plan needs at least one session")]);
    }

    let mut errors = Vec::new();
    let mut topics = Vec::new();
    let mut seen_titles: HashMap<String, usize> = HashMap::new();
    let mut seen_ids: HashMap<SessionId, usize> = HashMap::new();

    for (i, item) in sessions.iter().enumerate() {
        let at = |field: &str| {
            if field.is_empty() {
                format!("sessions[{i}]")
            } else {
                format!("sessions[{i}].{field}")
            }
        };
        let Some(obj) = item.as_object() else {
            errors.push(err(MalformedContainer, at(""), "session must be an object"));
            continue;
        };
        let before = errors.len();

        let id = match obj.get("id") {
            None => {
                errors.push(err(MissingField, at("id"), "missing `id`"));
                None
            }
            Some(Value::String(s)) => match SessionId::new(s.trim()) {
                Ok(id) => Some(id),
                Err(e) => {
                    errors.push(err(InvalidField, at("id"), e.to_string()));
                    None
                }
            },
            Some(_) => {
                errors.push(err(InvalidField, at("id"), "`id` must be a string"));
                None
            }
        };
        let title = match obj.get("topic") {
            None => {
                errors.push(err(MissingField, at("topic"), "missing `topic`"));
                None
            }
            Some(Value::String(s)) if !s.trim().is_empty() => Some(s.trim().to_string()),
            Some(Value::String(_)) => {
                errors.push(err(InvalidField, at("topic"), "`topic` is empty"));
                None
            }
            Some(_) => {
                errors.push(err(InvalidField, at("topic"), "`topic` must be a string"));
                None
            }
        };
        let key_points = match obj.get("key_points") {
            None => {
                errors.push(err(MissingField, at("key_points"), "missing `key_points`"));
                None
            }
            Some(Value::Array(points)) if points.is_empty() => {
                errors.push(err(EmptyKeyPoints, at("key_points"), "session needs at least one key point"));
                None
            }
            Some(Value::Array(points)) => {
                let mut out = Vec::new();
                for (j, p) in points.iter().enumerate() {
                    match p.as_str().map(str::trim) {
                        Some(s) if !s.is_empty() => out.push(s.to_string()),
                        Some(_) => errors.push(err(
                            EmptyKeyPoints,
                            format!("sessions[{i}].key_points[{j}]"),
                            "key point is empty",
                        )),
                        None => errors.push(err(
                            InvalidField,
                            format!("sessions[{i}].key_points[{j}]"),
                            "key point must be a string",
                        )),
                    }
                }
                Some(out)
            }
            Some(_) => {
                errors.push(err(InvalidField, at("key_points"), "`key_points` must be an array"));
                None
            }
        };

        if let Some(id) = &id {
            if let Some(first) = seen_ids.get(id) {
                errors.push(err(
                    DuplicateId,
                    at("id"),
                    format!("id {id} already used by sessions[{first}]"),
                ));
            } else {
                seen_ids.insert(id.clone(), i);
            }
        }
        if let Some(title) = &title {
            let norm = normalize_label(title);
            if let Some(first) = seen_titles.get(&norm) {
                errors.push(err(
                    DuplicateTopic,
                    at("topic"),
                    format!("topic {title:?} duplicates sessions[{first}]"),
                ));
            } else {
                seen_titles.insert(norm, i);
            }
        }

        if errors.len() == before {
            topics.push(SessionTopic {
                id: id.expect("no errors"),
                ordinal: i as u32 + 1,
                title: title.expect("no errors"),
                key_points: key_points.expect("no errors"),
            });
        }
    }

    if errors.is_empty() {
        Ok(SessionPlan {
            sessions: topics,
            revision_note,
        })
    } else {
        Err(errors)
    }
}

#[derive(Serialize)]
struct PlanOut<'a> {
    sessions: Vec<TopicOut<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    revision_note: Option<&'a str>,
}

#[derive(Serialize)]
struct TopicOut<'a> {
    id: &'a SessionId,
    topic: &'a str,
    key_points: &'a [String],
}

/// Pretty-printed plan JSON in the same schema the parser reads.
pub fn plan_to_json(plan: &SessionPlan) -> String {
    let out = PlanOut {
        sessions: plan
            .sessions
            .iter()
            .map(|s| TopicOut {
                id: &s.id,
                topic: &s.title,
                key_points: &s.key_points,
            })
            .collect(),
        revision_note: plan.revision_note.as_deref(),
    };
    let mut text = serde_json::to_string_pretty(&out).expect("plan serializes");
    text.push('\n');
    text
}
