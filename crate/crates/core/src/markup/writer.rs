use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

use super::lexer::quote;
use super::{MarkupDocument, FORMAT_NAME, SUPPORTED_VERSIONS};
use crate::ids::SessionId;
use crate::model::{validate_fsm, Defect};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SerializeError {
    #[error("format version v{0} is not supported")]
    UnsupportedVersion(u32),
    #[error("dialogue {session} is invalid: {}", .defects.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidDialogue {
        session: SessionId,
        defects: Vec<Defect>,
    },
    #[error("dialogue {0} appears more than once")]
    DuplicateDialogue(SessionId),
    #[error("tag {key:?} in state {state} cannot be written: {reason}")]
    UnrepresentableTag {
        state: String,
        key: String,
        reason: &'static str,
    },
}

/// Writes the canonical text form: LF line endings, two-space indentation,
/// no tabs, one blank line before each dialogue, a single trailing newline.
/// Refuses documents whose dialogues fail validation.
pub fn serialize(doc: &MarkupDocument) -> Result<String, SerializeError> {
    if !SUPPORTED_VERSIONS.contains(&doc.header.version) {
        return Err(SerializeError::UnsupportedVersion(doc.header.version));
    }
    let mut seen = HashSet::new();
    for dialogue in &doc.dialogues {
        let fsm = &dialogue.fsm;
        if !seen.insert(&fsm.session_id) {
            return Err(SerializeError::DuplicateDialogue(fsm.session_id.clone()));
        }
        let report = validate_fsm(fsm);
        if !report.is_clean() {
            return Err(SerializeError::InvalidDialogue {
                session: fsm.session_id.clone(),
                defects: report.defects,
            });
        }
        for state in fsm.states() {
            for tag in &state.tags {
                let bad_key = tag.key.is_empty()
                    || !tag
                        .key
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | ':'));
                let reason = if bad_key {
                    Some("key must be non-empty ASCII alphanumerics or _-.:")
                } else if tag.value.contains(['#', '\n', '\r']) {
                    Some("value may not contain '#' or line breaks")
                } else if tag.value.trim() != tag.value {
                    Some("value may not have surrounding whitespace")
                } else {
                    None
                };
                if let Some(reason) = reason {
                    return Err(SerializeError::UnrepresentableTag {
                        state: state.id.to_string(),
                        key: tag.key.clone(),
                        reason,
                    });
                }
            }
        }
    }

    let mut out = String::new();
    let _ = writeln!(out, "{FORMAT_NAME} v{}", doc.header.version);
    for dialogue in &doc.dialogues {
        out.push('\n');
        let _ = writeln!(
            out,
            "DIALOGUE {} {}",
            dialogue.fsm.session_id,
            quote(&dialogue.title)
        );
        for state in dialogue.fsm.states() {
            if state.is_entry {
                let _ = writeln!(out, "  STATE {} ENTRY", state.id);
            } else {
                let _ = writeln!(out, "  STATE {}", state.id);
            }
            let _ = writeln!(out, "    AGENT {}", quote(&state.utterance));
            for tag in &state.tags {
                let _ = writeln!(out, "    TAG {}={}", tag.key, tag.value);
            }
            for option in &state.options {
                let _ = writeln!(out, "    OPTION {} -> {}", quote(&option.label), option.target);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::StateId;
    use crate::markup::{parse, Dialogue};
    use crate::model::{DialogueFsm, DialogueState, Tag, Target};

    fn one_state_doc() -> MarkupDocument {
        let fsm = DialogueFsm::from_states(
            SessionId::new("s1").unwrap(),
            [DialogueState::new(StateId::new("s1").unwrap(), "Hi").entry()],
        )
        .unwrap();
        MarkupDocument::new(vec![Dialogue {
            title: "Intro".into(),
            fsm,
        }])
    }

    #[test]
    fn canonical_one_state() {
        let text = serialize(&one_state_doc()).unwrap();
        assert_eq!(
            text,
            "HEALTHDIAL-FSM v1\n\nDIALOGUE s1 \"Intro\"\n  STATE s1 ENTRY\n    AGENT \"Hi\"\n"
        );
        assert_eq!(serialize(&one_state_doc()).unwrap(), text);
    }

    #[test]
    fn empty_document() {
        assert_eq!(
            serialize(&MarkupDocument::new(vec![])).unwrap(),
            "HEALTHDIAL-FSM v1\n"
        );
    }

    #[test]
    fn refuses_invalid() {
        let mut doc = one_state_doc();
        let fsm = &mut doc.dialogues[0].fsm;
        fsm.state_mut(&StateId::new("s1").unwrap())
            .unwrap()
            .options
            .push(crate::model::ResponseOption::new(
                "go",
                StateId::new("nowhere").unwrap(),
            ));
        assert!(matches!(
            serialize(&doc),
            Err(SerializeError::InvalidDialogue { .. })
        ));
    }

    #[test]
    fn refuses_bad_tag() {
        let mut doc = one_state_doc();
        let state = doc.dialogues[0]
            .fsm
            .state_mut(&StateId::new("s1").unwrap())
            .unwrap();
        state.tags.push(Tag {
            key: "gesture".into(),
            value: "a#b".into(),
        });
        assert!(matches!(
            serialize(&doc),
            Err(SerializeError::UnrepresentableTag { .. })
        ));
    }

    #[test]
    fn round_trip_with_escapes_and_tags() {
        let s1 = StateId::new("s1").unwrap();
        let s2 = StateId::new("s2").unwrap();
        let mut first = DialogueState::new(s1.clone(), "Tab\there, \"quoted\"\nnext line \\ done")
            .entry()
            .with_option("Tell me more # please", s2.clone())
            .with_option("Bye", Target::End);
        first.tags.push(Tag {
            key: "gesture".into(),
            value: "beat".into(),
        });
        let second = DialogueState::new(s2, "Screening saves lives.").with_option("Again", s1);
        let fsm = DialogueFsm::from_states(SessionId::new("s1").unwrap(), [first, second]).unwrap();
        let doc = MarkupDocument::new(vec![Dialogue {
            title: "What is cancer".into(),
            fsm,
        }]);
        let text = serialize(&doc).unwrap();
        assert!(!text.contains('\t'));
        assert!(text.ends_with('\n') && !text.ends_with("\n\n"));
        assert_eq!(parse(&text).unwrap(), doc);
    }
}
