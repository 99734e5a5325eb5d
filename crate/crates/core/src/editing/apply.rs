//! Command execution against [`ProjectContent`].

use std::collections::BTreeSet;

use crate::ids::{SessionId, StateId};
use crate::model::{
    normalize_label, validate_fsm, DialogueFsm, DialogueState, PlanViolation, ResponseOption,
    SessionTopic, Target,
};
use crate::project::ProjectContent;

use super::command::{EditCommand, STUB_UTTERANCE};
use super::EditError;

/// The parts of the content a command may touch, captured before it runs.
/// Restoring a snapshot is the command's inverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    plan: Option<crate::model::SessionPlan>,
    fsms: Vec<(SessionId, Option<DialogueFsm>)>,
}

impl Snapshot {
    fn take(content: &ProjectContent, plan: bool, sessions: &[&SessionId]) -> Self {
        Self {
            plan: plan.then(|| content.plan.clone()),
            fsms: sessions
                .iter()
                .map(|id| ((*id).clone(), content.fsms.get(*id).cloned()))
                .collect(),
        }
    }

    pub(crate) fn restore(&self, content: &mut ProjectContent) {
        if let Some(plan) = &self.plan {
            content.plan = plan.clone();
        }
        for (id, fsm) in &self.fsms {
            match fsm {
                Some(fsm) => {
                    content.fsms.insert(id.clone(), fsm.clone());
                }
                None => {
                    content.fsms.remove(id);
                }
            }
        }
    }
}

/// Runs `cmd` on `content`. On success returns the inverse snapshot; on
/// failure `content` is left exactly as it was.
pub(crate) fn apply_command(
    content: &mut ProjectContent,
    cmd: &EditCommand,
) -> Result<Snapshot, EditError> {
    let snapshot = snapshot_for(content, cmd);
    match execute(content, cmd) {
        Ok(()) => Ok(snapshot),
        Err(e) => {
            snapshot.restore(content);
            Err(e)
        }
    }
}

fn snapshot_for(content: &ProjectContent, cmd: &EditCommand) -> Snapshot {
    match cmd {
        EditCommand::ReplacePlan { .. } => {
            let all: Vec<&SessionId> = content.fsms.keys().collect();
            Snapshot::take(content, true, &all)
        }
        EditCommand::DeleteTopic { session } => Snapshot::take(content, true, &[session]),
        EditCommand::ReorderTopics { .. }
        | EditCommand::AddTopic { .. }
        | EditCommand::RenameTopic { .. }
        | EditCommand::SetKeyPoints { .. } => Snapshot::take(content, true, &[]),
        other => {
            let session = other.fsm_session().expect("fsm command names a session");
            Snapshot::take(content, false, &[session])
        }
    }
}

fn execute(content: &mut ProjectContent, cmd: &EditCommand) -> Result<(), EditError> {
    match cmd {
        EditCommand::EditUtterance {
            session,
            state,
            text,
        } => {
            non_empty(text, "utterance")?;
            with_fsm(content, session, |fsm| {
                state_mut(fsm, session, state)?.utterance = text.clone();
                Ok(())
            })
        }
        EditCommand::AddState {
            session,
            state,
            utterance,
            from,
            label,
        } => {
            non_empty(utterance, "utterance")?;
            non_empty(label, "option label")?;
            with_fsm(content, session, |fsm| {
                if fsm.contains(state) {
                    return Err(EditError::DuplicateState {
                        session: session.clone(),
                        state: state.clone(),
                    });
                }
                add_option(fsm, session, from, label, Target::State(state.clone()))?;
                fsm.push_state(DialogueState::new(state.clone(), utterance.clone()))
                    .expect("checked above");
                Ok(())
            })
        }
        EditCommand::DeleteState { session, state } => with_fsm(content, session, |fsm| {
            let existing = fsm.state(state).ok_or_else(|| unknown_state(session, state))?;
            if existing.is_entry {
                return Err(EditError::WouldOrphanEntry {
                    session: session.clone(),
                    state: state.clone(),
                });
            }
            fsm.remove_state(state);
            let gone = Target::State(state.clone());
            for s in fsm.states_mut() {
                s.options.retain(|o| o.target != gone);
            }
            Ok(())
        }),
        EditCommand::AddOption {
            session,
            state,
            label,
            target,
        } => {
            non_empty(label, "option label")?;
            with_fsm(content, session, |fsm| {
                check_target(fsm, session, target)?;
                add_option(fsm, session, state, label, target.clone())
            })
        }
        EditCommand::EditOptionLabel {
            session,
            state,
            index,
            label,
        } => {
            non_empty(label, "option label")?;
            with_fsm(content, session, |fsm| {
                let s = state_mut(fsm, session, state)?;
                option_index(s, session, *index)?;
                let norm = normalize_label(label);
                let clash = s
                    .options
                    .iter()
                    .enumerate()
                    .any(|(i, o)| i != *index && normalize_label(&o.label) == norm);
                if clash {
                    return Err(duplicate_label(session, state, label));
                }
                s.options[*index].label = label.clone();
                Ok(())
            })
        }
        EditCommand::DeleteOption {
            session,
            state,
            index,
        } => with_fsm(content, session, |fsm| {
            let s = state_mut(fsm, session, state)?;
            option_index(s, session, *index)?;
            s.options.remove(*index);
            Ok(())
        }),
        EditCommand::ConnectOption {
            session,
            state,
            index,
            target,
        } => with_fsm(content, session, |fsm| {
            check_target(fsm, session, target)?;
            let s = state_mut(fsm, session, state)?;
            option_index(s, session, *index)?;
            s.options[*index].target = target.clone();
            Ok(())
        }),
        EditCommand::SetEntry { session, state } => with_fsm(content, session, |fsm| {
            if !fsm.contains(state) {
                return Err(unknown_state(session, state));
            }
            for s in fsm.states_mut() {
                s.is_entry = &s.id == state;
            }
            Ok(())
        }),
        EditCommand::AcceptSuggestion {
            session,
            state,
            label,
            target,
            create_stub,
        } => {
            non_empty(label, "option label")?;
            with_fsm(content, session, |fsm| {
                if *create_stub {
                    let id = match target {
                        Target::State(id) if !fsm.contains(id) => id.clone(),
                        Target::State(id) => {
                            return Err(EditError::DuplicateState {
                                session: session.clone(),
                                state: id.clone(),
                            })
                        }
                        Target::End => {
                            return Err(EditError::InvalidCommand(
                                "a stub needs a new state id, not END".into(),
                            ))
                        }
                    };
                    add_option(fsm, session, state, label, target.clone())?;
                    fsm.push_state(DialogueState::new(id, STUB_UTTERANCE))
                        .expect("checked above");
                    Ok(())
                } else {
                    check_target(fsm, session, target)?;
                    add_option(fsm, session, state, label, target.clone())
                }
            })
        }
        EditCommand::ReorderTopics { order } => {
            let current: BTreeSet<&SessionId> = content.plan.session_ids().collect();
            let wanted: BTreeSet<&SessionId> = order.iter().collect();
            if wanted.len() != order.len() || current != wanted {
                return Err(EditError::InvalidCommand(
                    "reorder must list every session exactly once".into(),
                ));
            }
            let mut sessions = std::mem::take(&mut content.plan.sessions);
            for id in order {
                let pos = sessions.iter().position(|s| &s.id == id).expect("permutation");
                content.plan.sessions.push(sessions.remove(pos));
            }
            content.plan.renumber();
            check_plan(content)
        }
        EditCommand::AddTopic {
            session,
            title,
            key_points,
            position,
        } => {
            if content.plan.session(session).is_some() {
                return Err(EditError::DuplicateSession(session.clone()));
            }
            let at = position.unwrap_or(content.plan.sessions.len());
            if at > content.plan.sessions.len() {
                return Err(EditError::InvalidCommand(format!(
                    "position {at} is past the end of a {}-session plan",
                    content.plan.sessions.len()
                )));
            }
            content.plan.sessions.insert(
                at,
                SessionTopic {
                    id: session.clone(),
                    ordinal: 0,
                    title: title.clone(),
                    key_points: key_points.clone(),
                },
            );
            content.plan.renumber();
            check_plan(content)
        }
        EditCommand::DeleteTopic { session } => {
            let pos = content
                .plan
                .position(session)
                .ok_or_else(|| EditError::UnknownSession(session.clone()))?;
            content.plan.sessions.remove(pos);
            content.plan.renumber();
            content.fsms.remove(session);
            Ok(())
        }
        EditCommand::RenameTopic { session, title } => {
            topic_mut(content, session)?.title = title.clone();
            check_plan(content)
        }
        EditCommand::SetKeyPoints {
            session,
            key_points,
        } => {
            topic_mut(content, session)?.key_points = key_points.clone();
            check_plan(content)
        }
        EditCommand::ReplacePlan { plan } => {
            let violations = plan.violations();
            if !violations.is_empty() {
                return Err(EditError::InvalidPlan(violations));
            }
            content.plan = plan.clone();
            let keep: BTreeSet<SessionId> = plan.session_ids().cloned().collect();
            content.fsms.retain(|id, _| keep.contains(id));
            Ok(())
        }
        EditCommand::ReplaceFsm { fsm } => {
            if content.plan.session(&fsm.session_id).is_none() {
                return Err(EditError::UnknownSession(fsm.session_id.clone()));
            }
            let report = validate_fsm(fsm);
            if !report.is_clean() {
                return Err(EditError::InvalidFsm {
                    session: fsm.session_id.clone(),
                    defects: report.defects,
                });
            }
            content.fsms.insert(fsm.session_id.clone(), fsm.clone());
            Ok(())
        }
    }
}

/// Mutates one session's FSM and rejects the result unless it validates.
fn with_fsm(
    content: &mut ProjectContent,
    session: &SessionId,
    f: impl FnOnce(&mut DialogueFsm) -> Result<(), EditError>,
) -> Result<(), EditError> {
    let fsm = content
        .fsms
        .get_mut(session)
        .ok_or_else(|| EditError::UnknownSession(session.clone()))?;
    f(fsm)?;
    let report = validate_fsm(fsm);
    if report.is_clean() {
        Ok(())
    } else {
        Err(EditError::InvalidFsm {
            session: session.clone(),
            defects: report.defects,
        })
    }
}

fn check_plan(content: &ProjectContent) -> Result<(), EditError> {
    let violations = content.plan.entry_violations();
    if violations.is_empty() {
        return Ok(());
    }
    match violations
        .iter()
        .find(|v| matches!(v, PlanViolation::DuplicateTopic { .. }))
    {
        Some(PlanViolation::DuplicateTopic { title, .. }) => {
            Err(EditError::DuplicateTopic(title.clone()))
        }
        _ => Err(EditError::InvalidPlan(violations)),
    }
}

fn topic_mut<'a>(
    content: &'a mut ProjectContent,
    session: &SessionId,
) -> Result<&'a mut SessionTopic, EditError> {
    content
        .plan
        .sessions
        .iter_mut()
        .find(|s| &s.id == session)
        .ok_or_else(|| EditError::UnknownSession(session.clone()))
}

fn state_mut<'a>(
    fsm: &'a mut DialogueFsm,
    session: &SessionId,
    state: &StateId,
) -> Result<&'a mut DialogueState, EditError> {
    fsm.state_mut(state).ok_or_else(|| unknown_state(session, state))
}

fn add_option(
    fsm: &mut DialogueFsm,
    session: &SessionId,
    state: &StateId,
    label: &str,
    target: Target,
) -> Result<(), EditError> {
    let s = state_mut(fsm, session, state)?;
    if s.has_label(label) {
        return Err(duplicate_label(session, state, label));
    }
    s.options.push(ResponseOption::new(label, target));
    Ok(())
}

fn check_target(fsm: &DialogueFsm, session: &SessionId, target: &Target) -> Result<(), EditError> {
    match target {
        Target::State(id) if !fsm.contains(id) => Err(unknown_state(session, id)),
        _ => Ok(()),
    }
}

fn option_index(s: &DialogueState, session: &SessionId, index: usize) -> Result<(), EditError> {
    if index < s.options.len() {
        Ok(())
    } else {
        Err(EditError::UnknownOption {
            session: session.clone(),
            state: s.id.clone(),
            index,
        })
    }
}

fn non_empty(text: &str, what: &'static str) -> Result<(), EditError> {
    if text.trim().is_empty() {
        Err(EditError::EmptyText(what))
    } else {
        Ok(())
    }
}

fn unknown_state(session: &SessionId, state: &StateId) -> EditError {
    EditError::UnknownState {
        session: session.clone(),
        state: state.clone(),
    }
}

fn duplicate_label(session: &SessionId, state: &StateId, label: &str) -> EditError {
    EditError::DuplicateLabel {
        session: session.clone(),
        state: state.clone(),
        label: label.to_string(),
    }
}
