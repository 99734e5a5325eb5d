//! Deterministic playthrough of a validated dialogue FSM.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{PlayId, SessionId, StateId};
use crate::model::{validate_fsm, Defect, DialogueFsm, DialogueState, SessionPlan, Target};

/// Default bound on choices per path in [`enumerate_paths`].
pub const DEFAULT_MAX_STEPS: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("the dialogue is not playable: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidFsm(Vec<Defect>),
    #[error("option {index} is out of range; the current state has {available} options")]
    OutOfRange { index: usize, available: usize },
    #[error("the playthrough has already finished")]
    AlreadyFinished,
    #[error("session {session} is locked until {waiting_on} is completed")]
    Locked {
        session: SessionId,
        waiting_on: SessionId,
    },
}

/// One agent turn and the patient's reply to it, if any yet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub state_id: StateId,
    pub utterance: String,
    pub choice: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Agent,
    Patient,
}

/// Flat transcript line for export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub speaker: Speaker,
    pub text: String,
    pub state_id: StateId,
}

pub fn transcript_lines(turns: &[Turn]) -> Vec<TranscriptLine> {
    let mut out = Vec::with_capacity(turns.len() * 2);
    for turn in turns {
        out.push(TranscriptLine {
            speaker: Speaker::Agent,
            text: turn.utterance.clone(),
            state_id: turn.state_id.clone(),
        });
        if let Some(choice) = &turn.choice {
            out.push(TranscriptLine {
                speaker: Speaker::Patient,
                text: choice.clone(),
                state_id: turn.state_id.clone(),
            });
        }
    }
    out
}

/// JSON-lines transcript, one line per agent or patient turn.
pub fn transcript_jsonl(turns: &[Turn]) -> String {
    transcript_lines(turns)
        .iter()
        .map(|l| serde_json::to_string(l).expect("transcript serializes") + "\n")
        .collect()
}

/// A playthrough over a private copy of one session's FSM.
#[derive(Debug, Clone)]
pub struct PlaySession {
    pub id: PlayId,
    fsm: DialogueFsm,
    current: Target,
    transcript: Vec<Turn>,
}

impl PlaySession {
    /// Positions the play at the entry state and emits its utterance.
    pub fn start(fsm: &DialogueFsm) -> Result<Self, RuntimeError> {
        let report = validate_fsm(fsm);
        if !report.is_clean() {
            return Err(RuntimeError::InvalidFsm(report.defects));
        }
        let entry = fsm.entry().expect("valid fsm has one entry");
        let mut play = Self {
            id: PlayId::generate(),
            fsm: fsm.clone(),
            current: Target::State(entry.id.clone()),
            transcript: Vec::new(),
        };
        play.emit(entry.id.clone());
        Ok(play)
    }

    fn emit(&mut self, id: StateId) {
        let state = self.fsm.state(&id).expect("closed-world target");
        self.transcript.push(Turn {
            state_id: id,
            utterance: state.utterance.clone(),
            choice: None,
        });
    }

    pub fn session_id(&self) -> &SessionId {
        &self.fsm.session_id
    }

    pub fn current(&self) -> &Target {
        &self.current
    }

    pub fn current_state(&self) -> Option<&DialogueState> {
        self.current.state().and_then(|id| self.fsm.state(id))
    }

    /// Labels of the options the patient can pick now.
    pub fn options(&self) -> Vec<&str> {
        self.current_state()
            .map(|s| s.options.iter().map(|o| o.label.as_str()).collect())
            .unwrap_or_default()
    }

    pub fn transcript(&self) -> &[Turn] {
        &self.transcript
    }

    pub fn is_finished(&self) -> bool {
        self.current_state().is_none_or(DialogueState::is_terminal)
    }

    pub fn choose(&mut self, index: usize) -> Result<&Target, RuntimeError> {
        if self.is_finished() {
            return Err(RuntimeError::AlreadyFinished);
        }
        let state = self.current_state().expect("not finished");
        let option = state
            .options
            .get(index)
            .ok_or(RuntimeError::OutOfRange {
                index,
                available: state.options.len(),
            })?
            .clone();
        self.transcript
            .last_mut()
            .expect("entry emitted at start")
            .choice = Some(option.label);
        self.current = option.target.clone();
        if let Target::State(id) = option.target {
            self.emit(id);
        }
        Ok(&self.current)
    }

    pub fn view(&self) -> PlayView {
        PlayView {
            play_id: self.id.clone(),
            session_id: self.fsm.session_id.clone(),
            current: self.current.clone(),
            options: self.options().into_iter().map(str::to_string).collect(),
            finished: self.is_finished(),
            transcript: self.transcript.clone(),
        }
    }
}

/// Serializable snapshot of a playthrough.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayView {
    pub play_id: PlayId,
    pub session_id: SessionId,
    pub current: Target,
    pub options: Vec<String>,
    pub finished: bool,
    pub transcript: Vec<Turn>,
}

/// Plays `choices` from the entry and returns the transcript.
pub fn replay(fsm: &DialogueFsm, choices: &[usize]) -> Result<Vec<Turn>, RuntimeError> {
    let mut play = PlaySession::start(fsm)?;
    for &c in choices {
        play.choose(c)?;
    }
    Ok(play.transcript)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathTranscript {
    pub choices: Vec<usize>,
    pub transcript: Vec<Turn>,
    /// The path hit the step bound before finishing.
    pub truncated: bool,
}

/// Every choice sequence from the entry, depth-first in option order. A path
/// ends when the play finishes or after `max_steps` choices (then marked
/// truncated). Returns nothing for an FSM that does not validate.
pub fn enumerate_paths(fsm: &DialogueFsm, max_steps: usize) -> Vec<PathTranscript> {
    let Ok(play) = PlaySession::start(fsm) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut choices = Vec::new();
    walk(play, &mut choices, max_steps, &mut out);
    out
}

fn walk(
    play: PlaySession,
    choices: &mut Vec<usize>,
    max_steps: usize,
    out: &mut Vec<PathTranscript>,
) {
    if play.is_finished() || choices.len() == max_steps {
        out.push(PathTranscript {
            choices: choices.clone(),
            truncated: !play.is_finished(),
            transcript: play.transcript,
        });
        return;
    }
    let n = play.options().len();
    for i in 0..n {
        let mut next = play.clone();
        next.choose(i).expect("index in range");
        choices.push(i);
        walk(next, choices, max_steps, out);
        choices.pop();
    }
}

// ---------------------------------------------------------------------------
// Progress
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProgressStatus {
    NotStarted,
    InProgress,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressEntry {
    pub status: ProgressStatus,
    pub started_at: Option<DateTime<Utc>>,
    pub completed_at: Option<DateTime<Utc>>,
}

/// Per-session progress. Status only ever moves forward.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressLedger {
    pub sessions: BTreeMap<SessionId, ProgressEntry>,
}

impl ProgressLedger {
    pub fn status(&self, session: &SessionId) -> ProgressStatus {
        self.sessions
            .get(session)
            .map_or(ProgressStatus::NotStarted, |e| e.status)
    }

    pub fn record_start(&mut self, session: &SessionId, at: DateTime<Utc>) {
        let entry = self.entry(session);
        if entry.status == ProgressStatus::NotStarted {
            entry.status = ProgressStatus::InProgress;
            entry.started_at = Some(at);
        }
    }

    /// Marks a session completed; `play` must have finished.
    pub fn record_finish(&mut self, play: &PlaySession, at: DateTime<Utc>) -> bool {
        if !play.is_finished() {
            return false;
        }
        let entry = self.entry(play.session_id());
        if entry.status != ProgressStatus::Completed {
            entry.started_at.get_or_insert(at);
            entry.status = ProgressStatus::Completed;
            entry.completed_at = Some(at);
        }
        true
    }

    fn entry(&mut self, session: &SessionId) -> &mut ProgressEntry {
        self.sessions
            .entry(session.clone())
            .or_insert(ProgressEntry {
                status: ProgressStatus::NotStarted,
                started_at: None,
                completed_at: None,
            })
    }

    /// In plan order a session unlocks once every earlier one is completed.
    pub fn check_unlocked(
        &self,
        plan: &SessionPlan,
        session: &SessionId,
        free_order: bool,
    ) -> Result<(), RuntimeError> {
        if free_order {
            return Ok(());
        }
        for earlier in plan.session_ids().take_while(|id| *id != session) {
            if self.status(earlier) != ProgressStatus::Completed {
                return Err(RuntimeError::Locked {
                    session: session.clone(),
                    waiting_on: earlier.clone(),
                });
            }
        }
        Ok(())
    }
}
