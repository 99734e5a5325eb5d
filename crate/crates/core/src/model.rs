//! Dialogue domain types and the structural validity rules shared by every
//! other module.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::ids::{IdError, MaterialId, SessionId, StateId};

pub const DEFAULT_MATERIAL_CAP: usize = 200_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("material body is empty")]
    EmptyMaterial,
    #[error("material body has {len} characters, the limit is {cap}")]
    MaterialTooLarge { len: usize, cap: usize },
    #[error(transparent)]
    Id(#[from] IdError),
    #[error("state {0} already exists")]
    DuplicateState(StateId),
}

/// Case-insensitive, whitespace-collapsed form used for every
/// "unique label" comparison (option labels, topic titles, suggestions).
pub fn normalize_label(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

// ---------------------------------------------------------------------------
// Material
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaterialSource {
    Pasted,
    ImportedFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaterialLimits {
    pub max_chars: usize,
}

impl Default for MaterialLimits {
    fn default() -> Self {
        Self {
            max_chars: DEFAULT_MATERIAL_CAP,
        }
    }
}

/// Source educational text plus where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Material {
    pub id: MaterialId,
    pub title: String,
    pub body: String,
    pub source: MaterialSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imported_name: Option<String>,
}

impl Material {
    pub fn new(
        title: impl Into<String>,
        body: impl Into<String>,
        source: MaterialSource,
        imported_name: Option<String>,
        limits: MaterialLimits,
    ) -> Result<Self, ModelError> {
        let material = Self {
            id: MaterialId::generate(),
            title: title.into(),
            body: body.into(),
            source,
            imported_name,
        };
        material.check(limits)?;
        Ok(material)
    }

    pub fn pasted(title: impl Into<String>, body: impl Into<String>) -> Result<Self, ModelError> {
        Self::new(title, body, MaterialSource::Pasted, None, MaterialLimits::default())
    }

    pub fn check(&self, limits: MaterialLimits) -> Result<(), ModelError> {
        if self.body.trim().is_empty() {
            return Err(ModelError::EmptyMaterial);
        }
        let len = self.body.chars().count();
        if len > limits.max_chars {
            return Err(ModelError::MaterialTooLarge {
                len,
                cap: limits.max_chars,
            });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Session plan
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionTopic {
    pub id: SessionId,
    /// 1-based position in the plan.
    pub ordinal: u32,
    pub title: String,
    pub key_points: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanViolation {
    #[error("plan has no sessions")]
    NoSessions,
    #[error("session {session} has ordinal {found}, expected {expected}")]
    OrdinalGap {
        session: SessionId,
        expected: u32,
        found: u32,
    },
    #[error("session {0} has an empty topic title")]
    EmptyTitle(SessionId),
    #[error("session {0} has no key points")]
    EmptyKeyPoints(SessionId),
    #[error("session {session} key point {index} is empty")]
    EmptyKeyPoint { session: SessionId, index: usize },
    #[error("topic title {title:?} is used by both {first} and {second}")]
    DuplicateTopic {
        title: String,
        first: SessionId,
        second: SessionId,
    },
    #[error("session id {0} is used more than once")]
    DuplicateSessionId(SessionId),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub sessions: Vec<SessionTopic>,
    /// The latest revision cue the planner applied, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revision_note: Option<String>,
}

impl SessionPlan {
    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn session(&self, id: &SessionId) -> Option<&SessionTopic> {
        self.sessions.iter().find(|s| &s.id == id)
    }

    pub fn position(&self, id: &SessionId) -> Option<usize> {
        self.sessions.iter().position(|s| &s.id == id)
    }

    pub fn session_ids(&self) -> impl Iterator<Item = &SessionId> {
        self.sessions.iter().map(|s| &s.id)
    }

    /// Reassigns ordinals 1..n in list order.
    pub fn renumber(&mut self) {
        for (i, session) in self.sessions.iter_mut().enumerate() {
            session.ordinal = i as u32 + 1;
        }
    }

    /// Every rule except "at least one session"; projects hold an empty plan
    /// until the planner has run.
    pub fn entry_violations(&self) -> Vec<PlanViolation> {
        let mut out = Vec::new();
        let mut ids = HashSet::new();
        let mut titles: HashMap<String, &SessionId> = HashMap::new();
        for (i, s) in self.sessions.iter().enumerate() {
            let expected = i as u32 + 1;
            if s.ordinal != expected {
                out.push(PlanViolation::OrdinalGap {
                    session: s.id.clone(),
                    expected,
                    found: s.ordinal,
                });
            }
            if !ids.insert(&s.id) {
                out.push(PlanViolation::DuplicateSessionId(s.id.clone()));
            }
            let norm = normalize_label(&s.title);
            if norm.is_empty() {
                out.push(PlanViolation::EmptyTitle(s.id.clone()));
            } else if let Some(first) = titles.get(&norm) {
                out.push(PlanViolation::DuplicateTopic {
                    title: s.title.clone(),
                    first: (*first).clone(),
                    second: s.id.clone(),
                });
            } else {
                titles.insert(norm, &s.id);
            }
            if s.key_points.is_empty() {
                out.push(PlanViolation::EmptyKeyPoints(s.id.clone()));
            }
            for (index, kp) in s.key_points.iter().enumerate() {
                if kp.trim().is_empty() {
                    out.push(PlanViolation::EmptyKeyPoint {
                        session: s.id.clone(),
                        index,
                    });
                }
            }
        }
        out
    }

    pub fn violations(&self) -> Vec<PlanViolation> {
        let mut out = Vec::new();
        if self.sessions.is_empty() {
            out.push(PlanViolation::NoSessions);
        }
        out.extend(self.entry_violations());
        out
    }
}

// ---------------------------------------------------------------------------
// Dialogue FSM
// ---------------------------------------------------------------------------

/// Where an option leads: another state of the same FSM, or the END sink.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    State(StateId),
    End,
}

impl Target {
    pub const END_KEYWORD: &'static str = "END";

    pub fn state(&self) -> Option<&StateId> {
        match self {
            Target::State(id) => Some(id),
            Target::End => None,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::State(id) => f.write_str(id.as_str()),
            Target::End => f.write_str(Self::END_KEYWORD),
        }
    }
}

impl Serialize for Target {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Target {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        if raw == Self::END_KEYWORD {
            Ok(Target::End)
        } else {
            StateId::new(raw)
                .map(Target::State)
                .map_err(serde::de::Error::custom)
        }
    }
}

impl From<StateId> for Target {
    fn from(id: StateId) -> Self {
        Target::State(id)
    }
}

/// A patient-facing button with exactly one transition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseOption {
    pub label: String,
    pub target: Target,
}

impl ResponseOption {
    pub fn new(label: impl Into<String>, target: impl Into<Target>) -> Self {
        Self {
            label: label.into(),
            target: target.into(),
        }
    }
}

/// Uninterpreted `key=value` annotation kept for nonverbal-behaviour tooling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tag {
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueState {
    pub id: StateId,
    pub utterance: String,
    #[serde(default)]
    pub options: Vec<ResponseOption>,
    #[serde(default)]
    pub is_entry: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<Tag>,
}

impl DialogueState {
    pub fn new(id: StateId, utterance: impl Into<String>) -> Self {
        Self {
            id,
            utterance: utterance.into(),
            options: Vec::new(),
            is_entry: false,
            tags: Vec::new(),
        }
    }

    pub fn entry(mut self) -> Self {
        self.is_entry = true;
        self
    }

    pub fn with_option(mut self, label: impl Into<String>, target: impl Into<Target>) -> Self {
        self.options.push(ResponseOption::new(label, target));
        self
    }

    pub fn is_terminal(&self) -> bool {
        self.options.is_empty()
    }

    pub fn has_label(&self, label: &str) -> bool {
        let norm = normalize_label(label);
        self.options.iter().any(|o| normalize_label(&o.label) == norm)
    }
}

/// One session's conversation. States keep their authoring order, which is
/// also the serialization order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "FsmRepr", try_from = "FsmRepr")]
pub struct DialogueFsm {
    pub session_id: SessionId,
    states: IndexMap<StateId, DialogueState>,
}

#[derive(Serialize, Deserialize)]
struct FsmRepr {
    session_id: SessionId,
    states: Vec<DialogueState>,
}

impl From<DialogueFsm> for FsmRepr {
    fn from(fsm: DialogueFsm) -> Self {
        Self {
            session_id: fsm.session_id,
            states: fsm.states.into_values().collect(),
        }
    }
}

impl TryFrom<FsmRepr> for DialogueFsm {
    type Error = ModelError;

    fn try_from(repr: FsmRepr) -> Result<Self, Self::Error> {
        DialogueFsm::from_states(repr.session_id, repr.states)
    }
}

impl DialogueFsm {
    pub fn new(session_id: SessionId) -> Self {
        Self {
            session_id,
            states: IndexMap::new(),
        }
    }

    pub fn from_states(
        session_id: SessionId,
        states: impl IntoIterator<Item = DialogueState>,
    ) -> Result<Self, ModelError> {
        let mut fsm = Self::new(session_id);
        for state in states {
            fsm.push_state(state)?;
        }
        Ok(fsm)
    }

    pub fn push_state(&mut self, state: DialogueState) -> Result<(), ModelError> {
        if self.states.contains_key(&state.id) {
            return Err(ModelError::DuplicateState(state.id));
        }
        self.states.insert(state.id.clone(), state);
        Ok(())
    }

    pub fn insert_state_at(&mut self, index: usize, state: DialogueState) -> Result<(), ModelError> {
        if self.states.contains_key(&state.id) {
            return Err(ModelError::DuplicateState(state.id));
        }
        let index = index.min(self.states.len());
        self.states.shift_insert(index, state.id.clone(), state);
        Ok(())
    }

    /// Removes a state, keeping the order of the rest. Returns its former
    /// position alongside it.
    pub fn remove_state(&mut self, id: &StateId) -> Option<(usize, DialogueState)> {
        self.states
            .shift_remove_full(id)
            .map(|(index, _, state)| (index, state))
    }

    pub fn state(&self, id: &StateId) -> Option<&DialogueState> {
        self.states.get(id)
    }

    pub fn state_mut(&mut self, id: &StateId) -> Option<&mut DialogueState> {
        self.states.get_mut(id)
    }

    pub fn contains(&self, id: &StateId) -> bool {
        self.states.contains_key(id)
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &DialogueState> {
        self.states.values()
    }

    pub fn states_mut(&mut self) -> impl Iterator<Item = &mut DialogueState> {
        self.states.values_mut()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn entry_ids(&self) -> Vec<&StateId> {
        self.states
            .values()
            .filter(|s| s.is_entry)
            .map(|s| &s.id)
            .collect()
    }

    /// The entry state, when exactly one is flagged.
    pub fn entry(&self) -> Option<&DialogueState> {
        let mut flagged = self.states.values().filter(|s| s.is_entry);
        match (flagged.next(), flagged.next()) {
            (Some(state), None) => Some(state),
            _ => None,
        }
    }

    pub fn entry_id(&self) -> Option<&StateId> {
        self.entry().map(|s| &s.id)
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DefectKind {
    NoEntry,
    MultipleEntry,
    DanglingTarget,
    UnreachableState,
    DuplicateOptionLabel,
    EmptyUtterance,
    EmptyOptionLabel,
}

impl DefectKind {
    pub const ALL: [DefectKind; 7] = [
        DefectKind::NoEntry,
        DefectKind::MultipleEntry,
        DefectKind::DanglingTarget,
        DefectKind::UnreachableState,
        DefectKind::DuplicateOptionLabel,
        DefectKind::EmptyUtterance,
        DefectKind::EmptyOptionLabel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DefectKind::NoEntry => "no-entry",
            DefectKind::MultipleEntry => "multiple-entry",
            DefectKind::DanglingTarget => "dangling-target",
            DefectKind::UnreachableState => "unreachable-state",
            DefectKind::DuplicateOptionLabel => "duplicate-option-label",
            DefectKind::EmptyUtterance => "empty-utterance",
            DefectKind::EmptyOptionLabel => "empty-option-label",
        }
    }
}

impl fmt::Display for DefectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Points at a state and, optionally, one of its options (0-based index).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Location {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub option: Option<usize>,
}

impl Location {
    pub fn fsm() -> Self {
        Self {
            state: None,
            option: None,
        }
    }

    pub fn state(id: &StateId) -> Self {
        Self {
            state: Some(id.clone()),
            option: None,
        }
    }

    pub fn option(id: &StateId, index: usize) -> Self {
        Self {
            state: Some(id.clone()),
            option: Some(index),
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.state, self.option) {
            (None, _) => f.write_str("<dialogue>"),
            (Some(s), None) => write!(f, "{s}"),
            (Some(s), Some(i)) => write!(f, "{s}/option{}", i + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Defect {
    pub kind: DefectKind,
    pub location: Location,
    pub message: String,
}

impl fmt::Display for Defect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.kind, self.location, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub defects: Vec<Defect>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.defects.is_empty()
    }

    pub fn count(&self, kind: DefectKind) -> usize {
        self.defects.iter().filter(|d| d.kind == kind).count()
    }

    pub fn kinds(&self) -> BTreeSet<DefectKind> {
        self.defects.iter().map(|d| d.kind).collect()
    }
}

/// Lists every structural defect of `fsm`. Cycles are legal; only
/// reachability from the entry matters.
///
/// When several states are flagged as entry, reachability is computed from
/// all of them so that the extra entry is the only reported problem. With no
/// entry at all, reachability is not evaluated.
pub fn validate_fsm(fsm: &DialogueFsm) -> ValidationReport {
    let mut defects = Vec::new();
    let entries = fsm.entry_ids();

    if entries.is_empty() {
        defects.push(Defect {
            kind: DefectKind::NoEntry,
            location: Location::fsm(),
            message: "no state is marked ENTRY".into(),
        });
    }
    for extra in entries.iter().skip(1) {
        defects.push(Defect {
            kind: DefectKind::MultipleEntry,
            location: Location::state(extra),
            message: format!("{extra} is marked ENTRY but {} already is", entries[0]),
        });
    }

    for state in fsm.states() {
        if state.utterance.trim().is_empty() {
            defects.push(Defect {
                kind: DefectKind::EmptyUtterance,
                location: Location::state(&state.id),
                message: "agent utterance is empty".into(),
            });
        }
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (i, option) in state.options.iter().enumerate() {
            let norm = normalize_label(&option.label);
            if norm.is_empty() {
                defects.push(Defect {
                    kind: DefectKind::EmptyOptionLabel,
                    location: Location::option(&state.id, i),
                    message: "option label is empty".into(),
                });
            } else if let Some(first) = seen.get(&norm) {
                defects.push(Defect {
                    kind: DefectKind::DuplicateOptionLabel,
                    location: Location::option(&state.id, i),
                    message: format!(
                        "label {:?} repeats option{} of the same state",
                        option.label,
                        first + 1
                    ),
                });
            } else {
                seen.insert(norm, i);
            }
            if let Target::State(target) = &option.target {
                if !fsm.contains(target) {
                    defects.push(Defect {
                        kind: DefectKind::DanglingTarget,
                        location: Location::option(&state.id, i),
                        message: format!("target {target} does not exist"),
                    });
                }
            }
        }
    }

    if !entries.is_empty() {
        let reachable = reachable_from(fsm, entries.iter().copied());
        for state in fsm.states() {
            if !reachable.contains(&state.id) {
                defects.push(Defect {
                    kind: DefectKind::UnreachableState,
                    location: Location::state(&state.id),
                    message: "no path from the entry reaches this state".into(),
                });
            }
        }
    }

    ValidationReport { defects }
}

fn reachable_from<'a>(
    fsm: &'a DialogueFsm,
    roots: impl IntoIterator<Item = &'a StateId>,
) -> BTreeSet<StateId> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    for root in roots {
        if fsm.contains(root) && seen.insert(root.clone()) {
            queue.push_back(root);
        }
    }
    while let Some(id) = queue.pop_front() {
        let Some(state) = fsm.state(id) else { continue };
        for option in &state.options {
            if let Target::State(next) = &option.target {
                if fsm.contains(next) && seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
    }
    seen
}

/// States reachable from the entry by following options. Empty when the FSM
/// has no entry.
pub fn reachable_states(fsm: &DialogueFsm) -> BTreeSet<StateId> {
    reachable_from(fsm, fsm.entry_ids())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsmStats {
    pub state_count: usize,
    pub option_count: usize,
    pub terminal_count: usize,
    /// Longest simple path from the entry, in transitions between states.
    pub max_depth: usize,
}

pub fn fsm_stats(fsm: &DialogueFsm) -> FsmStats {
    let reachable = reachable_states(fsm);
    let mut stats = FsmStats {
        state_count: reachable.len(),
        option_count: 0,
        terminal_count: 0,
        max_depth: 0,
    };
    for id in &reachable {
        let state = fsm.state(id).expect("reachable state exists");
        stats.option_count += state.options.len();
        if state.is_terminal() {
            stats.terminal_count += 1;
        }
    }
    if let Some(entry) = fsm.entry_id() {
        let mut on_path = HashSet::new();
        stats.max_depth = longest_simple_path(fsm, entry, &mut on_path);
    }
    stats
}

fn longest_simple_path<'a>(
    fsm: &'a DialogueFsm,
    at: &'a StateId,
    on_path: &mut HashSet<&'a StateId>,
) -> usize {
    on_path.insert(at);
    let mut best = 0;
    if let Some(state) = fsm.state(at) {
        let mut next: Vec<&StateId> = state
            .options
            .iter()
            .filter_map(|o| o.target.state())
            .filter(|t| fsm.contains(t))
            .collect();
        next.sort();
        next.dedup();
        for n in next {
            if !on_path.contains(n) {
                best = best.max(1 + longest_simple_path(fsm, n, on_path));
            }
        }
    }
    on_path.remove(at);
    best
}
