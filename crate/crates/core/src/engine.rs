//! The authoring workflow over a [`ProjectStore`]: what the CLI and the
//! HTTP service both drive.
//!
//! Every operation loads the project from disk, so separate processes see
//! each other's work. Mutations of one project are serialized by a
//! per-project lock.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::editing::{EditCommand, EditError, HistorySummary, LogEvent};
use crate::ids::{PlayId, ProjectId, SessionId, StateId};
use crate::markup::{self, ParseError};
use crate::model::{
    fsm_stats, DialogueFsm, FsmStats, Material, MaterialLimits, MaterialSource, ModelError,
    SessionPlan, SessionTopic,
};
use crate::orchestration::{
    generate_fsm, key_point_coverage, plan_sessions, suggest_options, GeneratedFsm,
    KeyPointCoverage, LlmExchange, LlmProvider, OptionDraft, OrchestrationError,
    OrchestratorConfig, RevisionCue,
};
use crate::project::{ContentHash, Project};
use crate::runtime::{PlaySession, PlayView, ProgressLedger, RuntimeError};
use crate::store::{ProjectStore, StoreError};

/// How an error should be reported to a client.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    BadRequest,
    NotFound,
    Conflict,
    Unprocessable,
    Upstream,
    Internal,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Material(#[from] ModelError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Edit(#[from] EditError),
    #[error(transparent)]
    Orchestration(#[from] OrchestrationError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("session {0} is not in the plan")]
    UnknownSession(SessionId),
    #[error("session {0} has no dialogue yet")]
    NoDialogue(SessionId),
    #[error("state {state} does not exist in session {session}")]
    UnknownState { session: SessionId, state: StateId },
    #[error("the project has no plan yet")]
    NoPlan,
    #[error("the plan must be approved before dialogues are generated")]
    PlanNotApproved,
    #[error("play {0} not found")]
    UnknownPlay(PlayId),
    #[error("the document does not parse")]
    Import(Vec<ParseError>),
}

impl EngineError {
    pub fn class(&self) -> ErrorClass {
        use ErrorClass::*;
        match self {
            EngineError::Material(_) => BadRequest,
            EngineError::Store(StoreError::NotFound(_)) => NotFound,
            EngineError::Store(StoreError::AlreadyExists(_)) => Conflict,
            EngineError::Store(_) => Internal,
            EngineError::Edit(e) => match e {
                e if e.is_unknown_target() => NotFound,
                EditError::EmptyText(_) | EditError::InvalidCommand(_) => BadRequest,
                _ => Conflict,
            },
            EngineError::Orchestration(e) => match e {
                OrchestrationError::ProviderUnreachable { .. } => Upstream,
                OrchestrationError::InvalidStructuredOutput { .. }
                | OrchestrationError::EmptyDialogue { .. }
                | OrchestrationError::NoNovelOptions { .. } => Unprocessable,
                OrchestrationError::CueWithoutPrior => Conflict,
                OrchestrationError::UnknownSession(_) | OrchestrationError::UnknownState(_) => {
                    NotFound
                }
            },
            EngineError::Runtime(e) => match e {
                RuntimeError::OutOfRange { .. } => BadRequest,
                _ => Conflict,
            },
            EngineError::UnknownSession(_)
            | EngineError::UnknownState { .. }
            | EngineError::UnknownPlay(_) => NotFound,
            EngineError::NoDialogue(_) | EngineError::NoPlan | EngineError::PlanNotApproved => {
                Conflict
            }
            EngineError::Import(_) => Unprocessable,
        }
    }

    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::Material(ModelError::EmptyMaterial) => "empty-material",
            EngineError::Material(ModelError::MaterialTooLarge { .. }) => "material-too-large",
            EngineError::Material(_) => "invalid-material",
            EngineError::Store(StoreError::NotFound(_)) => "project-not-found",
            EngineError::Store(StoreError::AlreadyExists(_)) => "project-exists",
            EngineError::Store(_) => "store-failure",
            EngineError::Edit(e) => e.code(),
            EngineError::Orchestration(e) => match e {
                OrchestrationError::ProviderUnreachable { .. } => "provider-unreachable",
                OrchestrationError::InvalidStructuredOutput { .. } => "invalid-structured-output",
                OrchestrationError::EmptyDialogue { .. } => "empty-dialogue",
                OrchestrationError::NoNovelOptions { .. } => "no-novel-options",
                OrchestrationError::CueWithoutPrior => "cue-without-prior",
                OrchestrationError::UnknownSession(_) => "unknown-session",
                OrchestrationError::UnknownState(_) => "unknown-state",
            },
            EngineError::Runtime(e) => match e {
                RuntimeError::InvalidFsm(_) => "invalid-fsm",
                RuntimeError::OutOfRange { .. } => "out-of-range",
                RuntimeError::AlreadyFinished => "already-finished",
                RuntimeError::Locked { .. } => "session-locked",
            },
            EngineError::UnknownSession(_) => "unknown-session",
            EngineError::NoDialogue(_) => "no-dialogue",
            EngineError::UnknownState { .. } => "unknown-state",
            EngineError::NoPlan => "no-plan",
            EngineError::PlanNotApproved => "plan-not-approved",
            EngineError::UnknownPlay(_) => "play-not-found",
            EngineError::Import(_) => "parse-error",
        }
    }

    /// Extra lines for the client: parse errors, defects, rejected model
    /// replies.
    pub fn details(&self) -> Vec<String> {
        match self {
            EngineError::Import(errors) => errors.iter().map(ToString::to_string).collect(),
            EngineError::Edit(EditError::InvalidFsm { defects, .. }) => {
                defects.iter().map(ToString::to_string).collect()
            }
            EngineError::Edit(EditError::InvalidPlan(v)) => v.iter().map(ToString::to_string).collect(),
            EngineError::Runtime(RuntimeError::InvalidFsm(defects)) => {
                defects.iter().map(ToString::to_string).collect()
            }
            EngineError::Orchestration(OrchestrationError::InvalidStructuredOutput {
                errors, ..
            }) => errors.clone(),
            _ => Vec::new(),
        }
    }

    pub fn exchanges(&self) -> &[LlmExchange] {
        match self {
            EngineError::Orchestration(e) => e.exchanges(),
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditOutcome {
    pub content_hash: ContentHash,
    pub revision_count: usize,
    pub history: HistorySummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub session_id: SessionId,
    pub title: String,
    pub generated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fsm: Option<FsmStats>,
    pub coverage: Vec<KeyPointCoverage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectStats {
    pub project_id: ProjectId,
    pub title: String,
    pub plan_approved: bool,
    pub content_hash: ContentHash,
    pub revision_count: usize,
    pub sessions: Vec<SessionStats>,
}

/// Project overview for listings and GET responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectSummary {
    pub project_id: ProjectId,
    pub title: String,
    pub material: Material,
    pub plan: SessionPlan,
    pub plan_approved: bool,
    pub generated: Vec<SessionId>,
    pub content_hash: ContentHash,
    pub history: HistorySummary,
}

impl ProjectSummary {
    pub fn of(p: &Project) -> Self {
        Self {
            project_id: p.id.clone(),
            title: p.title().to_string(),
            material: p.material.clone(),
            plan: p.plan().clone(),
            plan_approved: p.plan_approved,
            generated: p.fsms().keys().cloned().collect(),
            content_hash: p.content_hash(),
            history: p.history().summary(),
        }
    }
}

struct ActivePlay {
    project: ProjectId,
    play: PlaySession,
}

pub struct Engine {
    store: ProjectStore,
    provider: Arc<dyn LlmProvider>,
    orchestrator: OrchestratorConfig,
    limits: MaterialLimits,
    free_order: bool,
    locks: Mutex<HashMap<ProjectId, Arc<Mutex<()>>>>,
    plays: Mutex<HashMap<PlayId, ActivePlay>>,
}

impl Engine {
    pub fn new(store: ProjectStore, provider: Arc<dyn LlmProvider>) -> Self {
        Self {
            store,
            provider,
            orchestrator: OrchestratorConfig::default(),
            limits: MaterialLimits::default(),
            free_order: false,
            locks: Mutex::new(HashMap::new()),
            plays: Mutex::new(HashMap::new()),
        }
    }

    pub fn from_config(config: &Config) -> Result<Self, EngineFromConfigError> {
        let store = ProjectStore::open(&config.store)?;
        let provider = config.build_provider()?;
        Ok(Self::new(store, provider)
            .with_orchestrator(config.orchestrator())
            .with_limits(config.material_limits())
            .with_free_order(config.free_order))
    }

    pub fn with_orchestrator(mut self, config: OrchestratorConfig) -> Self {
        self.orchestrator = config;
        self
    }

    pub fn with_limits(mut self, limits: MaterialLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn with_free_order(mut self, free_order: bool) -> Self {
        self.free_order = free_order;
        self
    }

    pub fn store(&self) -> &ProjectStore {
        &self.store
    }

    fn lock(&self, id: &ProjectId) -> Arc<Mutex<()>> {
        self.locks
            .lock()
            .expect("lock table")
            .entry(id.clone())
            .or_default()
            .clone()
    }

    /// Runs `f` on the project under its writer lock.
    fn with_project<T>(
        &self,
        id: &ProjectId,
        f: impl FnOnce(&mut Project) -> Result<T, EngineError>,
    ) -> Result<T, EngineError> {
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap_or_else(|p| p.into_inner());
        let mut project = self.store.load(id)?;
        f(&mut project)
    }

    fn commit(&self, project: &mut Project, events: Vec<LogEvent>) -> Result<(), EngineError> {
        for event in &events {
            project.apply_event(event)?;
        }
        self.store.record_events(project, &events)?;
        Ok(())
    }

    // -- projects ----------------------------------------------------------

    pub fn create_project(
        &self,
        title: &str,
        body: &str,
        source: MaterialSource,
        imported_name: Option<String>,
    ) -> Result<Project, EngineError> {
        let material = Material::new(title, body, source, imported_name, self.limits)?;
        let project = Project::new(material);
        self.store.create(&project)?;
        Ok(project)
    }

    pub fn load(&self, id: &ProjectId) -> Result<Project, EngineError> {
        Ok(self.store.load(id)?)
    }

    pub fn list(&self) -> Result<Vec<ProjectId>, EngineError> {
        Ok(self.store.list()?)
    }

    pub fn exchanges(&self, id: &ProjectId) -> Result<Vec<LlmExchange>, EngineError> {
        if !self.store.exists(id) {
            return Err(StoreError::NotFound(id.clone()).into());
        }
        Ok(self.store.load_exchanges(id)?)
    }

    // -- pipeline ----------------------------------------------------------

    /// Runs the planner; with a cue, revises the current plan. The new plan
    /// needs approval again.
    pub fn plan(
        &self,
        id: &ProjectId,
        cue: Option<&str>,
    ) -> Result<(SessionPlan, Vec<LlmExchange>), EngineError> {
        self.with_project(id, |project| {
            let cue = cue.and_then(RevisionCue::new);
            let prior = (!project.plan().is_empty()).then(|| project.plan().clone());
            let outcome = plan_sessions(
                &project.material,
                cue.as_ref(),
                prior.as_ref(),
                &*self.provider,
                &self.orchestrator,
            );
            self.store.append_exchanges(id, outcome_exchanges(&outcome))?;
            let planned = outcome?;
            project.plan_approved = false;
            self.commit(
                project,
                vec![LogEvent::Apply {
                    command: EditCommand::ReplacePlan {
                        plan: planned.value.clone(),
                    },
                }],
            )?;
            Ok((planned.value, planned.exchanges))
        })
    }

    pub fn approve_plan(&self, id: &ProjectId) -> Result<SessionPlan, EngineError> {
        self.with_project(id, |project| {
            if project.plan().is_empty() {
                return Err(EngineError::NoPlan);
            }
            project.plan_approved = true;
            self.store.save_meta(project)?;
            Ok(project.plan().clone())
        })
    }

    pub fn generate(
        &self,
        id: &ProjectId,
        session: &SessionId,
    ) -> Result<(GeneratedFsm, Vec<LlmExchange>), EngineError> {
        self.with_project(id, |project| self.generate_locked(project, session))
    }

    /// Generates every session in plan order, stopping at the first failure.
    pub fn generate_all(
        &self,
        id: &ProjectId,
    ) -> Result<Vec<(SessionId, GeneratedFsm)>, EngineError> {
        self.with_project(id, |project| {
            let sessions: Vec<SessionId> = project.plan().session_ids().cloned().collect();
            if sessions.is_empty() {
                return Err(EngineError::NoPlan);
            }
            let mut out = Vec::new();
            for sid in sessions {
                let (generated, _) = self.generate_locked(project, &sid)?;
                out.push((sid, generated));
            }
            Ok(out)
        })
    }

    fn generate_locked(
        &self,
        project: &mut Project,
        session: &SessionId,
    ) -> Result<(GeneratedFsm, Vec<LlmExchange>), EngineError> {
        if project.plan().is_empty() {
            return Err(EngineError::NoPlan);
        }
        if !project.plan_approved {
            return Err(EngineError::PlanNotApproved);
        }
        let topic = topic(project, session)?.clone();
        let outcome = generate_fsm(
            &project.material,
            project.plan(),
            &topic,
            &*self.provider,
            &self.orchestrator,
        );
        self.store
            .append_exchanges(&project.id, outcome_exchanges(&outcome))?;
        let generated = outcome?;
        self.commit(
            project,
            vec![LogEvent::Apply {
                command: EditCommand::ReplaceFsm {
                    fsm: generated.value.fsm.clone(),
                },
            }],
        )?;
        Ok((generated.value, generated.exchanges))
    }

    pub fn suggest(
        &self,
        id: &ProjectId,
        session: &SessionId,
        state: &StateId,
        count: usize,
    ) -> Result<(Vec<OptionDraft>, Vec<LlmExchange>), EngineError> {
        // Read-only on content; the lock keeps exchange appends ordered.
        self.with_project(id, |project| {
            let topic = topic(project, session)?.clone();
            let fsm = dialogue(project, session)?;
            if !fsm.contains(state) {
                return Err(EngineError::UnknownState {
                    session: session.clone(),
                    state: state.clone(),
                });
            }
            let outcome = suggest_options(
                fsm,
                state,
                &topic,
                &project.material,
                count,
                &*self.provider,
                &self.orchestrator,
            );
            self.store.append_exchanges(id, outcome_exchanges(&outcome))?;
            let drafts = outcome?;
            Ok((drafts.value, drafts.exchanges))
        })
    }

    // -- editing -----------------------------------------------------------

    pub fn edit(&self, id: &ProjectId, command: EditCommand) -> Result<EditOutcome, EngineError> {
        self.event(id, LogEvent::Apply { command })
    }

    pub fn undo(&self, id: &ProjectId) -> Result<EditOutcome, EngineError> {
        self.event(id, LogEvent::Undo)
    }

    pub fn redo(&self, id: &ProjectId) -> Result<EditOutcome, EngineError> {
        self.event(id, LogEvent::Redo)
    }

    fn event(&self, id: &ProjectId, event: LogEvent) -> Result<EditOutcome, EngineError> {
        self.with_project(id, |project| {
            self.commit(project, vec![event])?;
            Ok(EditOutcome {
                content_hash: project.content_hash(),
                revision_count: project.revision_count(),
                history: project.history().summary(),
            })
        })
    }

    // -- export / import ---------------------------------------------------

    pub fn export(&self, id: &ProjectId) -> Result<String, EngineError> {
        let project = self.store.load(id)?;
        let text = markup::serialize(&project.to_document()).map_err(|e| {
            StoreError::Corrupt {
                path: self.store.project_dir(id),
                message: e.to_string(),
            }
        })?;
        Ok(text)
    }

    /// Loads FSMs from a `.hdfsm` document. Into a project without a plan,
    /// each dialogue also becomes a topic (titled by the dialogue, with the
    /// title as its one key point) and the plan counts as approved. Into a
    /// planned project, every dialogue must name a planned session.
    pub fn import(&self, id: &ProjectId, text: &str) -> Result<Vec<SessionId>, EngineError> {
        let doc = markup::parse(text).map_err(EngineError::Import)?;
        self.with_project(id, |project| {
            let mut events = Vec::new();
            if project.plan().is_empty() {
                let sessions = doc
                    .dialogues
                    .iter()
                    .enumerate()
                    .map(|(i, d)| SessionTopic {
                        id: d.fsm.session_id.clone(),
                        ordinal: i as u32 + 1,
                        title: d.title.clone(),
                        key_points: vec![d.title.clone()],
                    })
                    .collect();
                events.push(LogEvent::Apply {
                    command: EditCommand::ReplacePlan {
                        plan: SessionPlan {
                            sessions,
                            revision_note: None,
                        },
                    },
                });
                project.plan_approved = true;
            } else if let Some(d) = doc
                .dialogues
                .iter()
                .find(|d| project.plan().session(&d.fsm.session_id).is_none())
            {
                return Err(EngineError::UnknownSession(d.fsm.session_id.clone()));
            }
            let ids = doc.dialogues.iter().map(|d| d.fsm.session_id.clone()).collect();
            events.extend(doc.dialogues.into_iter().map(|d| LogEvent::Apply {
                command: EditCommand::ReplaceFsm { fsm: d.fsm },
            }));
            self.commit(project, events)?;
            Ok(ids)
        })
    }

    // -- stats -------------------------------------------------------------

    pub fn stats(&self, id: &ProjectId) -> Result<ProjectStats, EngineError> {
        let project = self.store.load(id)?;
        let sessions = project
            .plan()
            .sessions
            .iter()
            .map(|topic| {
                let fsm = project.fsm(&topic.id);
                SessionStats {
                    session_id: topic.id.clone(),
                    title: topic.title.clone(),
                    generated: fsm.is_some(),
                    fsm: fsm.map(fsm_stats),
                    coverage: fsm
                        .map(|f| key_point_coverage(f, topic, self.orchestrator.coverage_threshold))
                        .unwrap_or_default(),
                }
            })
            .collect();
        Ok(ProjectStats {
            project_id: project.id.clone(),
            title: project.title().to_string(),
            plan_approved: project.plan_approved,
            content_hash: project.content_hash(),
            revision_count: project.revision_count(),
            sessions,
        })
    }

    // -- playthrough -------------------------------------------------------

    pub fn start_play(&self, id: &ProjectId, session: &SessionId) -> Result<PlayView, EngineError> {
        let play = self.with_project(id, |project| {
            topic(project, session)?;
            let fsm = dialogue(project, session)?.clone();
            let mut ledger = self.store.load_progress(id)?;
            ledger.check_unlocked(project.plan(), session, self.free_order)?;
            let play = PlaySession::start(&fsm)?;
            ledger.record_start(session, Utc::now());
            self.finish_if_done(&mut ledger, &play);
            self.store.save_progress(id, &ledger)?;
            Ok(play)
        })?;
        let view = play.view();
        self.plays.lock().expect("plays").insert(
            play.id.clone(),
            ActivePlay {
                project: id.clone(),
                play,
            },
        );
        Ok(view)
    }

    pub fn choose(&self, play_id: &PlayId, index: usize) -> Result<PlayView, EngineError> {
        let (project, view, finished) = {
            let mut plays = self.plays.lock().expect("plays");
            let active = plays
                .get_mut(play_id)
                .ok_or_else(|| EngineError::UnknownPlay(play_id.clone()))?;
            active.play.choose(index)?;
            let finished = active.play.is_finished().then(|| active.play.clone());
            (active.project.clone(), active.play.view(), finished)
        };
        if let Some(play) = finished {
            self.with_project(&project, |_| {
                let mut ledger = self.store.load_progress(&project)?;
                self.finish_if_done(&mut ledger, &play);
                self.store.save_progress(&project, &ledger)?;
                Ok(())
            })?;
        }
        Ok(view)
    }

    pub fn play_view(&self, play_id: &PlayId) -> Result<PlayView, EngineError> {
        self.plays
            .lock()
            .expect("plays")
            .get(play_id)
            .map(|a| a.play.view())
            .ok_or_else(|| EngineError::UnknownPlay(play_id.clone()))
    }

    /// Plays a fixed choice script to the end (or until it runs out).
    pub fn play_script(
        &self,
        id: &ProjectId,
        session: &SessionId,
        choices: &[usize],
    ) -> Result<PlayView, EngineError> {
        let view = self.start_play(id, session)?;
        let mut last = view;
        for &c in choices {
            last = self.choose(&last.play_id, c)?;
        }
        Ok(last)
    }

    pub fn progress(&self, id: &ProjectId) -> Result<ProgressLedger, EngineError> {
        if !self.store.exists(id) {
            return Err(StoreError::NotFound(id.clone()).into());
        }
        Ok(self.store.load_progress(id)?)
    }

    fn finish_if_done(&self, ledger: &mut ProgressLedger, play: &PlaySession) {
        ledger.record_finish(play, Utc::now());
    }
}

#[derive(Debug, Error)]
pub enum EngineFromConfigError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

fn outcome_exchanges<T>(
    outcome: &Result<crate::orchestration::Structured<T>, OrchestrationError>,
) -> &[LlmExchange] {
    match outcome {
        Ok(s) => &s.exchanges,
        Err(e) => e.exchanges(),
    }
}

fn topic<'a>(project: &'a Project, session: &SessionId) -> Result<&'a SessionTopic, EngineError> {
    project
        .plan()
        .session(session)
        .ok_or_else(|| EngineError::UnknownSession(session.clone()))
}

fn dialogue<'a>(project: &'a Project, session: &SessionId) -> Result<&'a DialogueFsm, EngineError> {
    project
        .fsm(session)
        .ok_or_else(|| EngineError::NoDialogue(session.clone()))
}
