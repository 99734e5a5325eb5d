//! The three-model pipeline: a planner turns material into a session plan, a
//! dialogue designer drafts one FSM per session, and a patient-response
//! model suggests extra options for a state.
//!
//! Every model reply must carry its payload in a fenced block. Replies that
//! fail to parse are sent back with the parse errors for repair, up to
//! `max_repair_attempts` provider calls per operation in total. Every call
//! is recorded as an [`LlmExchange`].

pub mod coverage;
pub mod prompts;
pub mod provider;

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{SessionId, StateId};
use crate::markup::{self, parse_session_plan_json, plan_to_json};
use crate::model::{normalize_label, validate_fsm, DialogueFsm, Material, SessionPlan, SessionTopic};

pub use coverage::{key_point_coverage, KeyPointCoverage, DEFAULT_COVERAGE_THRESHOLD};
pub use provider::{
    Completion, CompletionRequest, HttpProvider, HttpProviderConfig, LlmProvider, ProviderError,
    ScriptedProvider, ScriptedReply, Usage,
};

pub const DEFAULT_MAX_REPAIR_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Planner,
    Designer,
    Suggester,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Planner, Role::Designer, Role::Suggester];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Planner => "planner",
            Role::Designer => "designer",
            Role::Suggester => "suggester",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    /// Accepted on the first attempt.
    Parsed,
    /// Accepted after at least one failed attempt.
    Repaired,
    Failed,
}

/// Audit record of one provider round trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmExchange {
    pub role: Role,
    /// 1-based.
    pub attempt: u32,
    pub request: CompletionRequest,
    pub response: String,
    pub outcome: Outcome,
    /// Why the reply was rejected, when it was.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoleSettings {
    pub temperature: f32,
    pub max_output: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrchestratorConfig {
    pub max_repair_attempts: u32,
    pub planner: RoleSettings,
    pub designer: RoleSettings,
    pub suggester: RoleSettings,
    pub coverage_threshold: f64,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            max_repair_attempts: DEFAULT_MAX_REPAIR_ATTEMPTS,
            planner: RoleSettings {
                temperature: 0.2,
                max_output: 2048,
            },
            designer: RoleSettings {
                temperature: 0.4,
                max_output: 4096,
            },
            suggester: RoleSettings {
                temperature: 0.8,
                max_output: 512,
            },
            coverage_threshold: DEFAULT_COVERAGE_THRESHOLD,
        }
    }
}

impl OrchestratorConfig {
    fn settings(&self, role: Role) -> RoleSettings {
        match role {
            Role::Planner => self.planner,
            Role::Designer => self.designer,
            Role::Suggester => self.suggester,
        }
    }
}

/// Non-empty free-text direction for re-planning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionCue(String);

impl RevisionCue {
    pub fn new(text: impl Into<String>) -> Option<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            None
        } else {
            Some(Self(text.trim().to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Error)]
pub enum OrchestrationError {
    #[error("{source}")]
    ProviderUnreachable {
        source: ProviderError,
        exchanges: Vec<LlmExchange>,
    },
    #[error("{role} output still invalid after {} attempts: {}", .exchanges.len(), .errors.join("; "))]
    InvalidStructuredOutput {
        role: Role,
        errors: Vec<String>,
        exchanges: Vec<LlmExchange>,
    },
    #[error("designer produced a dialogue with no states")]
    EmptyDialogue { exchanges: Vec<LlmExchange> },
    #[error("every suggested option duplicates an existing label")]
    NoNovelOptions { exchanges: Vec<LlmExchange> },
    #[error("a revision cue needs a prior plan to revise")]
    CueWithoutPrior,
    #[error("session {0} is not in the plan")]
    UnknownSession(SessionId),
    #[error("state {0} does not exist")]
    UnknownState(StateId),
}

impl OrchestrationError {
    pub fn exchanges(&self) -> &[LlmExchange] {
        match self {
            OrchestrationError::ProviderUnreachable { exchanges, .. }
            | OrchestrationError::InvalidStructuredOutput { exchanges, .. }
            | OrchestrationError::EmptyDialogue { exchanges }
            | OrchestrationError::NoNovelOptions { exchanges } => exchanges,
            _ => &[],
        }
    }

    pub fn into_exchanges(self) -> Vec<LlmExchange> {
        match self {
            OrchestrationError::ProviderUnreachable { exchanges, .. }
            | OrchestrationError::InvalidStructuredOutput { exchanges, .. }
            | OrchestrationError::EmptyDialogue { exchanges }
            | OrchestrationError::NoNovelOptions { exchanges } => exchanges,
            _ => Vec::new(),
        }
    }
}

/// Result of one structured call: the accepted value and its audit trail.
#[derive(Debug, Clone)]
pub struct Structured<T> {
    pub value: T,
    pub exchanges: Vec<LlmExchange>,
}

fn repair_prompt(original: &str, reply: &str, errors: &[String]) -> String {
    let mut out = String::from(original);
    out.push_str("\n\nYour previous reply was:\n<<<\n");
    out.push_str(reply.trim_end());
    out.push_str("\n>>>\n\nIt could not be accepted because:\n");
    for e in errors {
        out.push_str("- ");
        out.push_str(e);
        out.push('\n');
    }
    out.push_str("\nReply again with a corrected version, following the required format exactly.");
    out
}

/// Calls the provider until `parse` accepts a reply or `max_attempts`
/// calls have been made. A provider failure ends the loop immediately.
pub fn run_structured<T>(
    provider: &dyn LlmProvider,
    request: CompletionRequest,
    max_attempts: u32,
    mut parse: impl FnMut(&str) -> Result<T, Vec<String>>,
) -> Result<Structured<T>, OrchestrationError> {
    let max_attempts = max_attempts.max(1);
    let role = request.role;
    let original_prompt = request.user_prompt.clone();
    let mut exchanges = Vec::new();
    let mut current = request;
    let mut last_errors = Vec::new();

    for attempt in 1..=max_attempts {
        let reply = match provider.complete(&current) {
            Ok(reply) => reply,
            Err(source) => {
                exchanges.push(LlmExchange {
                    role,
                    attempt,
                    request: current,
                    response: String::new(),
                    outcome: Outcome::Failed,
                    errors: vec![source.to_string()],
                    timestamp: Utc::now(),
                });
                return Err(OrchestrationError::ProviderUnreachable { source, exchanges });
            }
        };
        match parse(&reply.text) {
            Ok(value) => {
                exchanges.push(LlmExchange {
                    role,
                    attempt,
                    request: current,
                    response: reply.text,
                    outcome: if attempt == 1 {
                        Outcome::Parsed
                    } else {
                        Outcome::Repaired
                    },
                    errors: Vec::new(),
                    timestamp: Utc::now(),
                });
                return Ok(Structured { value, exchanges });
            }
            Err(errors) => {
                tracing::debug!(%role, attempt, ?errors, "structured output rejected");
                let next = CompletionRequest {
                    user_prompt: repair_prompt(&original_prompt, &reply.text, &errors),
                    ..current.clone()
                };
                exchanges.push(LlmExchange {
                    role,
                    attempt,
                    request: current,
                    response: reply.text,
                    outcome: Outcome::Failed,
                    errors: errors.clone(),
                    timestamp: Utc::now(),
                });
                last_errors = errors;
                current = next;
            }
        }
    }
    Err(OrchestrationError::InvalidStructuredOutput {
        role,
        errors: last_errors,
        exchanges,
    })
}

fn request(config: &OrchestratorConfig, role: Role, system: &str, user: String) -> CompletionRequest {
    let settings = config.settings(role);
    CompletionRequest {
        role,
        system_prompt: system.to_string(),
        user_prompt: user,
        temperature: settings.temperature,
        max_output: settings.max_output,
    }
}

fn bullet_list(items: &[String]) -> String {
    items
        .iter()
        .map(|i| format!("- {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Runs the planner. With a cue, `prior` must be given and the new plan
/// replaces it; the cue is recorded as the plan's revision note.
pub fn plan_sessions(
    material: &Material,
    cue: Option<&RevisionCue>,
    prior: Option<&SessionPlan>,
    provider: &dyn LlmProvider,
    config: &OrchestratorConfig,
) -> Result<Structured<SessionPlan>, OrchestrationError> {
    let revision = match (cue, prior) {
        (Some(_), None) => return Err(OrchestrationError::CueWithoutPrior),
        (Some(cue), Some(prior)) => format!(
            "\nCurrent plan:\n{}\nRevise the plan according to this direction from the author:\n{}\n",
            plan_to_json(prior).trim_end(),
            cue.as_str()
        ),
        (None, _) => String::new(),
    };
    let user = prompts::PLANNER.render_user(&[
        ("title", &material.title),
        ("material", &material.body),
        ("revision", &revision),
    ]);
    let req = request(config, Role::Planner, prompts::PLANNER.system(), user);
    let mut result = run_structured(provider, req, config.max_repair_attempts, |reply| {
        parse_session_plan_json(prompts::extract_fenced(reply, "json"))
            .map_err(|errs| errs.iter().map(ToString::to_string).collect())
    })?;
    result.value.revision_note = cue.map(|c| c.as_str().to_string());
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedFsm {
    pub fsm: DialogueFsm,
    pub coverage: Vec<KeyPointCoverage>,
}

/// Runs the dialogue designer for one session of an approved plan.
pub fn generate_fsm(
    material: &Material,
    plan: &SessionPlan,
    session: &SessionTopic,
    provider: &dyn LlmProvider,
    config: &OrchestratorConfig,
) -> Result<Structured<GeneratedFsm>, OrchestrationError> {
    if plan.session(&session.id).is_none() {
        return Err(OrchestrationError::UnknownSession(session.id.clone()));
    }
    let user = prompts::DESIGNER.render_user(&[
        ("title", &material.title),
        ("material", &material.body),
        ("plan", plan_to_json(plan).trim_end()),
        ("session_id", session.id.as_str()),
        ("session_title", &session.title),
        ("key_points", &bullet_list(&session.key_points)),
    ]);
    let req = request(config, Role::Designer, prompts::DESIGNER.system(), user);
    let mut last_was_empty = false;
    let outcome = run_structured(provider, req, config.max_repair_attempts, |reply| {
        let block = prompts::extract_fenced(reply, markup::FILE_EXTENSION);
        last_was_empty = !block
            .lines()
            .any(|l| l.trim_start().starts_with("STATE"));
        let doc = markup::parse(block)
            .map_err(|errs| errs.iter().map(ToString::to_string).collect::<Vec<_>>())?;
        match doc.dialogues.len() {
            1 => {}
            0 => return Err(vec!["the document contains no DIALOGUE".to_string()]),
            n => return Err(vec![format!("expected exactly one DIALOGUE, found {n}")]),
        }
        let mut fsm = doc.dialogues.into_iter().next().expect("one dialogue").fsm;
        fsm.session_id = session.id.clone();
        Ok(fsm)
    });
    let result = match outcome {
        Ok(result) => result,
        Err(OrchestrationError::InvalidStructuredOutput { exchanges, .. }) if last_was_empty => {
            return Err(OrchestrationError::EmptyDialogue { exchanges })
        }
        Err(e) => return Err(e),
    };
    debug_assert!(validate_fsm(&result.value).is_clean());
    let coverage = key_point_coverage(&result.value, session, config.coverage_threshold);
    Ok(Structured {
        value: GeneratedFsm {
            fsm: result.value,
            coverage,
        },
        exchanges: result.exchanges,
    })
}

/// A suggested patient option; its target is chosen later by the author.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionDraft {
    pub label: String,
}

/// Parses `1. text` / `2) text` / `- text` lines; surrounding quotes are
/// stripped.
pub fn parse_numbered_list(text: &str) -> Vec<String> {
    text.lines()
        .filter_map(|line| {
            let line = line.trim();
            let rest = if let Some(rest) = line.strip_prefix(['-', '*']) {
                rest
            } else {
                let digits = line.chars().take_while(char::is_ascii_digit).count();
                if digits == 0 {
                    return None;
                }
                line[digits..].strip_prefix(['.', ')'])?
            };
            let item = rest.trim().trim_matches(|c| c == '"' || c == '\u{201c}' || c == '\u{201d}').trim();
            (!item.is_empty()).then(|| item.to_string())
        })
        .collect()
}

/// Asks the patient-response model for up to `count` new option labels for
/// one state. Labels that repeat an existing option (or each other) are
/// dropped. The FSM is not modified.
pub fn suggest_options(
    fsm: &DialogueFsm,
    state_id: &StateId,
    session: &SessionTopic,
    material: &Material,
    count: usize,
    provider: &dyn LlmProvider,
    config: &OrchestratorConfig,
) -> Result<Structured<Vec<OptionDraft>>, OrchestrationError> {
    let state = fsm
        .state(state_id)
        .ok_or_else(|| OrchestrationError::UnknownState(state_id.clone()))?;
    let count = count.max(1);
    let existing: Vec<String> = state.options.iter().map(|o| o.label.clone()).collect();
    let existing_text = if existing.is_empty() {
        "(none)".to_string()
    } else {
        bullet_list(&existing)
    };
    let count_text = count.to_string();
    let user = prompts::SUGGESTER.render_user(&[
        ("session_title", &session.title),
        ("key_points", &bullet_list(&session.key_points)),
        ("material", &material.body),
        ("utterance", &state.utterance),
        ("existing", &existing_text),
        ("count", &count_text),
    ]);
    let req = request(config, Role::Suggester, prompts::SUGGESTER.system(), user);
    let result = run_structured(provider, req, config.max_repair_attempts, |reply| {
        let items = parse_numbered_list(prompts::extract_fenced(reply, "text"));
        if items.is_empty() {
            Err(vec!["expected a numbered list with at least one suggestion".to_string()])
        } else {
            Ok(items)
        }
    })?;

    let mut seen: Vec<String> = existing.iter().map(|l| normalize_label(l)).collect();
    let mut drafts = Vec::new();
    for label in result.value {
        let norm = normalize_label(&label);
        if norm.is_empty() || seen.contains(&norm) {
            continue;
        }
        seen.push(norm);
        drafts.push(OptionDraft { label });
        if drafts.len() == count {
            break;
        }
    }
    if drafts.is_empty() {
        return Err(OrchestrationError::NoNovelOptions {
            exchanges: result.exchanges,
        });
    }
    Ok(Structured {
        value: drafts,
        exchanges: result.exchanges,
    })
}
