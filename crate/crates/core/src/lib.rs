//! Dialogue authoring engine for health-education virtual agents.
//!
//! Source material is planned into sessions by a planner model, each session
//! is drafted as a finite-state dialogue by a designer model, and authors
//! refine the result through an undoable command log before exporting a
//! `.hdfsm` document that drives the agent deterministically.

pub mod ids;
pub mod markup;
pub mod model;
pub mod config;
pub mod editing;
pub mod engine;
pub mod orchestration;
pub mod project;
pub mod runtime;
pub mod store;

pub use ids::{MaterialId, PlayId, ProjectId, SessionId, StateId};
pub use markup::{parse, serialize, Dialogue, MarkupDocument, ParseError, ParseErrorKind};
pub use editing::{EditCommand, EditError, EditHistory, EditKind};
pub use model::{
    fsm_stats, reachable_states, validate_fsm, Defect, DefectKind, DialogueFsm, DialogueState,
    FsmStats, Material, MaterialSource, ResponseOption, SessionPlan, SessionTopic, Target,
    ValidationReport,
};
pub use project::{ContentHash, Project, ProjectContent};
pub use engine::{Engine, EngineError, ErrorClass};
