//! The `.hdfsm` dialogue markup: a line-oriented, human-readable text format
//! for one or more session FSMs, plus the session plan JSON contract.
//!
//! ```text
//! HEALTHDIAL-FSM v1
//!
//! DIALOGUE <session-id> "<topic title>"
//!   STATE <state-id> [ENTRY]
//!     AGENT "<utterance>"
//!     TAG <key>=<value>
//!     OPTION "<label>" -> <state-id | END>
//! ```
//!
//! `#` starts a comment that runs to the end of the line. Strings are
//! double-quoted and support the escapes `\"`, `\\`, `\n`, `\t` and `\r`.
//! Indentation carries no meaning: a `STATE` block runs until the next
//! `STATE`, `DIALOGUE` or end of input. `CALL` is reserved.

mod lexer;
mod parser;
mod plan_json;
mod writer;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{DefectKind, DialogueFsm};

pub use parser::parse;
pub use plan_json::{parse_session_plan_json, plan_to_json, PlanParseError, PlanParseErrorKind};
pub use writer::{serialize, SerializeError};

pub const FORMAT_NAME: &str = "HEALTHDIAL-FSM";
pub const CURRENT_VERSION: u32 = 1;
pub const SUPPORTED_VERSIONS: &[u32] = &[1];
pub const FILE_EXTENSION: &str = "hdfsm";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub format_name: String,
    pub version: u32,
}

impl Default for Header {
    fn default() -> Self {
        Self {
            format_name: FORMAT_NAME.to_string(),
            version: CURRENT_VERSION,
        }
    }
}

/// One session's FSM together with its topic title.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub title: String,
    pub fsm: DialogueFsm,
}

/// A multi-session export container. Dialogue order follows session
/// ordinals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkupDocument {
    pub header: Header,
    pub dialogues: Vec<Dialogue>,
}

impl MarkupDocument {
    pub fn new(dialogues: Vec<Dialogue>) -> Self {
        Self {
            header: Header::default(),
            dialogues,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParseErrorKind {
    Syntax,
    DuplicateState,
    DanglingTarget,
    MissingEntry,
    BadEscape,
    UnsupportedVersion,
    /// A structural rule other than the ones above (e.g. unreachable state).
    Invalid(DefectKind),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Syntax => f.write_str("syntax"),
            ParseErrorKind::DuplicateState => f.write_str("duplicate-state"),
            ParseErrorKind::DanglingTarget => f.write_str("dangling-target"),
            ParseErrorKind::MissingEntry => f.write_str("missing-entry"),
            ParseErrorKind::BadEscape => f.write_str("bad-escape"),
            ParseErrorKind::UnsupportedVersion => f.write_str("unsupported-version"),
            ParseErrorKind::Invalid(kind) => write!(f, "{kind}"),
        }
    }
}

/// A located parse problem. `line` and `column` are 1-based; columns count
/// characters, and may point one past the last character of a line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {}: {}",
            self.line, self.column, self.kind, self.message
        )
    }
}

impl std::error::Error for ParseError {}

/// Wraps a list of parse errors for `?` use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseErrors(pub Vec<ParseError>);

impl fmt::Display for ParseErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseErrors {}
