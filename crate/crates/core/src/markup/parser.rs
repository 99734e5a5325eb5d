use std::collections::HashSet;

use super::lexer::{tokenize, Token, TokenKind};
use super::{
    Dialogue, Header, MarkupDocument, ParseError, ParseErrorKind, FORMAT_NAME, SUPPORTED_VERSIONS,
};
use crate::ids::{SessionId, StateId};
use crate::model::{
    validate_fsm, DefectKind, DialogueFsm, DialogueState, ResponseOption, Tag, Target,
};

/// Parses a markup document. Parsing is strict: a document is accepted only
/// if every dialogue in it passes FSM validation. All recoverable errors are
/// reported in one pass, ordered by position.
pub fn parse(text: &str) -> Result<MarkupDocument, Vec<ParseError>> {
    let mut parser = Parser::default();
    for (index, raw) in text.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        parser.line(line, index + 1);
    }
    parser.finish()
}

struct OptionDraft {
    label: String,
    label_col: usize,
    target: Target,
    target_col: usize,
    line: usize,
}

struct StateDraft {
    id: StateId,
    line: usize,
    id_col: usize,
    entry_col: Option<usize>,
    agent: Option<(String, usize, usize)>,
    agent_failed: bool,
    tags: Vec<Tag>,
    options: Vec<OptionDraft>,
}

struct DialogueDraft {
    session_id: SessionId,
    title: String,
    line: usize,
    states: Vec<StateDraft>,
    state_ids: HashSet<StateId>,
}

#[derive(Default)]
struct Parser {
    errors: Vec<ParseError>,
    header: Option<Header>,
    header_checked: bool,
    dialogues: Vec<Dialogue>,
    sessions: HashSet<SessionId>,
    current: Option<DialogueDraft>,
    skipping_dialogue: bool,
    skipping_state: bool,
}

impl Parser {
    fn error(&mut self, line: usize, column: usize, kind: ParseErrorKind, message: impl Into<String>) {
        self.errors.push(ParseError {
            line,
            column,
            kind,
            message: message.into(),
        });
    }

    fn line(&mut self, line: &str, no: usize) {
        let tokens = match tokenize(line, no) {
            Ok(tokens) => tokens,
            Err(e) => {
                if line.trim_start().starts_with("AGENT") {
                    if let Some(state) = self.open_state() {
                        state.agent_failed = true;
                    }
                }
                self.errors.push(e);
                return;
            }
        };
        let Some(first) = tokens.first() else { return };

        let keyword = match first.word() {
            Some(w) => w.to_string(),
            None => {
                self.error(no, first.column, ParseErrorKind::Syntax, "expected a keyword");
                return;
            }
        };

        if !self.header_checked {
            self.header_checked = true;
            if keyword == FORMAT_NAME {
                self.header_line(&tokens, no);
                return;
            }
            self.error(
                no,
                first.column,
                ParseErrorKind::Syntax,
                format!("document must start with `{FORMAT_NAME} v1`"),
            );
        }

        match keyword.as_str() {
            FORMAT_NAME => self.error(no, first.column, ParseErrorKind::Syntax, "duplicate header"),
            "DIALOGUE" => self.dialogue_line(&tokens, no),
            "STATE" => self.state_line(&tokens, no),
            "AGENT" => self.agent_line(&tokens, no),
            "OPTION" => self.option_line(&tokens, no),
            "TAG" => self.tag_line(line, first.column, no),
            "CALL" => self.error(
                no,
                first.column,
                ParseErrorKind::Syntax,
                "CALL is reserved; sub-dialogue calls are not supported in v1",
            ),
            "ENTRY" | "END" => self.error(
                no,
                first.column,
                ParseErrorKind::Syntax,
                format!("`{keyword}` cannot start a line"),
            ),
            other => self.error(
                no,
                first.column,
                ParseErrorKind::Syntax,
                format!("unknown keyword `{other}`"),
            ),
        }
    }

    fn header_line(&mut self, tokens: &[Token], no: usize) {
        let Some(version_tok) = tokens.get(1) else {
            self.error(no, tokens[0].column, ParseErrorKind::Syntax, "header is missing its version");
            return;
        };
        if let Some(extra) = tokens.get(2) {
            self.error(no, extra.column, ParseErrorKind::Syntax, "unexpected token after version");
        }
        let parsed = version_tok
            .word()
            .and_then(|w| w.strip_prefix('v'))
            .and_then(|n| n.parse::<u32>().ok());
        match parsed {
            Some(v) if SUPPORTED_VERSIONS.contains(&v) => {
                self.header = Some(Header {
                    format_name: FORMAT_NAME.to_string(),
                    version: v,
                });
            }
            Some(v) => self.error(
                no,
                version_tok.column,
                ParseErrorKind::UnsupportedVersion,
                format!("version v{v} is not supported"),
            ),
            None => self.error(
                no,
                version_tok.column,
                ParseErrorKind::Syntax,
                "version must look like `v1`",
            ),
        }
    }

    fn expect_end(&mut self, tokens: &[Token], from: usize, no: usize) -> bool {
        if let Some(extra) = tokens.get(from) {
            self.error(no, extra.column, ParseErrorKind::Syntax, "unexpected trailing token");
            false
        } else {
            true
        }
    }

    fn dialogue_line(&mut self, tokens: &[Token], no: usize) {
        if let Some(done) = self.current.take() {
            self.finish_dialogue(done);
        }
        self.skipping_dialogue = true;
        self.skipping_state = false;

        let id = match tokens.get(1).and_then(|t| t.word().map(|w| (w, t.column))) {
            Some((w, col)) => match SessionId::new(w) {
                Ok(id) => (id, col),
                Err(e) => {
                    self.error(no, col, ParseErrorKind::Syntax, e.to_string());
                    return;
                }
            },
            None => {
                let col = tokens.get(1).map_or(line_end(tokens), |t| t.column);
                self.error(no, col, ParseErrorKind::Syntax, "DIALOGUE needs a session id");
                return;
            }
        };
        let title = match tokens.get(2).map(|t| &t.kind) {
            Some(TokenKind::Str(s)) => s.clone(),
            _ => {
                let col = tokens.get(2).map_or(line_end(tokens), |t| t.column);
                self.error(no, col, ParseErrorKind::Syntax, "DIALOGUE needs a quoted topic title");
                return;
            }
        };
        if !self.expect_end(tokens, 3, no) {
            return;
        }
        if !self.sessions.insert(id.0.clone()) {
            self.error(
                no,
                id.1,
                ParseErrorKind::Syntax,
                format!("dialogue {} is declared twice", id.0),
            );
            return;
        }
        self.skipping_dialogue = false;
        self.current = Some(DialogueDraft {
            session_id: id.0,
            title,
            line: no,
            states: Vec::new(),
            state_ids: HashSet::new(),
        });
    }

    fn state_line(&mut self, tokens: &[Token], no: usize) {
        if self.skipping_dialogue {
            return;
        }
        if self.current.is_none() {
            self.error(no, tokens[0].column, ParseErrorKind::Syntax, "STATE outside of a DIALOGUE");
            return;
        }
        self.skipping_state = true;
        let (id, id_col) = match tokens.get(1).and_then(|t| t.word().map(|w| (w, t.column))) {
            Some((w, col)) => match StateId::new(w) {
                Ok(id) => (id, col),
                Err(e) => {
                    self.error(no, col, ParseErrorKind::Syntax, e.to_string());
                    return;
                }
            },
            None => {
                let col = tokens.get(1).map_or(line_end(tokens), |t| t.column);
                self.error(no, col, ParseErrorKind::Syntax, "STATE needs a state id");
                return;
            }
        };
        let mut entry_col = None;
        if let Some(tok) = tokens.get(2) {
            if tok.word() == Some("ENTRY") {
                entry_col = Some(tok.column);
            } else {
                self.error(no, tok.column, ParseErrorKind::Syntax, "expected ENTRY or end of line");
                return;
            }
        }
        if !self.expect_end(tokens, 3, no) {
            return;
        }
        let dialogue = self.current.as_mut().expect("checked above");
        if !dialogue.state_ids.insert(id.clone()) {
            self.error(
                no,
                id_col,
                ParseErrorKind::DuplicateState,
                format!("state {id} is declared twice in this dialogue"),
            );
            return;
        }
        dialogue.states.push(StateDraft {
            id,
            line: no,
            id_col,
            entry_col,
            agent: None,
            agent_failed: false,
            tags: Vec::new(),
            options: Vec::new(),
        });
        self.skipping_state = false;
    }

    fn open_state(&mut self) -> Option<&mut StateDraft> {
        if self.skipping_dialogue || self.skipping_state {
            return None;
        }
        self.current.as_mut().and_then(|d| d.states.last_mut())
    }

    /// Checks that a state-level line has a state to attach to. Returns
    /// `false` (silently) while skipping a broken block.
    fn state_context(&mut self, keyword_tok: &Token, keyword: &str, no: usize) -> bool {
        if self.skipping_dialogue || self.skipping_state {
            return false;
        }
        match &self.current {
            None => {
                self.error(no, keyword_tok.column, ParseErrorKind::Syntax, format!("{keyword} outside of a STATE"));
                false
            }
            Some(d) if d.states.is_empty() => {
                self.error(no, keyword_tok.column, ParseErrorKind::Syntax, format!("{keyword} before any STATE"));
                false
            }
            Some(_) => true,
        }
    }

    fn agent_line(&mut self, tokens: &[Token], no: usize) {
        if !self.state_context(&tokens[0], "AGENT", no) {
            return;
        }
        let (text, col) = match tokens.get(1) {
            Some(Token { kind: TokenKind::Str(s), column }) => (s.clone(), *column),
            other => {
                let col = other.map_or(line_end(tokens), |t| t.column);
                self.error(no, col, ParseErrorKind::Syntax, "AGENT needs a quoted utterance");
                if let Some(state) = self.open_state() {
                    state.agent_failed = true;
                }
                return;
            }
        };
        if !self.expect_end(tokens, 2, no) {
            return;
        }
        let state = self.open_state().expect("checked by state_context");
        if state.agent.is_some() {
            self.error(no, tokens[0].column, ParseErrorKind::Syntax, "state already has an AGENT line");
            return;
        }
        state.agent = Some((text, no, col));
    }

    fn option_line(&mut self, tokens: &[Token], no: usize) {
        if !self.state_context(&tokens[0], "OPTION", no) {
            return;
        }
        let (label, label_col) = match tokens.get(1) {
            Some(Token { kind: TokenKind::Str(s), column }) => (s.clone(), *column),
            other => {
                let col = other.map_or(line_end(tokens), |t| t.column);
                self.error(no, col, ParseErrorKind::Syntax, "OPTION needs a quoted label");
                return;
            }
        };
        match tokens.get(2) {
            Some(Token { kind: TokenKind::Arrow, .. }) => {}
            other => {
                let col = other.map_or(line_end(tokens), |t| t.column);
                self.error(no, col, ParseErrorKind::Syntax, "expected `->` after the option label");
                return;
            }
        }
        let (target, target_col) = match tokens.get(3).and_then(|t| t.word().map(|w| (w, t.column))) {
            Some(("END", col)) => (Target::End, col),
            Some((w, col)) => match StateId::new(w) {
                Ok(id) => (Target::State(id), col),
                Err(e) => {
                    self.error(no, col, ParseErrorKind::Syntax, e.to_string());
                    return;
                }
            },
            None => {
                let col = tokens.get(3).map_or(line_end(tokens), |t| t.column);
                self.error(no, col, ParseErrorKind::Syntax, "expected a state id or END after `->`");
                return;
            }
        };
        if !self.expect_end(tokens, 4, no) {
            return;
        }
        let state = self.open_state().expect("checked by state_context");
        state.options.push(OptionDraft {
            label,
            label_col,
            target,
            target_col,
            line: no,
        });
    }

    fn tag_line(&mut self, line: &str, keyword_col: usize, no: usize) {
        let keyword_tok = Token {
            kind: TokenKind::Word("TAG".into()),
            column: keyword_col,
        };
        if !self.state_context(&keyword_tok, "TAG", no) {
            return;
        }
        let chars: Vec<char> = line.chars().collect();
        let after: String = chars[keyword_col - 1 + 3..].iter().collect();
        let body = after.split('#').next().unwrap_or("");
        let body_col = keyword_col + 3 + body.chars().take_while(|c| c.is_whitespace()).count();
        let body = body.trim();
        let Some((key, value)) = body.split_once('=') else {
            self.error(no, body_col.min(chars.len() + 1), ParseErrorKind::Syntax, "TAG must look like key=value");
            return;
        };
        if !is_tag_key(key) {
            self.error(no, body_col, ParseErrorKind::Syntax, format!("invalid TAG key {key:?}"));
            return;
        }
        let state = self.open_state().expect("checked by state_context");
        state.tags.push(Tag {
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }

    fn finish_dialogue(&mut self, draft: DialogueDraft) {
        if draft.states.is_empty() {
            self.error(
                draft.line,
                1,
                ParseErrorKind::MissingEntry,
                format!("dialogue {} has no states", draft.session_id),
            );
            return;
        }
        let states = draft.states.iter().map(|s| DialogueState {
            id: s.id.clone(),
            utterance: s.agent.as_ref().map(|a| a.0.clone()).unwrap_or_default(),
            options: s
                .options
                .iter()
                .map(|o| ResponseOption::new(o.label.clone(), o.target.clone()))
                .collect(),
            is_entry: s.entry_col.is_some(),
            tags: s.tags.clone(),
        });
        let fsm = DialogueFsm::from_states(draft.session_id.clone(), states)
            .expect("duplicate states rejected while parsing");

        let report = validate_fsm(&fsm);
        let mut clean = true;
        for defect in &report.defects {
            let state = defect
                .location
                .state
                .as_ref()
                .and_then(|id| draft.states.iter().find(|s| &s.id == id));
            let option = state.zip(defect.location.option).and_then(|(s, i)| s.options.get(i));
            let (line, column, kind, message) = match defect.kind {
                DefectKind::NoEntry => (
                    draft.line,
                    1,
                    ParseErrorKind::MissingEntry,
                    format!("dialogue {} has no ENTRY state", draft.session_id),
                ),
                DefectKind::MultipleEntry => {
                    let s = state.expect("located defect");
                    (
                        s.line,
                        s.entry_col.unwrap_or(s.id_col),
                        ParseErrorKind::Invalid(DefectKind::MultipleEntry),
                        defect.message.clone(),
                    )
                }
                DefectKind::DanglingTarget => {
                    let o = option.expect("located defect");
                    (o.line, o.target_col, ParseErrorKind::DanglingTarget, defect.message.clone())
                }
                DefectKind::DuplicateOptionLabel | DefectKind::EmptyOptionLabel => {
                    let o = option.expect("located defect");
                    (o.line, o.label_col, ParseErrorKind::Invalid(defect.kind), defect.message.clone())
                }
                DefectKind::UnreachableState => {
                    let s = state.expect("located defect");
                    (s.line, s.id_col, ParseErrorKind::Invalid(defect.kind), defect.message.clone())
                }
                DefectKind::EmptyUtterance => {
                    let s = state.expect("located defect");
                    if s.agent_failed {
                        clean = false;
                        continue;
                    }
                    match &s.agent {
                        Some((_, line, col)) => (
                            *line,
                            *col,
                            ParseErrorKind::Invalid(defect.kind),
                            defect.message.clone(),
                        ),
                        None => (
                            s.line,
                            s.id_col,
                            ParseErrorKind::Invalid(defect.kind),
                            "state has no AGENT line".to_string(),
                        ),
                    }
                }
            };
            clean = false;
            self.error(line, column, kind, message);
        }
        if clean {
            self.dialogues.push(Dialogue {
                title: draft.title,
                fsm,
            });
        }
    }

    fn finish(mut self) -> Result<MarkupDocument, Vec<ParseError>> {
        if let Some(done) = self.current.take() {
            self.finish_dialogue(done);
        }
        if !self.header_checked {
            self.error(
                1,
                1,
                ParseErrorKind::Syntax,
                format!("document must start with `{FORMAT_NAME} v1`"),
            );
        }
        if self.errors.is_empty() {
            Ok(MarkupDocument {
                header: self.header.expect("header recorded when no errors"),
                dialogues: self.dialogues,
            })
        } else {
            self.errors.sort_by_key(|e| (e.line, e.column));
            Err(self.errors)
        }
    }
}

fn is_tag_key(key: &str) -> bool {
    !key.is_empty()
        && key
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | ':'))
}

/// Column just past the last token, for "missing token" errors.
fn line_end(tokens: &[Token]) -> usize {
    tokens.last().map_or(1, |t| {
        t.column
            + match &t.kind {
                TokenKind::Word(w) => w.chars().count(),
                TokenKind::Arrow => 2,
                // the quoted form may be longer; clamp to the opening quote
                TokenKind::Str(_) => 1,
            }
    })
}
