use super::{ParseError, ParseErrorKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum TokenKind {
    Word(String),
    Str(String),
    Arrow,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Token {
    pub kind: TokenKind,
    /// 1-based character column of the token's first character.
    pub column: usize,
}

impl Token {
    pub fn word(&self) -> Option<&str> {
        match &self.kind {
            TokenKind::Word(w) => Some(w),
            _ => None,
        }
    }
}

/// Splits one line (without its terminator) into tokens, failing on the
/// first malformed string.
pub(crate) fn tokenize(line: &str, line_no: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = line.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let err = |column: usize, kind, message: String| ParseError {
        line: line_no,
        column,
        kind,
        message,
    };

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '#' {
            break;
        } else if c == '"' {
            let start = i;
            let mut text = String::new();
            i += 1;
            loop {
                let Some(&c) = chars.get(i) else {
                    return Err(err(
                        start + 1,
                        ParseErrorKind::Syntax,
                        "unterminated string".into(),
                    ));
                };
                match c {
                    '"' => {
                        i += 1;
                        break;
                    }
                    '\\' => {
                        let escaped = match chars.get(i + 1) {
                            Some('"') => '"',
                            Some('\\') => '\\',
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some('r') => '\r',
                            Some(other) => {
                                return Err(err(
                                    i + 1,
                                    ParseErrorKind::BadEscape,
                                    format!("unknown escape \\{other}"),
                                ))
                            }
                            None => {
                                return Err(err(
                                    i + 1,
                                    ParseErrorKind::BadEscape,
                                    "backslash at end of line".into(),
                                ))
                            }
                        };
                        text.push(escaped);
                        i += 2;
                    }
                    c => {
                        text.push(c);
                        i += 1;
                    }
                }
            }
            tokens.push(Token {
                kind: TokenKind::Str(text),
                column: start + 1,
            });
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            tokens.push(Token {
                kind: TokenKind::Arrow,
                column: i + 1,
            });
            i += 2;
        } else {
            let start = i;
            while i < chars.len() {
                let c = chars[i];
                if c.is_whitespace() || c == '"' || c == '#' {
                    break;
                }
                if c == '-' && chars.get(i + 1) == Some(&'>') {
                    break;
                }
                i += 1;
            }
            tokens.push(Token {
                kind: TokenKind::Word(chars[start..i].iter().collect()),
                column: start + 1,
            });
        }
    }
    Ok(tokens)
}

/// Escapes a string for output between double quotes.
pub(crate) fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(line: &str) -> Vec<TokenKind> {
        tokenize(line, 1).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn option_line() {
        assert_eq!(
            kinds(r#"  OPTION "Yes \"really\"" -> s2 # trailing"#),
            vec![
                TokenKind::Word("OPTION".into()),
                TokenKind::Str("Yes \"really\"".into()),
                TokenKind::Arrow,
                TokenKind::Word("s2".into()),
            ]
        );
    }

    #[test]
    fn arrow_without_spaces() {
        assert_eq!(
            kinds(r#"OPTION "a"->END"#),
            vec![
                TokenKind::Word("OPTION".into()),
                TokenKind::Str("a".into()),
                TokenKind::Arrow,
                TokenKind::Word("END".into()),
            ]
        );
    }

    #[test]
    fn hash_inside_string_is_text() {
        assert_eq!(kinds(r##"AGENT "#1 tip""##)[1], TokenKind::Str("#1 tip".into()));
    }

    #[test]
    fn columns_are_char_based() {
        let toks = tokenize("AGENT \"é\" x", 3).unwrap();
        assert_eq!(toks[2].column, 11);
    }

    #[test]
    fn bad_escape_located() {
        let e = tokenize(r#"AGENT "a\qb""#, 4).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::BadEscape);
        assert_eq!((e.line, e.column), (4, 9));
    }

    #[test]
    fn unterminated() {
        let e = tokenize(r#"AGENT "abc"#, 1).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Syntax);
        assert_eq!(e.column, 7);
    }

    #[test]
    fn quote_round_trips_through_tokenizer() {
        let text = "tab\there \"q\" back\\slash\nnew\rcr";
        let line = quote(text);
        assert!(!line.contains('\t'));
        assert_eq!(kinds(&line), vec![TokenKind::Str(text.into())]);
    }
}
