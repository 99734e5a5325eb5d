//! Versioned prompt templates and fenced-block extraction.

use super::Role;

const SEPARATOR: &str = "=== USER ===\n";

#[derive(Debug, Clone, Copy)]
pub struct PromptTemplate {
    pub role: Role,
    pub version: u32,
    source: &'static str,
}

pub const PLANNER: PromptTemplate = PromptTemplate {
    role: Role::Planner,
    version: 1,
    source: include_str!("../../prompts/planner.v1.txt"),
};

pub const DESIGNER: PromptTemplate = PromptTemplate {
    role: Role::Designer,
    version: 1,
    source: include_str!("../../prompts/designer.v1.txt"),
};

pub const SUGGESTER: PromptTemplate = PromptTemplate {
    role: Role::Suggester,
    version: 1,
    source: include_str!("../../prompts/suggester.v1.txt"),
};

impl PromptTemplate {
    pub fn system(&self) -> &'static str {
        self.source
            .split_once(SEPARATOR)
            .map_or(self.source, |(system, _)| system)
            .trim_end()
    }

    fn user_template(&self) -> &'static str {
        self.source.split_once(SEPARATOR).map_or("", |(_, user)| user)
    }

    /// Fills `{{name}}` placeholders of the user part in a single pass, so
    /// substituted text is never re-expanded. Unknown placeholders are left
    /// as they are.
    pub fn render_user(&self, vars: &[(&str, &str)]) -> String {
        let template = self.user_template();
        let mut out = String::with_capacity(template.len());
        let mut rest = template;
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            match after.find("}}") {
                Some(end) => {
                    let name = &after[..end];
                    match vars.iter().find(|(k, _)| *k == name) {
                        Some((_, value)) => out.push_str(value),
                        None => {
                            out.push_str("{{");
                            out.push_str(name);
                            out.push_str("}}");
                        }
                    }
                    rest = &after[end + 2..];
                }
                None => {
                    out.push_str(&rest[start..]);
                    rest = "";
                }
            }
        }
        out.push_str(rest);
        out.trim_end().to_string()
    }
}

/// Returns the body of the first fenced block tagged `lang`, else the first
/// fenced block of any kind, else the whole reply trimmed.
pub fn extract_fenced<'a>(reply: &'a str, lang: &str) -> &'a str {
    let blocks = fenced_blocks(reply);
    blocks
        .iter()
        .find(|(tag, _)| tag.eq_ignore_ascii_case(lang))
        .or_else(|| blocks.first())
        .map_or(reply.trim(), |(_, body)| body)
}

fn fenced_blocks(text: &str) -> Vec<(&str, &str)> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after_ticks = &rest[open + 3..];
        let Some(line_end) = after_ticks.find('\n') else { break };
        let tag = after_ticks[..line_end].trim();
        let body_start = &after_ticks[line_end + 1..];
        let Some(close) = find_closing_fence(body_start) else { break };
        out.push((tag, &body_start[..close]));
        rest = &body_start[close + 3..];
    }
    out
}

/// Closing fence: ``` at the start of a line.
fn find_closing_fence(body: &str) -> Option<usize> {
    let mut offset = 0;
    for line in body.split_inclusive('\n') {
        if line.trim_start().starts_with("```") {
            return Some(offset + (line.len() - line.trim_start().len()));
        }
        offset += line.len();
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_have_both_parts() {
        for t in [PLANNER, DESIGNER, SUGGESTER] {
            assert!(!t.system().is_empty());
            assert!(!t.system().contains(SEPARATOR.trim()));
            assert!(t.user_template().contains("{{"));
        }
    }

    #[test]
    fn single_pass_render() {
        let out = PLANNER.render_user(&[
            ("title", "T"),
            ("material", "text with {{title}} inside"),
            ("revision", ""),
        ]);
        assert!(out.contains("text with {{title}} inside"));
        assert!(out.contains("Material title: T"));
    }

    #[test]
    fn extract_prefers_tagged_block() {
        let reply = "Sure!\n```text\nnope\n```\n```json\n{\"a\":1}\n```\nDone.";
        assert_eq!(extract_fenced(reply, "json"), "{\"a\":1}\n");
        assert_eq!(extract_fenced(reply, "hdfsm"), "nope\n");
        assert_eq!(extract_fenced("  {\"a\":1} ", "json"), "{\"a\":1}");
    }

    #[test]
    fn unterminated_fence_falls_back_to_whole_text() {
        assert_eq!(extract_fenced("```json\n{}", "json"), "```json\n{}");
    }
}
