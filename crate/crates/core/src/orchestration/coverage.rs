//! Key-point coverage: does some agent utterance voice each planned point?

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ids::StateId;
use crate::model::{DialogueFsm, SessionTopic};

pub const DEFAULT_COVERAGE_THRESHOLD: f64 = 0.6;

const STOP_WORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be",
    "because", "been", "before", "being", "but", "by", "can", "could", "did", "do", "does",
    "doing", "for", "from", "had", "has", "have", "having", "he", "her", "here", "hers", "him",
    "his", "how", "i", "if", "in", "into", "is", "it", "its", "just", "me", "more", "most", "my",
    "no", "nor", "not", "of", "on", "once", "only", "or", "other", "our", "ours", "out", "over",
    "own", "same", "she", "should", "so", "some", "such", "than", "that", "the", "their",
    "theirs", "them", "then", "there", "these", "they", "this", "those", "through", "to", "too",
    "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
    "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours",
];

fn is_stop_word(word: &str) -> bool {
    STOP_WORDS.binary_search(&word).is_ok()
}

/// Lowercased alphanumeric words; apostrophes are dropped so "don't" is
/// one word.
pub fn words(text: &str) -> Vec<String> {
    text.chars()
        .filter(|c| !matches!(c, '\'' | '\u{2019}'))
        .collect::<String>()
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

/// Distinct non-stop-words; falls back to all words when a text is made of
/// stop words only.
pub fn content_words(text: &str) -> BTreeSet<String> {
    let all: BTreeSet<String> = words(text).into_iter().collect();
    let content: BTreeSet<String> = all.iter().filter(|w| !is_stop_word(w)).cloned().collect();
    if content.is_empty() {
        all
    } else {
        content
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyPointCoverage {
    pub key_point: String,
    pub covered: bool,
    /// Best overlap ratio over all states, in `[0, 1]`.
    pub best_overlap: f64,
    /// States whose utterance meets the threshold, in FSM order.
    pub witnesses: Vec<StateId>,
}

/// A key point is covered when at least `threshold` of its content words
/// occur in a single agent utterance.
pub fn key_point_coverage(
    fsm: &DialogueFsm,
    session: &SessionTopic,
    threshold: f64,
) -> Vec<KeyPointCoverage> {
    let utterances: Vec<(&StateId, BTreeSet<String>)> = fsm
        .states()
        .map(|s| (&s.id, words(&s.utterance).into_iter().collect()))
        .collect();

    session
        .key_points
        .iter()
        .map(|kp| {
            let needed = content_words(kp);
            let mut best = 0.0_f64;
            let mut witnesses = Vec::new();
            if !needed.is_empty() {
                for (id, have) in &utterances {
                    let hits = needed.iter().filter(|w| have.contains(*w)).count();
                    let ratio = hits as f64 / needed.len() as f64;
                    best = best.max(ratio);
                    if ratio + 1e-12 >= threshold {
                        witnesses.push((*id).clone());
                    }
                }
            }
            KeyPointCoverage {
                key_point: kp.clone(),
                covered: !witnesses.is_empty(),
                best_overlap: best,
                witnesses,
            }
        })
        .collect()
}
