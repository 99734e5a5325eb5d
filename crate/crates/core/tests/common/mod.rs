//! Generators and independent reference implementations used by the
//! property tests and the acceptance suite. Nothing here calls the code it
//! is used to check, apart from plain data constructors.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use healthdial_core::markup::{Dialogue, MarkupDocument};
use healthdial_core::model::{DefectKind, DialogueFsm, DialogueState, SessionTopic, Tag, Target};
use healthdial_core::{SessionId, StateId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sid(s: &str) -> SessionId {
    SessionId::new(s).unwrap()
}

pub fn st(s: &str) -> StateId {
    StateId::new(s).unwrap()
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

const WORDS: &[&str] = &[
    "colon", "screening", "test", "doctor", "polyp", "cancer", "risk", "kit", "stool", "family",
    "history", "age", "fifty", "early", "detect", "prevent", "diet", "fiber", "exercise", "visit",
];

const ODD_PIECES: &[&str] = &[
    "\"", "\\", "\n", "\t", "\r", "#", "->", "é", "🙂", "  ", "END", "STATE", "{{x}}", "'",
];

/// Non-blank text that mixes ordinary words with characters the markup has
/// to escape or must not misread.
pub fn text(rng: &mut impl Rng) -> String {
    let n = rng.random_range(1..6);
    let mut out = String::new();
    for i in 0..n {
        if i > 0 {
            out.push(' ');
        }
        if rng.random_bool(0.2) {
            out.push_str(ODD_PIECES[rng.random_range(0..ODD_PIECES.len())]);
        }
        out.push_str(WORDS[rng.random_range(0..WORDS.len())]);
    }
    out
}

pub fn plain_sentence(rng: &mut impl Rng, words: usize) -> String {
    (0..words)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

fn tag(rng: &mut impl Rng) -> Tag {
    let keys = ["gesture", "gaze", "beat.emphasis", "face:smile", "pose_1"];
    Tag {
        key: keys[rng.random_range(0..keys.len())].to_string(),
        value: {
            let n = rng.random_range(1..3);
            plain_sentence(rng, n)
        },
    }
}

/// A valid FSM: a random spanning tree from the entry guarantees
/// reachability, then extra options add cycles, shortcuts and END exits.
/// State order is shuffled so the entry is not always first.
pub fn valid_fsm(rng: &mut impl Rng, session: &SessionId, max_states: usize) -> DialogueFsm {
    let n = rng.random_range(1..=max_states.max(1));
    let ids: Vec<StateId> = (0..n).map(|i| st(&format!("q{i}"))).collect();
    let mut options: Vec<Vec<Target>> = vec![Vec::new(); n];
    for i in 1..n {
        let parent = rng.random_range(0..i);
        options[parent].push(Target::State(ids[i].clone()));
    }
    let extra = rng.random_range(0..=n);
    for _ in 0..extra {
        let from = rng.random_range(0..n);
        let to = if rng.random_bool(0.3) {
            Target::End
        } else {
            Target::State(ids[rng.random_range(0..n)].clone())
        };
        options[from].push(to);
    }
    let mut states: Vec<DialogueState> = Vec::with_capacity(n);
    for (i, targets) in options.into_iter().enumerate() {
        let mut state = DialogueState::new(ids[i].clone(), text(rng));
        state.is_entry = i == 0;
        let mut targets = targets;
        targets.shuffle(rng);
        for (k, target) in targets.into_iter().enumerate() {
            // The trailing index keeps labels distinct after normalization.
            state = state.with_option(format!("{} {k}", text(rng)), target);
        }
        if rng.random_bool(0.2) {
            state.tags.push(tag(rng));
        }
        states.push(state);
    }
    states.shuffle(rng);
    DialogueFsm::from_states(session.clone(), states).unwrap()
}

pub fn valid_document(rng: &mut impl Rng) -> MarkupDocument {
    let count = rng.random_range(1..=4);
    let dialogues = (0..count)
        .map(|i| Dialogue {
            title: text(rng),
            fsm: valid_fsm(rng, &sid(&format!("session-{i}")), 8),
        })
        .collect();
    MarkupDocument::new(dialogues)
}

// ---------------------------------------------------------------------------
// Validation oracle
// ---------------------------------------------------------------------------

/// (kind, state, option) triples.
pub type DefectKey = (DefectKind, Option<String>, Option<usize>);

fn fold(label: &str) -> String {
    label.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Brute-force defect listing. Reachability uses a Warshall transitive
/// closure over an adjacency matrix rather than a traversal.
pub fn oracle_defects(fsm: &DialogueFsm) -> BTreeMap<DefectKey, usize> {
    let states: Vec<&DialogueState> = fsm.states().collect();
    let index: HashMap<&str, usize> = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    let mut out: BTreeMap<DefectKey, usize> = BTreeMap::new();
    let mut add = |k: DefectKey| *out.entry(k).or_default() += 1;

    let entries: Vec<usize> = (0..states.len()).filter(|&i| states[i].is_entry).collect();
    if entries.is_empty() {
        add((DefectKind::NoEntry, None, None));
    }
    for &e in entries.iter().skip(1) {
        add((DefectKind::MultipleEntry, Some(states[e].id.to_string()), None));
    }

    let n = states.len();
    let mut reach = vec![vec![false; n]; n];
    for (i, s) in states.iter().enumerate() {
        reach[i][i] = true;
        let mut labels: Vec<String> = Vec::new();
        for (k, o) in s.options.iter().enumerate() {
            let f = fold(&o.label);
            if f.is_empty() {
                add((DefectKind::EmptyOptionLabel, Some(s.id.to_string()), Some(k)));
            } else if labels.contains(&f) {
                add((DefectKind::DuplicateOptionLabel, Some(s.id.to_string()), Some(k)));
            }
            if !f.is_empty() {
                labels.push(f);
            }
            if let Target::State(t) = &o.target {
                match index.get(t.as_str()) {
                    Some(&j) => reach[i][j] = true,
                    None => add((DefectKind::DanglingTarget, Some(s.id.to_string()), Some(k))),
                }
            }
        }
        if s.utterance.trim().is_empty() {
            add((DefectKind::EmptyUtterance, Some(s.id.to_string()), None));
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    if !entries.is_empty() {
        for j in 0..n {
            if !entries.iter().any(|&e| reach[e][j]) {
                add((DefectKind::UnreachableState, Some(states[j].id.to_string()), None));
            }
        }
    }
    out
}

/// Injects one defect of `kind` into a valid FSM. Returns `None` when the
/// FSM is too small for that kind.
pub fn inject(rng: &mut impl Rng, fsm: &DialogueFsm, kind: DefectKind) -> Option<DialogueFsm> {
    let mut states: Vec<DialogueState> = fsm.states().cloned().collect();
    let n = states.len();
    let pick = |rng: &mut dyn rand::RngCore, n: usize| (rng.next_u32() as usize) % n;
    match kind {
        DefectKind::NoEntry => {
            for s in &mut states {
                s.is_entry = false;
            }
        }
        DefectKind::MultipleEntry => {
            let candidates: Vec<usize> = (0..n).filter(|&i| !states[i].is_entry).collect();
            if candidates.is_empty() {
                return None;
            }
            states[candidates[pick(rng, candidates.len())]].is_entry = true;
        }
        DefectKind::DanglingTarget => {
            let with_opts: Vec<usize> = (0..n).filter(|&i| !states[i].options.is_empty()).collect();
            if with_opts.is_empty() {
                let i = pick(rng, n);
                states[i] = states[i].clone().with_option("dangling 0x", st("missing-state"));
            } else {
                let i = with_opts[pick(rng, with_opts.len())];
                let k = pick(rng, states[i].options.len());
                states[i].options[k].target = Target::State(st("missing-state"));
            }
        }
        DefectKind::UnreachableState => {
            let mut orphan = DialogueState::new(st("orphan"), "Nobody gets here.");
            if rng.random_bool(0.5) {
                orphan = orphan.with_option("back", states[0].id.clone());
            }
            let at = pick(rng, n + 1);
            states.insert(at, orphan);
        }
        DefectKind::DuplicateOptionLabel => {
            let with_opts: Vec<usize> = (0..n).filter(|&i| !states[i].options.is_empty()).collect();
            if with_opts.is_empty() {
                return None;
            }
            let i = with_opts[pick(rng, with_opts.len())];
            let k = pick(rng, states[i].options.len());
            let copy = format!("  {}  ", states[i].options[k].label.to_uppercase());
            states[i] = states[i].clone().with_option(copy, Target::End);
        }
        DefectKind::EmptyUtterance => {
            let i = pick(rng, n);
            states[i].utterance = [" ", "", "\t", " \n "][pick(rng, 4)].to_string();
        }
        DefectKind::EmptyOptionLabel => {
            let i = pick(rng, n);
            states[i] = states[i].clone().with_option("   ", Target::End);
        }
    }
    Some(DialogueFsm::from_states(fsm.session_id.clone(), states).unwrap())
}

// ---------------------------------------------------------------------------
// Path enumeration oracle
// ---------------------------------------------------------------------------

/// (choice indices, agent utterances seen, truncated).
pub type OraclePath = (Vec<usize>, Vec<String>, bool);

/// Recursive enumeration straight off the state table.
pub fn oracle_paths(fsm: &DialogueFsm, max_steps: usize) -> Vec<OraclePath> {
    let by_id: HashMap<String, &DialogueState> =
        fsm.states().map(|s| (s.id.to_string(), s)).collect();
    let entry = fsm.states().find(|s| s.is_entry).expect("entry");
    let mut out = Vec::new();
    fn go(
        by_id: &HashMap<String, &DialogueState>,
        at: &DialogueState,
        choices: &mut Vec<usize>,
        said: &mut Vec<String>,
        max_steps: usize,
        out: &mut Vec<OraclePath>,
    ) {
        said.push(at.utterance.clone());
        if at.options.is_empty() {
            out.push((choices.clone(), said.clone(), false));
        } else if choices.len() == max_steps {
            out.push((choices.clone(), said.clone(), true));
        } else {
            for (i, o) in at.options.iter().enumerate() {
                choices.push(i);
                match &o.target {
                    Target::End => out.push((choices.clone(), said.clone(), false)),
                    Target::State(t) => go(by_id, by_id[t.as_str()], choices, said, max_steps, out),
                }
                choices.pop();
            }
        }
        said.pop();
    }
    go(&by_id, entry, &mut Vec::new(), &mut Vec::new(), max_steps, &mut out);
    out
}

// ---------------------------------------------------------------------------
// Revision-count oracle
// ---------------------------------------------------------------------------

/// Quadratic scan: for every pair j < k with equal hashes (index 0 being the
/// starting hash), commands j+1..=k are reverted. Counts the remaining
/// commands whose kind is a content change.
pub fn oracle_revisions(base: &str, steps: &[(bool, String)]) -> usize {
    let mut trail = vec![base.to_string()];
    trail.extend(steps.iter().map(|(_, h)| h.clone()));
    let mut reverted = vec![false; steps.len() + 1];
    for k in 1..trail.len() {
        for j in 0..k {
            if trail[j] == trail[k] {
                for slot in reverted.iter_mut().take(k + 1).skip(j + 1) {
                    *slot = true;
                }
            }
        }
    }
    steps
        .iter()
        .enumerate()
        .filter(|(i, (counted, _))| *counted && !reverted[i + 1])
        .count()
}

/// Kinds that count as content revisions, restated independently.
pub fn counts_as_revision(kind: &str) -> bool {
    matches!(
        kind,
        "edit-utterance"
            | "add-state"
            | "delete-state"
            | "add-option"
            | "edit-option-label"
            | "delete-option"
            | "add-topic"
            | "delete-topic"
            | "rename-topic"
            | "set-key-points"
            | "accept-suggestion"
    )
}

// ---------------------------------------------------------------------------
// Undo/redo reference model
// ---------------------------------------------------------------------------

/// Two stacks of content hashes.
#[derive(Debug, Clone)]
pub struct StackModel {
    pub current: String,
    pub undo: Vec<String>,
    pub redo: Vec<String>,
}

impl StackModel {
    pub fn new(start: String) -> Self {
        Self {
            current: start,
            undo: Vec::new(),
            redo: Vec::new(),
        }
    }

    pub fn apply(&mut self, new_hash: String) {
        self.undo.push(std::mem::replace(&mut self.current, new_hash));
        self.redo.clear();
    }

    pub fn undo(&mut self) -> bool {
        match self.undo.pop() {
            Some(prev) => {
                self.redo.push(std::mem::replace(&mut self.current, prev));
                true
            }
            None => false,
        }
    }

    pub fn redo(&mut self) -> bool {
        match self.redo.pop() {
            Some(next) => {
                self.undo.push(std::mem::replace(&mut self.current, next));
                true
            }
            None => false,
        }
    }
}

// ---------------------------------------------------------------------------
// Coverage oracle
// ---------------------------------------------------------------------------

const ORACLE_STOP: &[&str] = &[
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

fn oracle_tokens(text: &str) -> HashSet<String> {
    let mut out = HashSet::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c == '\'' || c == '\u{2019}' {
            continue;
        }
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.insert(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.insert(cur);
    }
    out
}

/// Covered iff some utterance contains at least `threshold` of the key
/// point's non-stop-words (all words if every word is a stop word).
/// Compares with exact integer arithmetic: hits * den >= num * needed.
pub fn oracle_covered(utterances: &[String], key_point: &str, num: u64, den: u64) -> bool {
    let stop: HashSet<&str> = ORACLE_STOP.iter().copied().collect();
    let all = oracle_tokens(key_point);
    let content: HashSet<String> = all
        .iter()
        .filter(|w| !stop.contains(w.as_str()))
        .cloned()
        .collect();
    let needed = if content.is_empty() { all } else { content };
    if needed.is_empty() {
        return false;
    }
    utterances.iter().any(|u| {
        let have = oracle_tokens(u);
        let hits = needed.iter().filter(|w| have.contains(*w)).count() as u64;
        hits * den >= num * needed.len() as u64
    })
}

/// A topic plus FSM where each key point is voiced to a controlled degree.
pub fn coverage_case(rng: &mut impl Rng, case: usize) -> (SessionTopic, DialogueFsm) {
    let points: Vec<String> = (0..rng.random_range(1..4))
        .map(|_| {
            let mut words: Vec<&str> = WORDS.to_vec();
            words.shuffle(rng);
            let len = rng.random_range(1..7);
            let mut p = words[..len].join(" ");
            if rng.random_bool(0.3) {
                p = format!("the {p} is what you do");
            }
            p
        })
        .collect();
    let mut states = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let words: Vec<&str> = p.split(' ').collect();
        let keep = rng.random_range(0..=words.len());
        let mut said: Vec<String> = words[..keep].iter().map(|w| w.to_uppercase()).collect();
        said.push(plain_sentence(rng, 2));
        said.shuffle(rng);
        let mut state = DialogueState::new(st(&format!("k{i}")), format!("{}!", said.join(", ")));
        state.is_entry = i == 0;
        states.push(state);
    }
    for i in 0..states.len() {
        let target = if i + 1 < states.len() {
            Target::State(st(&format!("k{}", i + 1)))
        } else {
            Target::End
        };
        states[i] = states[i].clone().with_option("next", target);
    }
    let fsm = DialogueFsm::from_states(sid("cov"), states).unwrap();
    let topic = SessionTopic {
        id: sid("cov"),
        ordinal: 1,
        title: format!("case {case}"),
        key_points: points,
    };
    (topic, fsm)
}

/// Distinct values of a BTreeSet-able projection, for quick set equality.
pub fn set_of<T: Ord + Clone>(items: &[T]) -> BTreeSet<T> {
    items.iter().cloned().collect()
}

// ---------------------------------------------------------------------------
// Edit-command generator
// ---------------------------------------------------------------------------

use healthdial_core::editing::EditCommand;
use healthdial_core::model::{Material, SessionPlan};
use healthdial_core::Project;

const SMALL_TEXTS: &[&str] = &["alpha", "beta", "gamma", "Alpha", "delta"];
const TOPIC_IDS: &[&str] = &["t0", "t1", "t2", "t3", "t4"];
const NEW_STATE_IDS: &[&str] = &["n0", "n1", "n2"];

/// A project with a three-topic plan and a generated FSM for each topic.
pub fn seeded_project(rng: &mut impl Rng) -> Project {
    let mut p = Project::new(Material::pasted("Seeded", "Screening saves lives.").unwrap());
    let sessions: Vec<SessionTopic> = (0..3)
        .map(|i| SessionTopic {
            id: sid(TOPIC_IDS[i]),
            ordinal: i as u32 + 1,
            title: format!("Topic {i}"),
            key_points: vec![format!("point {i}")],
        })
        .collect();
    p.apply(EditCommand::ReplacePlan {
        plan: SessionPlan {
            sessions: sessions.clone(),
            revision_note: None,
        },
    })
    .unwrap();
    for s in &sessions {
        p.apply(EditCommand::ReplaceFsm {
            fsm: valid_fsm(rng, &s.id, 5),
        })
        .unwrap();
    }
    p
}

fn pick<'a, T>(rng: &mut impl Rng, items: &'a [T]) -> Option<&'a T> {
    (!items.is_empty()).then(|| &items[rng.random_range(0..items.len())])
}

fn small_text(rng: &mut impl Rng) -> String {
    pick(rng, SMALL_TEXTS).unwrap().to_string()
}

/// A command that may or may not be accepted by `p`: targets are usually
/// real, sometimes missing, and values come from small pools so that edits
/// frequently undo one another.
pub fn random_command(rng: &mut impl Rng, p: &Project) -> EditCommand {
    let planned: Vec<SessionId> = p.plan().session_ids().cloned().collect();
    let with_fsm: Vec<SessionId> = p.fsms().keys().cloned().collect();
    let session = if rng.random_bool(0.05) || with_fsm.is_empty() {
        sid(pick(rng, TOPIC_IDS).unwrap())
    } else {
        pick(rng, &with_fsm).unwrap().clone()
    };
    let states: Vec<StateId> = p
        .fsm(&session)
        .map(|f| f.states().map(|s| s.id.clone()).collect())
        .unwrap_or_default();
    let mut state = || -> StateId {
        if rng.random_bool(0.05) || states.is_empty() {
            st("ghost")
        } else {
            states[rng.random_range(0..states.len())].clone()
        }
    };
    let a = state();
    let b = state();
    let option_count = p
        .fsm(&session)
        .and_then(|f| f.state(&a))
        .map_or(1, |s| s.options.len().max(1));
    let index = rng.random_range(0..option_count + 1).min(option_count);
    let index = if rng.random_bool(0.9) { index.min(option_count - 1) } else { index };
    let target = if rng.random_bool(0.3) {
        Target::End
    } else {
        Target::State(b.clone())
    };
    match rng.random_range(0..15) {
        0 | 1 => EditCommand::EditUtterance {
            session,
            state: a,
            text: small_text(rng),
        },
        2 => EditCommand::AddState {
            session,
            state: st(pick(rng, NEW_STATE_IDS).unwrap()),
            utterance: small_text(rng),
            from: a,
            label: small_text(rng),
        },
        3 => EditCommand::DeleteState { session, state: a },
        4 => EditCommand::AddOption {
            session,
            state: a,
            label: small_text(rng),
            target,
        },
        5 => EditCommand::EditOptionLabel {
            session,
            state: a,
            index,
            label: small_text(rng),
        },
        6 => EditCommand::DeleteOption {
            session,
            state: a,
            index,
        },
        7 | 8 => EditCommand::ConnectOption {
            session,
            state: a,
            index,
            target,
        },
        9 => EditCommand::SetEntry { session, state: a },
        10 => {
            let mut order = planned.clone();
            order.shuffle(rng);
            EditCommand::ReorderTopics { order }
        }
        11 => EditCommand::AddTopic {
            session: sid(pick(rng, TOPIC_IDS).unwrap()),
            title: small_text(rng),
            key_points: vec![small_text(rng)],
            position: Some(rng.random_range(0..=planned.len())),
        },
        12 => match rng.random_range(0..3) {
            0 => EditCommand::DeleteTopic { session },
            1 => EditCommand::RenameTopic {
                session,
                title: small_text(rng),
            },
            _ => EditCommand::SetKeyPoints {
                session,
                key_points: vec![small_text(rng)],
            },
        },
        13 => EditCommand::AcceptSuggestion {
            session,
            state: a,
            label: small_text(rng),
            target: if rng.random_bool(0.5) {
                Target::State(st(pick(rng, NEW_STATE_IDS).unwrap()))
            } else {
                target
            },
            create_stub: rng.random_bool(0.5),
        },
        _ => {
            if planned.is_empty() {
                EditCommand::DeleteTopic { session }
            } else {
                let s = pick(rng, &planned).unwrap().clone();
                EditCommand::ReplaceFsm {
                    fsm: valid_fsm(rng, &s, 4),
                }
            }
        }
    }
}
