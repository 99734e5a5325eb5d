use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::project::ContentHash;

use super::apply::Snapshot;
use super::command::{EditCommand, EditKind};

#[derive(Debug, Clone)]
pub struct HistoryEntry {
    pub command: EditCommand,
    /// Content hash right after this command ran.
    pub hash_after: ContentHash,
    pub(crate) inverse: Snapshot,
}

/// Linear undo/redo log. Entries at or past the cursor form the redo
/// branch, which is discarded by the next apply.
#[derive(Debug, Clone)]
pub struct EditHistory {
    base_hash: ContentHash,
    entries: Vec<HistoryEntry>,
    cursor: usize,
}

impl EditHistory {
    pub fn new(base_hash: ContentHash) -> Self {
        Self {
            base_hash,
            entries: Vec::new(),
            cursor: 0,
        }
    }

    pub fn base_hash(&self) -> &ContentHash {
        &self.base_hash
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn can_undo(&self) -> bool {
        self.cursor > 0
    }

    pub fn can_redo(&self) -> bool {
        self.cursor < self.entries.len()
    }

    /// All entries including the redo branch.
    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    /// Entries whose effect is present in the current content.
    pub fn active(&self) -> &[HistoryEntry] {
        &self.entries[..self.cursor]
    }

    /// Hash after each entry, redo branch included.
    pub fn hash_trail(&self) -> Vec<&ContentHash> {
        self.entries.iter().map(|e| &e.hash_after).collect()
    }

    /// Hash the content must have at the current cursor.
    pub fn expected_hash(&self) -> &ContentHash {
        match self.cursor {
            0 => &self.base_hash,
            n => &self.entries[n - 1].hash_after,
        }
    }

    pub fn summary(&self) -> HistorySummary {
        HistorySummary {
            cursor: self.cursor,
            len: self.entries.len(),
            can_undo: self.can_undo(),
            can_redo: self.can_redo(),
            revision_count: self.revision_count(),
        }
    }

    pub fn revision_count(&self) -> usize {
        count_revisions(
            &self.base_hash,
            self.active()
                .iter()
                .map(|e| (e.command.kind(), &e.hash_after)),
        )
    }

    pub(crate) fn push(&mut self, entry: HistoryEntry) {
        self.entries.truncate(self.cursor);
        self.entries.push(entry);
        self.cursor = self.entries.len();
    }

    pub(crate) fn step_back(&mut self) -> Option<&HistoryEntry> {
        if self.cursor == 0 {
            return None;
        }
        self.cursor -= 1;
        Some(&self.entries[self.cursor])
    }

    pub(crate) fn step_forward(&mut self) -> Option<&mut HistoryEntry> {
        if self.cursor == self.entries.len() {
            return None;
        }
        self.cursor += 1;
        Some(&mut self.entries[self.cursor - 1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistorySummary {
    pub cursor: usize,
    pub len: usize,
    pub can_undo: bool,
    pub can_redo: bool,
    pub revision_count: usize,
}

/// Counts content revisions in a command sequence.
///
/// `steps` pairs each command's kind with the hash after it ran. A command
/// is discounted when it lies in a span `j+1..=k` whose end hash equals the
/// hash after step `j` (step 0 being `base`), i.e. the span was reverted.
/// Commands of non-content kinds never count.
pub fn count_revisions<'a>(
    base: &ContentHash,
    steps: impl IntoIterator<Item = (EditKind, &'a ContentHash)>,
) -> usize {
    let steps: Vec<(EditKind, &ContentHash)> = steps.into_iter().collect();
    let n = steps.len();
    let mut first_seen: HashMap<&ContentHash, usize> = HashMap::new();
    first_seen.insert(base, 0);
    // Difference array over command numbers 1..=n.
    let mut delta = vec![0i64; n + 2];
    for (i, (_, hash)) in steps.iter().enumerate() {
        let k = i + 1;
        match first_seen.get(hash) {
            Some(&j) => {
                delta[j + 1] += 1;
                delta[k + 1] -= 1;
            }
            None => {
                first_seen.insert(hash, k);
            }
        }
    }
    let mut depth = 0;
    let mut count = 0;
    for (i, (kind, _)) in steps.iter().enumerate() {
        depth += delta[i + 1];
        if depth == 0 && kind.is_content_revision() {
            count += 1;
        }
    }
    count
}
