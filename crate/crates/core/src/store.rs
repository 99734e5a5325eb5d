//! File-per-artifact project store.
//!
//! ```text
//! <root>/<project-id>/
//!     meta.json          title, material source, approval flag, timestamps
//!     material.txt       source text
//!     edit-log.jsonl     every apply/undo/redo; replayed on load
//!     plan.json          current plan (absent until planned)
//!     sessions/<sid>.hdfsm
//!     exchanges.jsonl    audited model exchanges
//!     progress.json      playthrough progress
//! ```
//!
//! The edit log is authoritative. Plan and session files are derived from it
//! and rewritten through temp-file-then-rename, so a reader never sees a
//! half-written artifact.

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::editing::{parse_log, EditError, LogEvent, LogRecord};
use crate::ids::{MaterialId, ProjectId, SessionId};
use crate::markup::{self, plan_to_json, Dialogue, MarkupDocument};
use crate::model::{validate_fsm, Material, MaterialSource};
use crate::orchestration::LlmExchange;
use crate::project::Project;
use crate::runtime::ProgressLedger;

const META: &str = "meta.json";
const MATERIAL: &str = "material.txt";
const EDIT_LOG: &str = "edit-log.jsonl";
const PLAN: &str = "plan.json";
const SESSIONS: &str = "sessions";
const EXCHANGES: &str = "exchanges.jsonl";
const PROGRESS: &str = "progress.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("project {0} not found")]
    NotFound(ProjectId),
    #[error("project {0} already exists")]
    AlreadyExists(ProjectId),
    #[error("{path} is corrupt: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("edit log of project {project} does not replay: {source}")]
    Replay {
        project: ProjectId,
        #[source]
        source: EditError,
    },
    #[error("injected fault before renaming {0}")]
    Injected(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Simulated crash for atomic writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fault {
    /// Number of atomic writes that succeed before the failing one.
    pub after_writes: usize,
    /// Write only half of the bytes to the temp file before failing.
    pub partial: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    id: ProjectId,
    title: String,
    material_id: MaterialId,
    source: MaterialSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    imported_name: Option<String>,
    plan_approved: bool,
    created: DateTime<Utc>,
    modified: DateTime<Utc>,
}

#[derive(Debug)]
pub struct ProjectStore {
    root: PathBuf,
    fault: Mutex<Option<Fault>>,
}

impl ProjectStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Self {
            root,
            fault: Mutex::new(None),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn project_dir(&self, id: &ProjectId) -> PathBuf {
        self.root.join(id.as_str())
    }

    pub fn session_path(&self, id: &ProjectId, session: &SessionId) -> PathBuf {
        self.project_dir(id)
            .join(SESSIONS)
            .join(format!("{session}.{}", markup::FILE_EXTENSION))
    }

    /// Arms a fault for the next atomic writes.
    pub fn inject_fault(&self, fault: Fault) {
        *self.fault.lock().expect("fault lock") = Some(fault);
    }

    pub fn clear_fault(&self) {
        *self.fault.lock().expect("fault lock") = None;
    }

    pub fn exists(&self, id: &ProjectId) -> bool {
        self.project_dir(id).join(META).is_file()
    }

    pub fn list(&self) -> Result<Vec<ProjectId>, StoreError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(io_err(&self.root))? {
            let entry = entry.map_err(io_err(&self.root))?;
            if let Some(id) = entry
                .file_name()
                .to_str()
                .and_then(|n| ProjectId::new(n).ok())
            {
                if self.exists(&id) {
                    out.push(id);
                }
            }
        }
        out.sort();
        Ok(out)
    }

    /// Persists a freshly created project (material, meta, empty log).
    pub fn create(&self, project: &Project) -> Result<(), StoreError> {
        let dir = self.project_dir(&project.id);
        if self.exists(&project.id) {
            return Err(StoreError::AlreadyExists(project.id.clone()));
        }
        fs::create_dir_all(dir.join(SESSIONS)).map_err(io_err(&dir))?;
        self.write_atomic(&dir.join(MATERIAL), project.material.body.as_bytes())?;
        let log = dir.join(EDIT_LOG);
        File::create(&log).map_err(io_err(&log))?;
        self.sync_artifacts(project)?;
        // Meta last: a project without meta.json does not exist.
        self.save_meta(project)
    }

    pub fn load(&self, id: &ProjectId) -> Result<Project, StoreError> {
        if !self.exists(id) {
            return Err(StoreError::NotFound(id.clone()));
        }
        let dir = self.project_dir(id);
        let meta: Meta = read_json(&dir.join(META))?;
        let body = read_text(&dir.join(MATERIAL))?;
        let material = Material {
            id: meta.material_id,
            title: meta.title,
            body,
            source: meta.source,
            imported_name: meta.imported_name,
        };
        let mut project = Project::with_id(meta.id, material, meta.created);
        let log_path = dir.join(EDIT_LOG);
        let records = match fs::read_to_string(&log_path) {
            Ok(text) => parse_log(&text).map_err(|e| StoreError::Corrupt {
                path: log_path.clone(),
                message: e.to_string(),
            })?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_err(&log_path)(e)),
        };
        project
            .replay(records.iter().map(|r| &r.event))
            .map_err(|source| StoreError::Replay {
                project: id.clone(),
                source,
            })?;
        project.plan_approved = meta.plan_approved;
        project.modified = meta.modified;
        Ok(project)
    }

    /// Records edit events for `project` (already applied in memory) and
    /// refreshes the derived artifacts.
    pub fn record_events(&self, project: &Project, events: &[LogEvent]) -> Result<(), StoreError> {
        let lines: String = events
            .iter()
            .map(|e| LogRecord::now(e.clone()).to_line())
            .collect();
        append_lines(&self.project_dir(&project.id).join(EDIT_LOG), &lines)?;
        self.sync_artifacts(project)?;
        self.save_meta(project)
    }

    /// Rewrites plan.json and every session file that differs from the
    /// in-memory content; removes files of sessions that no longer exist.
    pub fn sync_artifacts(&self, project: &Project) -> Result<(), StoreError> {
        let dir = self.project_dir(&project.id);
        let plan_path = dir.join(PLAN);
        if project.plan().is_empty() {
            remove_if_exists(&plan_path)?;
        } else {
            self.write_if_changed(&plan_path, &plan_to_json(project.plan()))?;
        }

        let sessions_dir = dir.join(SESSIONS);
        fs::create_dir_all(&sessions_dir).map_err(io_err(&sessions_dir))?;
        let mut keep = BTreeSet::new();
        for (sid, fsm) in project.fsms() {
            let title = project
                .plan()
                .session(sid)
                .map(|s| s.title.clone())
                .unwrap_or_default();
            let doc = MarkupDocument::new(vec![Dialogue {
                title,
                fsm: fsm.clone(),
            }]);
            let text = markup::serialize(&doc).map_err(|e| StoreError::Corrupt {
                path: self.session_path(&project.id, sid),
                message: e.to_string(),
            })?;
            let path = self.session_path(&project.id, sid);
            self.write_if_changed(&path, &text)?;
            keep.insert(path);
        }
        for entry in fs::read_dir(&sessions_dir).map_err(io_err(&sessions_dir))? {
            let path = entry.map_err(io_err(&sessions_dir))?.path();
            let is_session = path
                .extension()
                .is_some_and(|e| e == markup::FILE_EXTENSION);
            if is_session && !keep.contains(&path) {
                remove_if_exists(&path)?;
            }
        }
        Ok(())
    }

    pub fn save_meta(&self, project: &Project) -> Result<(), StoreError> {
        let meta = Meta {
            id: project.id.clone(),
            title: project.material.title.clone(),
            material_id: project.material.id.clone(),
            source: project.material.source,
            imported_name: project.material.imported_name.clone(),
            plan_approved: project.plan_approved,
            created: project.created,
            modified: project.modified,
        };
        let text = serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n";
        self.write_atomic(&self.project_dir(&project.id).join(META), text.as_bytes())
    }

    pub fn append_exchanges(
        &self,
        id: &ProjectId,
        exchanges: &[LlmExchange],
    ) -> Result<(), StoreError> {
        if exchanges.is_empty() {
            return Ok(());
        }
        let lines: String = exchanges
            .iter()
            .map(|x| serde_json::to_string(x).expect("exchange serializes") + "\n")
            .collect();
        append_lines(&self.project_dir(id).join(EXCHANGES), &lines)
    }

    pub fn load_exchanges(&self, id: &ProjectId) -> Result<Vec<LlmExchange>, StoreError> {
        let path = self.project_dir(id).join(EXCHANGES);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let complete = text.ends_with('\n');
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        let mut out = Vec::new();
        for (i, line) in lines.iter().enumerate() {
            match serde_json::from_str(line) {
                Ok(x) => out.push(x),
                Err(_) if !complete && i + 1 == lines.len() => break,
                Err(e) => {
                    return Err(StoreError::Corrupt {
                        path,
                        message: format!("line {}: {e}", i + 1),
                    })
                }
            }
        }
        Ok(out)
    }

    pub fn load_progress(&self, id: &ProjectId) -> Result<ProgressLedger, StoreError> {
        let path = self.project_dir(id).join(PROGRESS);
        if path.is_file() {
            read_json(&path)
        } else {
            Ok(ProgressLedger::default())
        }
    }

    pub fn save_progress(&self, id: &ProjectId, ledger: &ProgressLedger) -> Result<(), StoreError> {
        let text = serde_json::to_string_pretty(ledger).expect("ledger serializes") + "\n";
        self.write_atomic(&self.project_dir(id).join(PROGRESS), text.as_bytes())
    }

    /// Session files that do not parse into exactly one clean dialogue.
    pub fn check_session_files(&self, id: &ProjectId) -> Result<Vec<(PathBuf, String)>, StoreError> {
        let dir = self.project_dir(id).join(SESSIONS);
        let mut bad = Vec::new();
        if !dir.is_dir() {
            return Ok(bad);
        }
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path();
            if path.extension().is_none_or(|e| e != markup::FILE_EXTENSION) {
                continue;
            }
            let text = read_text(&path)?;
            match markup::parse(&text) {
                Ok(doc) if doc.dialogues.len() == 1 && validate_fsm(&doc.dialogues[0].fsm).is_clean() => {}
                Ok(doc) => bad.push((path, format!("{} dialogues", doc.dialogues.len()))),
                Err(errors) => bad.push((path, errors[0].to_string())),
            }
        }
        bad.sort();
        Ok(bad)
    }

    fn write_if_changed(&self, path: &Path, text: &str) -> Result<(), StoreError> {
        match fs::read(path) {
            Ok(existing) if existing == text.as_bytes() => Ok(()),
            _ => self.write_atomic(path, text.as_bytes()),
        }
    }

    fn take_fault(&self) -> Option<Fault> {
        let mut slot = self.fault.lock().expect("fault lock");
        match slot.as_mut() {
            Some(f) if f.after_writes == 0 => slot.take(),
            Some(f) => {
                f.after_writes -= 1;
                None
            }
            None => None,
        }
    }

    fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .expect("store paths have file names");
        let tmp = path.with_file_name(format!(".{name}.tmp"));
        let fault = self.take_fault();
        let payload = match fault {
            Some(Fault { partial: true, .. }) => &bytes[..bytes.len() / 2],
            _ => bytes,
        };
        {
            let mut file = File::create(&tmp).map_err(io_err(&tmp))?;
            file.write_all(payload).map_err(io_err(&tmp))?;
            file.sync_all().map_err(io_err(&tmp))?;
        }
        if fault.is_some() {
            return Err(StoreError::Injected(path.to_path_buf()));
        }
        fs::rename(&tmp, path).map_err(io_err(path))?;
        if let Some(parent) = path.parent() {
            // Persist the rename; not every platform can open a directory.
            if let Ok(dir) = File::open(parent) {
                let _ = dir.sync_all();
            }
        }
        Ok(())
    }
}

fn read_text(path: &Path) -> Result<String, StoreError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StoreError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn remove_if_exists(path: &Path) -> Result<(), StoreError> {
    match fs::remove_file(path) {
        Err(e) if e.kind() != io::ErrorKind::NotFound => Err(io_err(path)(e)),
        _ => Ok(()),
    }
}

/// Appends complete lines, first cutting off a torn final line left by an
/// interrupted append.
fn append_lines(path: &Path, lines: &str) -> Result<(), StoreError> {
    let mut file = OpenOptions::new()
        .read(true)
        .append(true)
        .create(true)
        .open(path)
        .map_err(io_err(path))?;
    let len = file.metadata().map_err(io_err(path))?.len();
    if len > 0 {
        let mut last = [0u8; 1];
        file.seek(SeekFrom::Start(len - 1)).map_err(io_err(path))?;
        file.read_exact(&mut last).map_err(io_err(path))?;
        if last[0] != b'\n' {
            let mut all = Vec::new();
            file.seek(SeekFrom::Start(0)).map_err(io_err(path))?;
            file.read_to_end(&mut all).map_err(io_err(path))?;
            let keep = all.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
            file.set_len(keep as u64).map_err(io_err(path))?;
        }
    }
    file.write_all(lines.as_bytes()).map_err(io_err(path))?;
    file.sync_all().map_err(io_err(path))
}
