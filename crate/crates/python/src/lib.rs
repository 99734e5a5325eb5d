//! Python bindings. Structured values cross the boundary as plain dicts and
//! lists (via JSON); errors raise `HealthDialError` subclasses.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::de::DeserializeOwned;
use serde::Serialize;

use healthdial_core::config::Config;
use healthdial_core::editing::{EditCommand, EditError};
use healthdial_core::engine::{Engine as CoreEngine, EngineError};
use healthdial_core::markup::{self, Dialogue, MarkupDocument, ParseError};
use healthdial_core::model::{fsm_stats, validate_fsm, DialogueFsm, Material, MaterialSource, SessionTopic};
use healthdial_core::orchestration::{key_point_coverage, ScriptedProvider, DEFAULT_COVERAGE_THRESHOLD};
use healthdial_core::runtime::{self, transcript_jsonl, PlaySession as CorePlay, DEFAULT_MAX_STEPS};
use healthdial_core::{Project as CoreProject, ProjectId, SessionId, StateId};

create_exception!(healthdial, HealthDialError, PyException);
create_exception!(healthdial, MarkupError, HealthDialError);
create_exception!(healthdial, EditRefused, HealthDialError);
create_exception!(healthdial, ProviderError, HealthDialError);
create_exception!(healthdial, RuntimeRefused, HealthDialError);

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| HealthDialError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: DeserializeOwned>(value: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = if let Ok(s) = value.extract::<String>() {
        s
    } else {
        value.py().import("json")?.call_method1("dumps", (value,))?.extract()?
    };
    serde_json::from_str(&text).map_err(|e| HealthDialError::new_err(e.to_string()))
}

fn parse_errors(errors: &[ParseError]) -> PyErr {
    let lines: Vec<String> = errors.iter().map(ToString::to_string).collect();
    MarkupError::new_err(lines.join("\n"))
}

fn edit_err(e: EditError) -> PyErr {
    EditRefused::new_err(format!("{}: {e}", e.code()))
}

fn engine_err(e: EngineError) -> PyErr {
    let message = format!("{}: {e}", e.code());
    match e {
        EngineError::Edit(_) => EditRefused::new_err(message),
        EngineError::Orchestration(_) => ProviderError::new_err(message),
        EngineError::Runtime(_) => RuntimeRefused::new_err(message),
        EngineError::Import(errors) => parse_errors(&errors),
        _ => HealthDialError::new_err(message),
    }
}

fn session(raw: &str) -> PyResult<SessionId> {
    SessionId::new(raw).map_err(|e| HealthDialError::new_err(e.to_string()))
}

fn state(raw: &str) -> PyResult<StateId> {
    StateId::new(raw).map_err(|e| HealthDialError::new_err(e.to_string()))
}

fn project_id(raw: &str) -> PyResult<ProjectId> {
    ProjectId::new(raw).map_err(|e| HealthDialError::new_err(e.to_string()))
}

/// One dialogue state machine.
#[pyclass(module = "healthdial", from_py_object)]
#[derive(Clone)]
pub struct Fsm {
    inner: DialogueFsm,
}

#[pymethods]
impl Fsm {
    /// Builds from the dict form returned by `to_dict`.
    #[staticmethod]
    fn from_dict(value: &Bound<'_, PyAny>) -> PyResult<Self> {
        Ok(Self { inner: from_py(value)? })
    }

    #[getter]
    fn session_id(&self) -> String {
        self.inner.session_id.to_string()
    }

    #[getter]
    fn entry(&self) -> Option<String> {
        self.inner.entry_id().map(ToString::to_string)
    }

    #[getter]
    fn state_ids(&self) -> Vec<String> {
        self.inner.states().map(|s| s.id.to_string()).collect()
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    /// Defects as dicts with `kind`, `location` and `message`.
    fn validate(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &validate_fsm(&self.inner).defects)
    }

    fn stats(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &fsm_stats(&self.inner))
    }

    #[pyo3(signature = (max_steps = DEFAULT_MAX_STEPS))]
    fn paths(&self, py: Python<'_>, max_steps: usize) -> PyResult<Py<PyAny>> {
        to_py(py, &runtime::enumerate_paths(&self.inner, max_steps))
    }

    fn replay(&self, py: Python<'_>, choices: Vec<usize>) -> PyResult<Py<PyAny>> {
        let turns = runtime::replay(&self.inner, &choices)
            .map_err(|e| RuntimeRefused::new_err(e.to_string()))?;
        to_py(py, &turns)
    }

    #[pyo3(signature = (key_points, threshold = DEFAULT_COVERAGE_THRESHOLD))]
    fn coverage(&self, py: Python<'_>, key_points: Vec<String>, threshold: f64) -> PyResult<Py<PyAny>> {
        let topic = SessionTopic {
            id: self.inner.session_id.clone(),
            ordinal: 1,
            title: String::new(),
            key_points,
        };
        to_py(py, &key_point_coverage(&self.inner, &topic, threshold))
    }

    fn to_markup(&self, title: &str) -> PyResult<String> {
        let doc = MarkupDocument::new(vec![Dialogue {
            title: title.to_string(),
            fsm: self.inner.clone(),
        }]);
        markup::serialize(&doc).map_err(|e| MarkupError::new_err(e.to_string()))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Fsm(session_id={:?}, states={})", self.inner.session_id.as_str(), self.inner.len())
    }
}

/// Parses a `.hdfsm` document into `[(session_id, title, Fsm)]`.
#[pyfunction]
fn parse(text: &str) -> PyResult<Vec<(String, String, Fsm)>> {
    let doc = markup::parse(text).map_err(|e| parse_errors(&e))?;
    Ok(doc
        .dialogues
        .into_iter()
        .map(|d| (d.fsm.session_id.to_string(), d.title, Fsm { inner: d.fsm }))
        .collect())
}

/// Inverse of `parse`: takes `[(title, Fsm)]`.
#[pyfunction]
fn serialize(dialogues: Vec<(String, Fsm)>) -> PyResult<String> {
    let doc = MarkupDocument::new(
        dialogues
            .into_iter()
            .map(|(title, fsm)| Dialogue { title, fsm: fsm.inner })
            .collect(),
    );
    markup::serialize(&doc).map_err(|e| MarkupError::new_err(e.to_string()))
}

/// Parse errors as `line:column: kind: message` strings; empty when valid.
#[pyfunction]
fn check(text: &str) -> Vec<String> {
    match markup::parse(text) {
        Ok(_) => Vec::new(),
        Err(errors) => errors.iter().map(ToString::to_string).collect(),
    }
}

/// A patient playthrough of one FSM.
#[pyclass(module = "healthdial")]
pub struct PlaySession {
    inner: Mutex<CorePlay>,
}

#[pymethods]
impl PlaySession {
    #[new]
    fn new(fsm: &Fsm) -> PyResult<Self> {
        let play = CorePlay::start(&fsm.inner).map_err(|e| RuntimeRefused::new_err(e.to_string()))?;
        Ok(Self { inner: Mutex::new(play) })
    }

    #[getter]
    fn utterance(&self) -> Option<String> {
        self.inner.lock().unwrap().current_state().map(|s| s.utterance.clone())
    }

    #[getter]
    fn options(&self) -> Vec<String> {
        self.inner.lock().unwrap().options().iter().map(|o| o.to_string()).collect()
    }

    #[getter]
    fn finished(&self) -> bool {
        self.inner.lock().unwrap().is_finished()
    }

    fn choose(&self, index: usize) -> PyResult<()> {
        self.inner
            .lock()
            .unwrap()
            .choose(index)
            .map(|_| ())
            .map_err(|e| RuntimeRefused::new_err(e.to_string()))
    }

    fn transcript(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.lock().unwrap().transcript())
    }

    fn transcript_jsonl(&self) -> String {
        transcript_jsonl(self.inner.lock().unwrap().transcript())
    }
}

/// An in-memory project: plan, dialogues and edit history.
#[pyclass(module = "healthdial")]
pub struct Project {
    inner: Mutex<CoreProject>,
}

#[pymethods]
impl Project {
    #[new]
    fn new(title: &str, material: &str) -> PyResult<Self> {
        let material = Material::pasted(title, material).map_err(|e| HealthDialError::new_err(e.to_string()))?;
        Ok(Self {
            inner: Mutex::new(CoreProject::new(material)),
        })
    }

    #[getter]
    fn content_hash(&self) -> String {
        self.inner.lock().unwrap().content_hash().to_string()
    }

    #[getter]
    fn revision_count(&self) -> usize {
        self.inner.lock().unwrap().revision_count()
    }

    /// Applies an edit command (dict or JSON string); returns the new hash.
    fn apply(&self, command: &Bound<'_, PyAny>) -> PyResult<String> {
        let command: EditCommand = from_py(command)?;
        let hash = self.inner.lock().unwrap().apply(command).map_err(edit_err)?;
        Ok(hash.to_string())
    }

    fn undo(&self) -> PyResult<String> {
        Ok(self.inner.lock().unwrap().undo().map_err(edit_err)?.to_string())
    }

    fn redo(&self) -> PyResult<String> {
        Ok(self.inner.lock().unwrap().redo().map_err(edit_err)?.to_string())
    }

    #[getter]
    fn can_undo(&self) -> bool {
        self.inner.lock().unwrap().history().can_undo()
    }

    #[getter]
    fn can_redo(&self) -> bool {
        self.inner.lock().unwrap().history().can_redo()
    }

    fn plan(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, self.inner.lock().unwrap().plan())
    }

    fn fsm(&self, session_id: &str) -> PyResult<Option<Fsm>> {
        let sid = session(session_id)?;
        Ok(self.inner.lock().unwrap().fsm(&sid).map(|f| Fsm { inner: f.clone() }))
    }

    fn export(&self) -> PyResult<String> {
        let doc = self.inner.lock().unwrap().to_document();
        markup::serialize(&doc).map_err(|e| MarkupError::new_err(e.to_string()))
    }
}

/// The persistent engine: a project store plus a language-model provider.
#[pyclass(module = "healthdial")]
pub struct Engine {
    inner: Arc<CoreEngine>,
}

impl Engine {
    fn call<T, F>(&self, py: Python<'_>, f: F) -> PyResult<T>
    where
        T: Send,
        F: FnOnce(&CoreEngine) -> Result<T, EngineError> + Send,
    {
        let engine = self.inner.clone();
        py.detach(move || f(&engine)).map_err(engine_err)
    }
}

#[pymethods]
impl Engine {
    /// Without `fixtures`, the provider comes from the usual configuration
    /// (`HEALTHDIAL_*` variables or `config`).
    #[new]
    #[pyo3(signature = (store, fixtures = None, config = None, free_order = false))]
    fn new(store: PathBuf, fixtures: Option<PathBuf>, config: Option<PathBuf>, free_order: bool) -> PyResult<Self> {
        let mut cfg = Config::load(config.as_deref()).map_err(|e| HealthDialError::new_err(e.to_string()))?;
        cfg.store = store;
        cfg.free_order |= free_order;
        if let Some(dir) = fixtures {
            ScriptedProvider::from_dir(&dir).map_err(|e| HealthDialError::new_err(e.to_string()))?;
            cfg.provider.fixtures = Some(dir);
        }
        let engine = CoreEngine::from_config(&cfg).map_err(|e| HealthDialError::new_err(e.to_string()))?;
        Ok(Self { inner: Arc::new(engine) })
    }

    /// Returns the new project id.
    #[pyo3(signature = (title, material, file_name = None))]
    fn create_project(&self, py: Python<'_>, title: String, material: String, file_name: Option<String>) -> PyResult<String> {
        let source = if file_name.is_some() {
            MaterialSource::ImportedFile
        } else {
            MaterialSource::Pasted
        };
        let p = self.call(py, move |e| e.create_project(&title, &material, source, file_name))?;
        Ok(p.id.to_string())
    }

    fn projects(&self, py: Python<'_>) -> PyResult<Vec<String>> {
        let ids = self.call(py, |e| e.list())?;
        Ok(ids.into_iter().map(|i| i.to_string()).collect())
    }

    fn summary(&self, py: Python<'_>, id: &str) -> PyResult<Py<PyAny>> {
        let id = project_id(id)?;
        let p = self.call(py, move |e| e.load(&id))?;
        to_py(py, &healthdial_core::engine::ProjectSummary::of(&p))
    }

    #[pyo3(signature = (id, cue = None))]
    fn plan(&self, py: Python<'_>, id: &str, cue: Option<String>) -> PyResult<Py<PyAny>> {
        let id = project_id(id)?;
        let (plan, _) = self.call(py, move |e| e.plan(&id, cue.as_deref()))?;
        to_py(py, &plan)
    }

    fn approve_plan(&self, py: Python<'_>, id: &str) -> PyResult<()> {
        let id = project_id(id)?;
        self.call(py, move |e| e.approve_plan(&id)).map(|_| ())
    }

    fn generate(&self, py: Python<'_>, id: &str, session_id: &str) -> PyResult<Fsm> {
        let (id, sid) = (project_id(id)?, session(session_id)?);
        let (g, _) = self.call(py, move |e| e.generate(&id, &sid))?;
        Ok(Fsm { inner: g.fsm })
    }

    fn generate_all(&self, py: Python<'_>, id: &str) -> PyResult<Vec<Fsm>> {
        let id = project_id(id)?;
        let all = self.call(py, move |e| e.generate_all(&id))?;
        Ok(all.into_iter().map(|(_, g)| Fsm { inner: g.fsm }).collect())
    }

    #[pyo3(signature = (id, session_id, state_id, count = 3))]
    fn suggest(&self, py: Python<'_>, id: &str, session_id: &str, state_id: &str, count: usize) -> PyResult<Vec<String>> {
        let (id, sid, st) = (project_id(id)?, session(session_id)?, state(state_id)?);
        let (drafts, _) = self.call(py, move |e| e.suggest(&id, &sid, &st, count))?;
        Ok(drafts.into_iter().map(|d| d.label).collect())
    }

    /// Applies an edit command (dict or JSON string); returns
    /// `{content_hash, revision_count, history}`.
    fn edit(&self, py: Python<'_>, id: &str, command: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
        let id = project_id(id)?;
        let command: EditCommand = from_py(command)?;
        let outcome = self.call(py, move |e| e.edit(&id, command))?;
        to_py(py, &outcome)
    }

    fn undo(&self, py: Python<'_>, id: &str) -> PyResult<Py<PyAny>> {
        let id = project_id(id)?;
        let outcome = self.call(py, move |e| e.undo(&id))?;
        to_py(py, &outcome)
    }

    fn redo(&self, py: Python<'_>, id: &str) -> PyResult<Py<PyAny>> {
        let id = project_id(id)?;
        let outcome = self.call(py, move |e| e.redo(&id))?;
        to_py(py, &outcome)
    }

    fn export(&self, py: Python<'_>, id: &str) -> PyResult<String> {
        let id = project_id(id)?;
        self.call(py, move |e| e.export(&id))
    }

    fn import_document(&self, py: Python<'_>, id: &str, text: String) -> PyResult<Vec<String>> {
        let id = project_id(id)?;
        let sessions = self.call(py, move |e| e.import(&id, &text))?;
        Ok(sessions.into_iter().map(|s| s.to_string()).collect())
    }

    fn stats(&self, py: Python<'_>, id: &str) -> PyResult<Py<PyAny>> {
        let id = project_id(id)?;
        let stats = self.call(py, move |e| e.stats(&id))?;
        to_py(py, &stats)
    }

    /// Plays `choices` from the entry; returns the transcript as JSON lines.
    fn play(&self, py: Python<'_>, id: &str, session_id: &str, choices: Vec<usize>) -> PyResult<String> {
        let (id, sid) = (project_id(id)?, session(session_id)?);
        let view = self.call(py, move |e| e.play_script(&id, &sid, &choices))?;
        Ok(transcript_jsonl(&view.transcript))
    }

    fn progress(&self, py: Python<'_>, id: &str) -> PyResult<Py<PyAny>> {
        let id = project_id(id)?;
        let ledger = self.call(py, move |e| e.progress(&id))?;
        to_py(py, &ledger)
    }
}

#[pymodule]
fn healthdial(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("HealthDialError", py.get_type::<HealthDialError>())?;
    m.add("MarkupError", py.get_type::<MarkupError>())?;
    m.add("EditRefused", py.get_type::<EditRefused>())?;
    m.add("ProviderError", py.get_type::<ProviderError>())?;
    m.add("RuntimeRefused", py.get_type::<RuntimeRefused>())?;
    m.add_class::<Fsm>()?;
    m.add_class::<PlaySession>()?;
    m.add_class::<Project>()?;
    m.add_class::<Engine>()?;
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(serialize, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    Ok(())
}
