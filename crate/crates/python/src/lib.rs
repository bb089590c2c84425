//! Python bindings. Documents go in and out as JSON text; structured results
//! (reports, plans, session views) come back as plain dicts and lists.

use std::collections::BTreeSet;

use compass_core::storage::{self, to_canonical_string};
use compass_core::{self as core, DecayParams, EvidenceRecord, Timestamp};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(compass_py, CompassError, PyValueError, "Raised for every engine error; args are (code, message).");

fn err(e: core::Error) -> PyErr {
    CompassError::new_err((e.code(), e.to_string()))
}

fn to_py<T: Serialize + ?Sized>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = to_canonical_string(value);
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn timestamp(value: &str) -> PyResult<Timestamp> {
    Timestamp::parse(value).map_err(|e| CompassError::new_err(("BAD_PARAMETER", e)))
}

fn course_set(model: &core::DomainModel, course: Option<Vec<String>>) -> BTreeSet<String> {
    match course {
        Some(c) if !c.is_empty() => c.into_iter().collect(),
        _ => model.concepts.keys().cloned().collect(),
    }
}

fn params(half_life_seconds: Option<u64>) -> PyResult<DecayParams> {
    match half_life_seconds {
        None => Ok(DecayParams::default()),
        Some(h) => {
            let d = DecayParams::default();
            DecayParams::new(h, d.mastery_threshold, d.ema_alpha).map_err(err)
        }
    }
}

#[pyclass(module = "compass_py", from_py_object)]
#[derive(Clone)]
pub struct DomainModel {
    inner: core::DomainModel,
}

#[pymethods]
impl DomainModel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(DomainModel { inner: storage::load_domain_model(text.as_bytes()).map_err(err)?.value })
    }

    fn to_json(&self) -> String {
        String::from_utf8(storage::save_domain_model(&self.inner)).expect("canonical JSON is UTF-8")
    }

    #[getter]
    fn module_id(&self) -> &str {
        &self.inner.module_id
    }

    fn concept_ids(&self) -> Vec<String> {
        self.inner.concepts.keys().cloned().collect()
    }

    fn validate(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.validate())
    }

    fn prerequisite_closure(&self, concept_id: &str) -> PyResult<Vec<String>> {
        Ok(self.inner.prerequisite_closure(concept_id).map_err(err)?.into_iter().collect())
    }

    fn topological_order(&self, concept_ids: Vec<String>) -> PyResult<Vec<String>> {
        self.inner.topological_order(&concept_ids).map_err(err)
    }

    #[staticmethod]
    fn merge(models: Vec<DomainModel>) -> PyResult<Self> {
        let models: Vec<_> = models.into_iter().map(|m| m.inner).collect();
        Ok(DomainModel { inner: core::merge_models(&models).map_err(err)? })
    }

    #[pyo3(signature = (course=None, learner=None, now=None))]
    fn export_dot(&self, course: Option<Vec<String>>, learner: Option<&Learner>, now: Option<&str>) -> PyResult<String> {
        let course = course_set(&self.inner, course);
        let report = match (learner, now) {
            (Some(l), Some(now)) => {
                Some(core::overlay(&self.inner, &course, &l.inner, timestamp(now)?, &DecayParams::default()).map_err(err)?)
            }
            (None, None) => None,
            _ => return Err(CompassError::new_err(("BAD_PARAMETER", "learner and now go together"))),
        };
        Ok(core::export_dot(&self.inner, &course, report.as_ref()))
    }

    fn __repr__(&self) -> String {
        format!("DomainModel({:?}, {} concepts)", self.inner.module_id, self.inner.concepts.len())
    }
}

#[pyclass(module = "compass_py")]
pub struct ItemPool {
    inner: core::ItemPool,
}

#[pymethods]
impl ItemPool {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(ItemPool { inner: storage::load_item_pool(text.as_bytes()).map_err(err)?.value })
    }

    fn to_json(&self) -> String {
        String::from_utf8(storage::save_item_pool(&self.inner)).expect("canonical JSON is UTF-8")
    }

    fn __len__(&self) -> usize {
        self.inner.items.len()
    }

    fn validate(&self, py: Python<'_>, model: &DomainModel) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.validate(&model.inner))
    }

    fn coverage(&self, py: Python<'_>, model: &DomainModel) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.coverage_matrix(&model.inner).map_err(err)?)
    }
}

#[pyclass(module = "compass_py")]
pub struct Learner {
    inner: core::IndividualModel,
}

#[pymethods]
impl Learner {
    #[new]
    fn new(learner_id: &str) -> Self {
        Learner { inner: core::IndividualModel::new(learner_id) }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Learner { inner: storage::load_individual(text.as_bytes()).map_err(err)?.value })
    }

    fn to_json(&self) -> String {
        String::from_utf8(storage::save_individual(&self.inner)).expect("canonical JSON is UTF-8")
    }

    #[getter]
    fn learner_id(&self) -> &str {
        &self.inner.learner_id
    }

    fn __len__(&self) -> usize {
        self.inner.evidence.len()
    }

    /// Appends one scored answer; raises on a duplicate (timestamp, item).
    fn record(
        &mut self,
        item_id: &str,
        lo_id: &str,
        process_level: u8,
        correct: bool,
        timestamp_iso: &str,
        seconds: u32,
    ) -> PyResult<()> {
        let rec = EvidenceRecord {
            item_id: item_id.into(),
            lo_id: lo_id.into(),
            process_level,
            correct,
            timestamp: timestamp(timestamp_iso)?,
            seconds,
        };
        self.inner.insert(rec).map_err(err)
    }

    #[pyo3(signature = (lo_id, now, half_life_seconds=None))]
    fn mastery(&self, lo_id: &str, now: &str, half_life_seconds: Option<u64>) -> PyResult<f64> {
        Ok(self.inner.mastery(lo_id, timestamp(now)?, &params(half_life_seconds)?))
    }

    fn confirmed_level(&self, lo_id: &str) -> u8 {
        self.inner.confirmed_level(lo_id)
    }
}

#[pyfunction]
#[pyo3(signature = (model, learner, now, course=None))]
fn overlay(py: Python<'_>, model: &DomainModel, learner: &Learner, now: &str, course: Option<Vec<String>>) -> PyResult<Py<PyAny>> {
    let course = course_set(&model.inner, course);
    let report = core::overlay(&model.inner, &course, &learner.inner, timestamp(now)?, &DecayParams::default()).map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (model, learner, target, now, course=None, k=3))]
fn recommend_path(
    py: Python<'_>,
    model: &DomainModel,
    learner: &Learner,
    target: &str,
    now: &str,
    course: Option<Vec<String>>,
    k: usize,
) -> PyResult<Py<PyAny>> {
    let course = course_set(&model.inner, course);
    let report = core::overlay(&model.inner, &course, &learner.inner, timestamp(now)?, &DecayParams::default()).map_err(err)?;
    to_py(py, &core::recommend_path(&model.inner, &course, &report, target, k).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (model, lo_id, tags=Vec::new()))]
fn recommend_resources(py: Python<'_>, model: &DomainModel, lo_id: &str, tags: Vec<String>) -> PyResult<Py<PyAny>> {
    let tags: BTreeSet<String> = tags.into_iter().collect();
    to_py(py, &core::recommend_resources(&model.inner, lo_id, &tags).map_err(err)?)
}

#[derive(Serialize)]
struct PublicItem<'a> {
    id: &'a str,
    lo_id: &'a str,
    process_level: u8,
    stem: &'a str,
    options: &'a [String],
    max_seconds: u32,
}

/// A micro-assessment session bound to its item pool.
#[pyclass(module = "compass_py")]
pub struct Session {
    state: core::SessionState,
    pool: core::ItemPool,
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (pool, model, learner, lo_id, budget=12, confirmations=1, session_id="py"))]
    fn new(
        pool: &ItemPool,
        model: &DomainModel,
        learner: &Learner,
        lo_id: &str,
        budget: u32,
        confirmations: u32,
        session_id: &str,
    ) -> PyResult<Self> {
        let config = core::SessionConfig { budget, confirmations };
        let state = core::start_session(session_id, &pool.inner, &model.inner, &learner.inner, lo_id, config).map_err(err)?;
        Ok(Session { state, pool: pool.inner.clone() })
    }

    #[getter]
    fn status(&self) -> String {
        format!("{:?}", self.state.status)
    }

    #[getter]
    fn interval(&self) -> (u8, u8) {
        (self.state.interval.low, self.state.interval.high)
    }

    /// The item to answer next, without its key, or None once closed.
    fn next_item(&mut self, py: Python<'_>) -> PyResult<Option<Py<PyAny>>> {
        let item = match self.state.next_item(&self.pool) {
            Ok(item) => item,
            Err(core::Error::Exhausted | core::Error::SessionClosed) => return Ok(None),
            Err(e) => return Err(err(e)),
        };
        let public = PublicItem {
            id: &item.id,
            lo_id: &item.lo_id,
            process_level: item.level(),
            stem: &item.stem,
            options: &item.options,
            max_seconds: item.max_seconds,
        };
        Ok(Some(to_py(py, &public)?))
    }

    /// Scores an answer to the pending item and returns the evidence record.
    fn submit(&mut self, py: Python<'_>, item_id: &str, chosen: Vec<usize>, seconds: u32, now: &str) -> PyResult<Py<PyAny>> {
        let item = self.pool.item(item_id).ok_or_else(|| {
            err(core::Error::WrongItem { expected: self.state.pending.clone(), got: item_id.to_owned() })
        })?;
        let chosen: BTreeSet<usize> = chosen.into_iter().collect();
        let rec = self.state.submit_answer(item, &chosen, seconds, timestamp(now)?).map_err(err)?;
        to_py(py, &rec)
    }

    fn result(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.state.result())
    }

    fn to_json(&self) -> String {
        String::from_utf8(storage::save_session(&self.state)).expect("canonical JSON is UTF-8")
    }
}

/// Runs a full session against a simulated learner of `true_level`;
/// returns {"result", "trace", "evidence"}.
#[pyfunction]
#[pyo3(signature = (pool, model, lo_id, true_level, start, budget=12))]
fn simulate(
    py: Python<'_>,
    pool: &ItemPool,
    model: &DomainModel,
    lo_id: &str,
    true_level: u8,
    start: &str,
    budget: u32,
) -> PyResult<Py<PyAny>> {
    let config = core::SessionConfig { budget, ..Default::default() };
    let mut state = core::start_session("sim", &pool.inner, &model.inner, &core::IndividualModel::new("sim"), lo_id, config)
        .map_err(err)?;
    let learner = core::SimulatedLearner::new(true_level);
    let (trace, evidence) = core::run_simulated(&mut state, &pool.inner, &learner, timestamp(start)?).map_err(err)?;
    #[derive(Serialize)]
    struct Out<'a> {
        result: core::SessionResult,
        trace: &'a [core::micro_assessment::TraceStep],
        evidence: &'a [EvidenceRecord],
    }
    to_py(py, &Out { result: state.result(), trace: &trace, evidence: &evidence })
}

#[pymodule]
fn compass_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CompassError", m.py().get_type::<CompassError>())?;
    m.add("SCHEMA_VERSION", core::SCHEMA_VERSION)?;
    m.add_class::<DomainModel>()?;
    m.add_class::<ItemPool>()?;
    m.add_class::<Learner>()?;
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(overlay, m)?)?;
    m.add_function(wrap_pyfunction!(recommend_path, m)?)?;
    m.add_function(wrap_pyfunction!(recommend_resources, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
