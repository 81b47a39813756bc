//! Python bindings. Payloads are the same JSON documents the command line
//! prints, handed over as Python dicts and lists.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde_json::Value as Json;

use recourse::api::{self, ApiError, ClassifyRequest, ExplainRequest, InterpolantRequest};
use recourse::cfe::ControlSpec;
use recourse::dual::{dualize_predicate, dualize_program};
use recourse::rulelang::{parse_program, PredKey};
use recourse::schema::FeatureSchema;
use recourse::workspace::Workspace;

create_exception!(pyrecourse, RecourseError, PyException, "Raised with (code, message) when a request fails.");

fn fail(code: &str, message: impl ToString) -> PyErr {
    RecourseError::new_err((code.to_string(), message.to_string()))
}

fn api_err(e: ApiError) -> PyErr {
    fail(e.code(), e)
}

fn to_py(py: Python<'_>, v: &Json) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (api::render(v),))?.unbind())
}

fn from_py(obj: &Bound<'_, PyAny>) -> PyResult<Json> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| fail("malformed-request", e))
}

fn controls(obj: Option<&Bound<'_, PyAny>>) -> PyResult<ControlSpec> {
    match obj {
        None => Ok(ControlSpec::new()),
        Some(o) => ControlSpec::from_json(&from_py(o)?).map_err(|e| fail("malformed-request", e)),
    }
}

/// A loaded model: schema, decision rules and causal rules.
#[pyclass(name = "Workspace", frozen)]
struct PyWorkspace {
    inner: Arc<Workspace>,
}

impl PyWorkspace {
    /// Runs `f` without holding the interpreter lock.
    fn eval(&self, py: Python<'_>, f: impl FnOnce(&Workspace) -> Result<Json, ApiError> + Send) -> PyResult<Py<PyAny>> {
        let ws = self.inner.clone();
        let out = py.detach(move || f(&ws)).map_err(api_err)?;
        to_py(py, &out)
    }
}

#[pymethods]
impl PyWorkspace {
    #[new]
    #[pyo3(signature = (schema, rules, name = "workspace"))]
    fn new(schema: &str, rules: &str, name: &str) -> PyResult<Self> {
        let schema = FeatureSchema::from_json(schema).map_err(|e| fail("invalid-workspace", e))?;
        let ws = Workspace::load(name, schema, rules).map_err(|e| fail("invalid-workspace", e))?;
        Ok(PyWorkspace { inner: Arc::new(ws) })
    }

    /// Loads `schema.json` and `rules.lp` from a directory.
    #[staticmethod]
    fn load_dir(path: PathBuf) -> PyResult<Self> {
        let ws = Workspace::load_dir(&path).map_err(|e| fail("invalid-workspace", e))?;
        Ok(PyWorkspace { inner: Arc::new(ws) })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    /// Features the rules use, in schema order.
    #[getter]
    fn features(&self) -> Vec<String> {
        self.inner.schema().features().iter().map(|f| f.name.clone()).collect()
    }

    fn schema(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &api::schema(&self.inner))
    }

    fn classify(&self, py: Python<'_>, instance: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
        let req = ClassifyRequest { instance: from_py(instance)? };
        self.eval(py, move |ws| api::classify(ws, &req))
    }

    /// Counterfactuals, cheapest first. `limit=0` returns all of them.
    #[pyo3(signature = (instance, controls = None, cost = None, limit = None))]
    fn explain(
        &self,
        py: Python<'_>,
        instance: &Bound<'_, PyAny>,
        controls: Option<&Bound<'_, PyAny>>,
        cost: Option<usize>,
        limit: Option<usize>,
    ) -> PyResult<Py<PyAny>> {
        let req = ExplainRequest { instance: from_py(instance)?, controls: self::controls(controls)?, cost, limit };
        self.eval(py, move |ws| api::explain(ws, &req, true))
    }

    #[pyo3(signature = (instance, controls = None))]
    fn interpolant(
        &self,
        py: Python<'_>,
        instance: &Bound<'_, PyAny>,
        controls: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<Py<PyAny>> {
        let req = InterpolantRequest { instance: from_py(instance)?, controls: self::controls(controls)? };
        self.eval(py, move |ws| api::interpolant(ws, &req))
    }

    #[pyo3(signature = (limit = None))]
    fn enumerate(&self, py: Python<'_>, limit: Option<usize>) -> PyResult<Py<PyAny>> {
        self.eval(py, move |ws| api::enumerate(ws, limit, true))
    }

    fn __repr__(&self) -> String {
        format!("Workspace({:?}, features={:?})", self.inner.name, self.features())
    }
}

/// Dual rules of a program, or of one `name/arity` predicate.
#[pyfunction]
#[pyo3(signature = (rules, pred = None))]
fn dualize(rules: &str, pred: Option<&str>) -> PyResult<Vec<String>> {
    let program = parse_program(rules).map_err(|e| fail("invalid-rules", e))?;
    let duals = match pred {
        Some(p) => {
            let (name, arity) = p
                .rsplit_once('/')
                .and_then(|(n, a)| Some((n, a.parse::<usize>().ok()?)))
                .ok_or_else(|| fail("usage", format!("pred wants name/arity, got `{p}`")))?;
            dualize_predicate(&program, &PredKey::new(name, arity)).map_err(|e| fail("dual-error", e))?
        }
        None => dualize_program(&program).map_err(|e| fail("dual-error", e))?.duals().to_vec(),
    };
    Ok(duals.iter().map(|r| r.to_string()).collect())
}

#[pymodule]
fn pyrecourse(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWorkspace>()?;
    m.add_function(wrap_pyfunction!(dualize, m)?)?;
    m.add("RecourseError", m.py().get_type::<RecourseError>())?;
    Ok(())
}
