//! Python bindings: check, run and inspect `.qps` source text.

use std::collections::HashMap;

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyTypeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyComplex, PyDict, PyList};

use qpseudo::cli::shot_seed;
use qpseudo::interp::{self, ExecMode, Input, Inputs, RunOptions, RuntimeError};
use qpseudo::lang::{check_program, parse, pretty_print, Program};

create_exception!(pyqpseudo, QpsError, pyo3::exceptions::PyException);
create_exception!(pyqpseudo, RejectedError, QpsError);
create_exception!(pyqpseudo, RuntimeFailure, QpsError);

fn runtime_err(e: RuntimeError) -> PyErr {
    RuntimeFailure::new_err(e.to_string())
}

fn load(source: &str, mode: ExecMode) -> PyResult<Program> {
    let p = parse(source).map_err(|d| RejectedError::new_err(d.to_string()))?;
    let blocking = interp::blocking_diagnostics(&p, mode);
    if !blocking.is_empty() {
        let text: Vec<String> = blocking.iter().map(|d| d.to_string()).collect();
        return Err(RejectedError::new_err(text.join("\n")));
    }
    Ok(p)
}

fn to_input(v: &Bound<'_, PyAny>) -> PyResult<Input> {
    if let Ok(s) = v.extract::<String>() {
        return Ok(Input::Text(s));
    }
    if let Ok(i) = v.extract::<i64>() {
        return Ok(Input::Int(i));
    }
    if let Ok(x) = v.extract::<f64>() {
        return Ok(Input::Real(x));
    }
    if let Ok(amps) = v.extract::<Vec<Bound<'_, PyAny>>>() {
        let state = amps
            .iter()
            .map(|a| {
                let c = a.cast::<PyComplex>().ok().map(|c| Complex64::new(c.real(), c.imag()));
                c.map_or_else(|| a.extract::<f64>().map(|x| Complex64::new(x, 0.0)), Ok)
            })
            .collect::<PyResult<Vec<_>>>()?;
        return Ok(Input::State(state));
    }
    Err(PyTypeError::new_err("inputs must be int, float, str or a list of amplitudes"))
}

fn to_inputs(inputs: Option<&Bound<'_, PyDict>>) -> PyResult<Inputs> {
    let mut out = Inputs::new();
    if let Some(d) = inputs {
        for (k, v) in d.iter() {
            out.insert(k.extract::<String>()?, to_input(&v)?);
        }
    }
    Ok(out)
}

fn options(seed: u64, mode: &str, entry: Option<String>, max_qubits: usize) -> PyResult<RunOptions> {
    let mode: ExecMode = mode.parse().map_err(|e: String| PyValueError::new_err(e))?;
    Ok(RunOptions {
        seed,
        mode,
        entry,
        max_qubits,
        ..RunOptions::default()
    })
}

fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use serde_json::Value as J;
    Ok(match v {
        J::Null => py.None().into_bound(py),
        J::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        J::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (None, Some(u)) => u.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        J::String(s) => s.into_pyobject(py)?.into_any(),
        J::Array(a) => {
            let items = a.iter().map(|x| json_to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        J::Object(m) => {
            let d = PyDict::new(py);
            for (k, x) in m {
                d.set_item(k, json_to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

/// Diagnostics for `source` as a list of dicts with line, col, code and
/// message. An empty list means the program is accepted.
#[pyfunction]
fn check<'py>(py: Python<'py>, source: &str) -> PyResult<Bound<'py, PyList>> {
    let diags = match parse(source) {
        Ok(p) => check_program(&p),
        Err(d) => vec![d],
    };
    let items = diags
        .iter()
        .map(|d| {
            let x = PyDict::new(py);
            x.set_item("line", d.line)?;
            x.set_item("col", d.col)?;
            x.set_item("code", d.code.as_str())?;
            x.set_item("message", &d.message)?;
            Ok(x)
        })
        .collect::<PyResult<Vec<_>>>()?;
    PyList::new(py, items)
}

/// Canonical formatting of `source`.
#[pyfunction]
fn pretty(source: &str) -> PyResult<String> {
    let p = parse(source).map_err(|d| RejectedError::new_err(d.to_string()))?;
    Ok(pretty_print(&p))
}

/// Runs `shots` shots and returns one record per shot, in the same form
/// the command line prints.
#[pyfunction]
#[pyo3(signature = (source, inputs=None, *, shots=1, seed=0, mode="strict", entry=None,
                    max_qubits=24, dump_state=false, trace=false))]
#[allow(clippy::too_many_arguments)]
fn run<'py>(
    py: Python<'py>,
    source: &str,
    inputs: Option<&Bound<'py, PyDict>>,
    shots: usize,
    seed: u64,
    mode: &str,
    entry: Option<String>,
    max_qubits: usize,
    dump_state: bool,
    trace: bool,
) -> PyResult<Bound<'py, PyList>> {
    let base = RunOptions {
        dump_state,
        trace,
        ..options(seed, mode, entry, max_qubits)?
    };
    let p = load(source, base.mode)?;
    let ins = to_inputs(inputs)?;
    let records = py.detach(|| {
        (0..shots)
            .map(|i| {
                let opts = RunOptions { seed: shot_seed(seed, i), ..base.clone() };
                interp::run_program(&p, &ins, &opts).map(|r| r.to_json(i))
            })
            .collect::<Result<Vec<_>, _>>()
    });
    let items = records
        .map_err(runtime_err)?
        .iter()
        .map(|r| json_to_py(py, r))
        .collect::<PyResult<Vec<_>>>()?;
    PyList::new(py, items)
}

/// Exact distribution over measurement outcomes, keyed by the recorded
/// outcomes in order.
#[pyfunction]
#[pyo3(signature = (source, inputs=None, *, mode="strict", entry=None, max_qubits=24))]
fn distribution(
    py: Python<'_>,
    source: &str,
    inputs: Option<&Bound<'_, PyDict>>,
    mode: &str,
    entry: Option<String>,
    max_qubits: usize,
) -> PyResult<HashMap<String, f64>> {
    let opts = options(0, mode, entry, max_qubits)?;
    let p = load(source, opts.mode)?;
    let ins = to_inputs(inputs)?;
    let d = py.detach(|| interp::measured_paths(&p, &ins, &opts)).map_err(runtime_err)?;
    Ok(d.into_iter().collect())
}

/// Dense unitary of a measurement-free proc as a list of rows of complex
/// numbers.
#[pyfunction]
#[pyo3(signature = (source, inputs=None, *, entry=None, widths=None))]
fn unitary<'py>(
    py: Python<'py>,
    source: &str,
    inputs: Option<&Bound<'py, PyDict>>,
    entry: Option<String>,
    widths: Option<HashMap<String, usize>>,
) -> PyResult<Bound<'py, PyList>> {
    let opts = options(0, "strict", entry, qpseudo::qstate::DEFAULT_MAX_QUBITS)?;
    let p = load(source, opts.mode)?;
    let ins = to_inputs(inputs)?;
    let widths = widths.unwrap_or_default();
    let m = py
        .detach(|| interp::unitary_of_proc(&p, &ins, &widths, &opts))
        .map_err(runtime_err)?;
    let rows = (0..m.dim)
        .map(|r| PyList::new(py, (0..m.dim).map(|c| PyComplex::from_doubles(py, m.get(r, c).re, m.get(r, c).im))))
        .collect::<PyResult<Vec<_>>>()?;
    PyList::new(py, rows)
}

#[pymodule]
pub fn pyqpseudo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("QpsError", m.py().get_type::<QpsError>())?;
    m.add("RejectedError", m.py().get_type::<RejectedError>())?;
    m.add("RuntimeFailure", m.py().get_type::<RuntimeFailure>())?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(pretty, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(distribution, m)?)?;
    m.add_function(wrap_pyfunction!(unitary, m)?)?;
    Ok(())
}
