//! QRAM interpreter: runs checked programs against a [`QuantumStore`].
//!
//! Classical registers live in the machine; quantum registers are lists of
//! qubit ids in the store. `reverse` records the block's gates without
//! applying them and then applies their inverses backwards; `qif`
//! conditions every gate of its body on the control qubit, using an enable
//! ancilla when conditions nest.

mod machine;
pub mod reversify;
pub mod value;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::lang::ast::{ParamType, Proc, Program};
use crate::lang::check::{check_program, summarize};
use crate::lang::diag::{Code, Diagnostic, Span};
use crate::qstate::{MeasurementRecord, QubitId, DEFAULT_ASSERT_TOL, DEFAULT_MAX_QUBITS};

use machine::{Env, Machine, Sampler};
pub use reversify::{compile as reversify_compile, RevArg, ReversibleCircuit, Wire};
pub use value::{Cell, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    #[default]
    Strict,
    /// Classical reads of quantum registers measure them, gates promote
    /// classical bits and overwriting a quantum register dissipates it.
    Permissive,
}

impl std::str::FromStr for ExecMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "strict" => Ok(ExecMode::Strict),
            "permissive" => Ok(ExecMode::Permissive),
            other => Err(format!("unknown mode `{other}` (strict or permissive)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: u64,
    pub mode: ExecMode,
    pub max_qubits: usize,
    /// Entry proc; `main`, else the last proc, when unset.
    pub entry: Option<String>,
    pub dump_state: bool,
    /// Record every gate applied to the store.
    pub trace: bool,
    /// Statement budget for one run.
    pub max_steps: u64,
    pub assert_tol: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: 0,
            mode: ExecMode::Strict,
            max_qubits: DEFAULT_MAX_QUBITS,
            entry: None,
            dump_state: false,
            trace: false,
            max_steps: 50_000_000,
            assert_tol: DEFAULT_ASSERT_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    /// A register used in the wrong mode.
    Mode,
    /// `assert_classical` or an ancilla check failed.
    Assertion,
    /// Qubit capacity, step budget, call depth or path bound.
    Resource,
    /// Bad or missing input binding.
    Input,
    /// A construct this operation does not handle.
    Unsupported,
    Arithmetic,
    Internal,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ErrorKind::Mode => "mode",
            ErrorKind::Assertion => "assertion",
            ErrorKind::Resource => "resource",
            ErrorKind::Input => "input",
            ErrorKind::Unsupported => "unsupported",
            ErrorKind::Arithmetic => "arithmetic",
            ErrorKind::Internal => "internal",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Error, Serialize)]
#[error("{line}:{col} {kind} error: {message}")]
pub struct RuntimeError {
    pub kind: ErrorKind,
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl RuntimeError {
    pub fn new(kind: ErrorKind, span: Span, message: impl Into<String>) -> Self {
        RuntimeError {
            kind,
            line: span.line,
            col: span.col,
            message: message.into(),
        }
    }

    fn input(message: impl Into<String>) -> Self {
        RuntimeError::new(ErrorKind::Input, Span::new(0, 0), message)
    }
}

/// A value bound to a parameter of the entry proc.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Int(i64),
    Real(f64),
    /// Most significant bit first.
    Bits(Vec<bool>),
    /// Unparsed command-line text, read according to the parameter type.
    Text(String),
    /// Amplitudes for a quantum parameter, first qubit most significant.
    State(Vec<Complex64>),
}

pub type Inputs = BTreeMap<String, Input>;

/// One gate application, as reported by `--trace`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateEvent {
    pub gate: String,
    pub qubits: Vec<QubitId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub outputs: BTreeMap<String, Value>,
    pub measurements: Vec<MeasurementRecord>,
    pub state: Option<Vec<String>>,
    pub trace: Option<Vec<GateEvent>>,
    pub seed: u64,
}

impl RunResult {
    /// One output record, fields in a fixed order.
    pub fn to_json(&self, shot: usize) -> serde_json::Value {
        let outputs: serde_json::Map<String, serde_json::Value> = self
            .outputs
            .iter()
            .map(|(k, v)| (k.clone(), v.to_json()))
            .collect();
        let mut rec = serde_json::Map::new();
        rec.insert("shot".into(), shot.into());
        rec.insert("outputs".into(), outputs.into());
        rec.insert(
            "measurements".into(),
            serde_json::to_value(&self.measurements).expect("records serialize"),
        );
        rec.insert("seed".into(), self.seed.into());
        if let Some(s) = &self.state {
            rec.insert("state".into(), serde_json::to_value(s).expect("strings serialize"));
        }
        if let Some(t) = &self.trace {
            rec.insert("trace".into(), serde_json::to_value(t).expect("events serialize"));
        }
        serde_json::Value::Object(rec)
    }
}

/// Checker diagnostics that prevent running in `mode`. Permissive mode
/// lets the mode rules through; they are handled at run time.
pub fn blocking_diagnostics(p: &Program, mode: ExecMode) -> Vec<Diagnostic> {
    check_program(p)
        .into_iter()
        .filter(|d| !d.is_warning())
        .filter(|d| {
            mode == ExecMode::Strict
                || !matches!(
                    d.code,
                    Code::RuleI
                        | Code::RuleII
                        | Code::RuleIV
                        | Code::ClassicalOnQuantum
                        | Code::QuantumOnClassical
                        | Code::OutputMode
                        | Code::Kind
                )
        })
        .collect()
}

fn entry<'p>(p: &'p Program, opts: &RunOptions) -> Result<&'p Proc, RuntimeError> {
    p.entry(opts.entry.as_deref()).ok_or_else(|| {
        RuntimeError::input(match &opts.entry {
            Some(n) => format!("no proc named `{n}`"),
            None => "program has no procs".to_string(),
        })
    })
}

struct Finished<'p> {
    machine: Machine<'p>,
    env: Env,
    proc: &'p Proc,
}

fn execute<'p>(
    p: &'p Program,
    inputs: &Inputs,
    opts: &'p RunOptions,
    sampler: Sampler,
    forbid_measure: bool,
) -> Result<Finished<'p>, RuntimeError> {
    let proc = entry(p, opts)?;
    let mut machine = Machine::new(p, opts, sampler);
    machine.forbid_measure = forbid_measure;
    let mut env = machine.bind_entry(proc, inputs)?;
    machine.run_body(proc, &mut env)?;
    Ok(Finished { machine, env, proc })
}

fn collect_result(f: &Finished<'_>, opts: &RunOptions) -> RunResult {
    let mut outputs = BTreeMap::new();
    if f.proc.outputs.is_empty() {
        for (k, v) in &f.env {
            if v.is_classical() {
                outputs.insert(k.clone(), v.clone());
            }
        }
    } else {
        for o in &f.proc.outputs {
            if let Some(v) = f.env.get(&o.name) {
                outputs.insert(o.name.clone(), v.clone());
            }
        }
    }
    RunResult {
        outputs,
        measurements: f.machine.log.clone(),
        state: opts.dump_state.then(|| f.machine.store.dump_lines()),
        trace: f.machine.gate_log.clone(),
        seed: opts.seed,
    }
}

/// Runs the entry proc once. The program should already have passed
/// [`blocking_diagnostics`] for `opts.mode`.
pub fn run_program(p: &Program, inputs: &Inputs, opts: &RunOptions) -> Result<RunResult, RuntimeError> {
    let f = execute(p, inputs, opts, Sampler::Random, false)?;
    Ok(collect_result(&f, opts))
}

/// Like [`run_program`], also returning the joint state of the entry
/// proc's quantum parameters at the end, concatenated in parameter order
/// with each register's most significant qubit first.
pub fn run_to_state(
    p: &Program,
    inputs: &Inputs,
    opts: &RunOptions,
) -> Result<(RunResult, Vec<Complex64>), RuntimeError> {
    let f = execute(p, inputs, opts, Sampler::Random, false)?;
    let state = final_param_state(&f)?;
    Ok((collect_result(&f, opts), state))
}

fn final_param_state(f: &Finished<'_>) -> Result<Vec<Complex64>, RuntimeError> {
    let mut qubits = Vec::new();
    for par in f.proc.params.iter().filter(|p| p.quantum) {
        let v = f.env.get(&par.name).ok_or_else(|| {
            RuntimeError::new(ErrorKind::Mode, par.span, format!("`{}` is no longer bound", par.name))
        })?;
        if !matches!(v, Value::Bits(_)) || v.qubits().len() != width_of(v) {
            return Err(RuntimeError::new(
                ErrorKind::Mode,
                par.span,
                format!("`{}` is no longer fully quantum", par.name),
            ));
        }
        qubits.extend(v.qubits());
    }
    if qubits.is_empty() {
        return Ok(vec![Complex64::new(1.0, 0.0)]);
    }
    f.machine.store.joint_state(&qubits).map_err(|e| {
        RuntimeError::new(ErrorKind::Mode, f.proc.span, format!("final state of the parameters: {e}"))
    })
}

fn width_of(v: &Value) -> usize {
    match v {
        Value::Bits(c) => c.len(),
        _ => 0,
    }
}

/// Exact outcome distribution over every measurement path, keyed by the
/// concatenated outcomes of the recorded measurements in order.
/// Dissipations branch too but do not contribute to the key.
pub fn measured_paths(
    p: &Program,
    inputs: &Inputs,
    opts: &RunOptions,
) -> Result<BTreeMap<String, f64>, RuntimeError> {
    let mut dist = BTreeMap::new();
    let mut script: Vec<usize> = Vec::new();
    loop {
        let f = execute(p, inputs, opts, Sampler::scripted(script.clone()), false)?;
        let taken = f.machine.branches();
        let weight: f64 = taken.iter().map(|b| b.probability).product();
        let key: String = f.machine.log.iter().map(|r| r.outcome.as_str()).collect();
        *dist.entry(key).or_insert(0.0) += weight;
        let Some(j) = taken.iter().rposition(|b| b.choice + 1 < b.options) else {
            break;
        };
        script = taken[..j].iter().map(|b| b.choice).collect();
        script.push(taken[j].choice + 1);
    }
    Ok(dist)
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub dim: usize,
    pub data: Vec<Complex64>,
}

impl Matrix {
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }
}

/// Largest total register width `unitary_of_proc` accepts.
pub const MAX_MATRIX_QUBITS: usize = 10;

/// Unitary induced by the entry proc on its quantum parameters, built by
/// running it on every basis state. Basis index bits follow the
/// parameters in order, each register most significant first. Widths come
/// from `widths`, else the parameter's `bits[w]` type, else 1.
pub fn unitary_of_proc(
    p: &Program,
    inputs: &Inputs,
    widths: &HashMap<String, usize>,
    opts: &RunOptions,
) -> Result<Matrix, RuntimeError> {
    let proc = entry(p, opts)?;
    let summary = summarize(p).remove(&proc.name).unwrap_or_default();
    if summary.measures || summary.dissipates {
        return Err(RuntimeError::new(
            ErrorKind::Unsupported,
            proc.span,
            format!("`{}` measures or dissipates, so it has no unitary", proc.name),
        ));
    }
    let mut probe = Machine::new(p, opts, Sampler::Random);
    let classical = probe.bind_classical(proc, inputs)?;
    let mut regs: Vec<(String, usize)> = Vec::new();
    for par in proc.params.iter().filter(|p| p.quantum) {
        let w = match (widths.get(&par.name), &par.ty) {
            (Some(w), _) => *w,
            (None, Some(ParamType::Bits(e))) => probe.width_expr(e, &classical)?,
            _ => 1,
        };
        regs.push((par.name.clone(), w));
    }
    let n: usize = regs.iter().map(|r| r.1).sum();
    if n > MAX_MATRIX_QUBITS {
        return Err(RuntimeError::new(
            ErrorKind::Resource,
            proc.span,
            format!("{n} qubits is above the matrix limit of {MAX_MATRIX_QUBITS}"),
        ));
    }
    let dim = 1usize << n;
    let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
    for col in 0..dim {
        let mut ins = inputs.clone();
        let mut shift = n;
        for (name, w) in &regs {
            shift -= w;
            let bits = (0..*w).rev().map(|k| (col >> (shift + k)) & 1 == 1).collect();
            ins.insert(name.clone(), Input::Bits(bits));
        }
        let f = execute(p, &ins, opts, Sampler::Random, true)?;
        let column = final_param_state(&f)?;
        for (row, a) in column.into_iter().enumerate() {
            data[row * dim + col] = a;
        }
    }
    Ok(Matrix { dim, data })
}
