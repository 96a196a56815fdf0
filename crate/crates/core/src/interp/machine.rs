//! Statement execution.

use std::collections::{HashMap, HashSet};

use super::reversify::{self, RevArg, Wire};
use super::value::{self, Cell, Value};
use super::{ErrorKind, ExecMode, GateEvent, Input, Inputs, RunOptions, RuntimeError};
use crate::gates::{self, builtin_signature, GateSpec};
use crate::lang::ast::*;
use crate::lang::check::{bind_lhs, reversify_obstacle, LhsBinding};
use crate::lang::diag::Span;
use crate::qstate::{MeasurementRecord, QStateError, QuantumStore, QubitId};

pub(crate) type Env = HashMap<String, Value>;
type R<T> = Result<T, RuntimeError>;

const MAX_CALL_DEPTH: usize = 256;
/// Widest register `zeros(n)` or an input may create.
const MAX_WIDTH: i64 = 4096;
/// Branching events allowed on one measurement path.
pub(crate) const MAX_PATH_EVENTS: usize = 20;
/// Path branches below this probability are not followed.
const PATH_PRUNE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Release {
    Assert,
    Dissipate,
}

/// What a reversed block did while it was being recorded.
#[derive(Debug, Clone)]
enum Event {
    Gate(GateSpec, Vec<QubitId>),
    Alloc(Vec<QubitId>, Vec<bool>),
    Release(Vec<QubitId>, Release),
}

#[derive(Debug, Clone)]
pub(crate) struct Branch {
    pub options: usize,
    pub choice: usize,
    pub probability: f64,
}

pub(crate) enum Sampler {
    Random,
    /// Follows the given outcome indices, then the first outcome.
    Scripted {
        script: Vec<usize>,
        taken: Vec<Branch>,
    },
}

impl Sampler {
    pub fn scripted(script: Vec<usize>) -> Self {
        Sampler::Scripted {
            script,
            taken: Vec::new(),
        }
    }
}

/// A register location: the whole register or one bit of it.
#[derive(Debug, Clone)]
struct Place {
    name: String,
    index: Option<usize>,
}

enum Arg {
    Quantum(Place, Vec<Cell>),
    Classical(Value),
}

pub(crate) struct Machine<'p> {
    prog: &'p Program,
    opts: &'p RunOptions,
    pub store: QuantumStore,
    sampler: Sampler,
    pub log: Vec<MeasurementRecord>,
    pub gate_log: Option<Vec<GateEvent>>,
    pub forbid_measure: bool,
    /// Effective control of the innermost `qif`.
    control: Option<QubitId>,
    /// Every `qif` control in scope.
    guards: Vec<QubitId>,
    trace: Option<Vec<Event>>,
    virtual_init: HashMap<QubitId, bool>,
    span: Span,
    steps: u64,
    depth: usize,
}

fn qerr_kind(e: &QStateError) -> ErrorKind {
    match e {
        QStateError::Capacity { .. } => ErrorKind::Resource,
        QStateError::NotClassical { .. } => ErrorKind::Assertion,
        QStateError::DuplicateQubit(_) => ErrorKind::Mode,
        _ => ErrorKind::Internal,
    }
}

fn cells_from_ids(ids: &[QubitId]) -> Vec<Cell> {
    ids.iter().rev().map(|&q| Cell::Q(q)).collect()
}

/// Qubits of `cells`, most significant first.
fn msb_qubits(cells: &[Cell]) -> Vec<QubitId> {
    cells
        .iter()
        .rev()
        .filter_map(|c| match c {
            Cell::Q(q) => Some(*q),
            Cell::C(_) => None,
        })
        .collect()
}

fn int_to_bits(v: i64, w: usize) -> Option<Vec<bool>> {
    if v < 0 || (w < 63 && v >> w != 0) {
        return None;
    }
    Some((0..w).rev().map(|k| k < 63 && (v >> k) & 1 == 1).collect())
}

impl<'p> Machine<'p> {
    pub fn new(prog: &'p Program, opts: &'p RunOptions, sampler: Sampler) -> Self {
        Machine {
            prog,
            opts,
            store: QuantumStore::new(opts.max_qubits, opts.seed),
            sampler,
            log: Vec::new(),
            gate_log: opts.trace.then(Vec::new),
            forbid_measure: false,
            control: None,
            guards: Vec::new(),
            trace: None,
            virtual_init: HashMap::new(),
            span: Span::new(0, 0),
            steps: 0,
            depth: 0,
        }
    }

    pub fn branches(&self) -> &[Branch] {
        match &self.sampler {
            Sampler::Scripted { taken, .. } => taken,
            Sampler::Random => &[],
        }
    }

    fn err(&self, kind: ErrorKind, msg: impl Into<String>) -> RuntimeError {
        RuntimeError::new(kind, self.span, msg)
    }

    fn mode_err(&self, msg: impl Into<String>) -> RuntimeError {
        self.err(ErrorKind::Mode, msg)
    }

    fn qerr(&self, e: QStateError) -> RuntimeError {
        self.err(qerr_kind(&e), e.to_string())
    }

    fn arith(&self, msg: String) -> RuntimeError {
        self.err(ErrorKind::Arithmetic, msg)
    }

    fn permissive(&self) -> bool {
        self.opts.mode == ExecMode::Permissive
    }

    // ----- entry binding -------------------------------------------------

    /// Binds the classical parameters of `proc` from `inputs`.
    pub fn bind_classical(&mut self, proc: &Proc, inputs: &Inputs) -> R<Env> {
        for name in inputs.keys() {
            if !proc.params.iter().any(|p| &p.name == name) {
                return Err(self.err(
                    ErrorKind::Input,
                    format!("`{}` has no parameter `{name}`", proc.name),
                ));
            }
        }
        let mut env = Env::new();
        for par in proc.params.iter().filter(|p| !p.quantum) {
            let Some(input) = inputs.get(&par.name) else {
                return Err(self.err(ErrorKind::Input, format!("missing input for `{}`", par.name)));
            };
            let v = self.classical_input(par, input, &env)?;
            env.insert(par.name.clone(), v);
        }
        Ok(env)
    }

    pub fn width_expr(&mut self, e: &Expr, env: &Env) -> R<usize> {
        let mut scratch = env.clone();
        let v = self.eval(e, &mut scratch)?;
        let w = value::as_int(&v).map_err(|m| self.err(ErrorKind::Input, m))?;
        if !(1..=MAX_WIDTH).contains(&w) {
            return Err(self.err(ErrorKind::Input, format!("register width {w} out of range")));
        }
        Ok(w as usize)
    }

    fn classical_input(&mut self, par: &Param, input: &Input, env: &Env) -> R<Value> {
        let bad = |m: &Machine, what: &str| {
            m.err(ErrorKind::Input, format!("input for `{}`: {what}", par.name))
        };
        match (&par.ty, input) {
            (_, Input::State(_)) => Err(bad(self, "amplitudes given for a classical parameter")),
            (Some(ParamType::Int), Input::Int(v)) => Ok(Value::Int(*v)),
            (Some(ParamType::Int), Input::Text(t)) => t
                .trim()
                .parse::<i64>()
                .map(Value::Int)
                .map_err(|_| bad(self, "expected an integer")),
            (Some(ParamType::Int), Input::Bits(b)) => value::as_int(&Value::from_msb(b))
                .map(Value::Int)
                .map_err(|m| bad(self, &m)),
            (Some(ParamType::Int), Input::Real(_)) => Err(bad(self, "expected an integer")),
            (Some(ParamType::Real), Input::Int(v)) => Ok(Value::Real(*v as f64)),
            (Some(ParamType::Real), Input::Real(v)) => Ok(Value::Real(*v)),
            (Some(ParamType::Real), Input::Text(t)) => match t.trim().parse::<f64>() {
                Ok(r) if r.is_finite() => Ok(Value::Real(r)),
                _ => Err(bad(self, "expected a real number")),
            },
            (Some(ParamType::Real), Input::Bits(_)) => Err(bad(self, "expected a real number")),
            (Some(ParamType::Bits(w)), _) => {
                let w = self.width_expr(w, env)?;
                let bits = self.input_bits(par, input, Some(w))?;
                Ok(Value::from_msb(&bits))
            }
            (None, Input::Int(v)) => Ok(Value::Int(*v)),
            (None, Input::Real(v)) => Ok(Value::Real(*v)),
            (None, Input::Bits(b)) => Ok(Value::from_msb(b)),
            (None, Input::Text(t)) => {
                let t = t.trim();
                if t.starts_with("0b") {
                    value::parse_bit_string(t)
                        .map(|b| Value::from_msb(&b))
                        .ok_or_else(|| bad(self, "malformed bit literal"))
                } else if let Ok(i) = t.parse::<i64>() {
                    Ok(Value::Int(i))
                } else {
                    match t.parse::<f64>() {
                        Ok(r) if r.is_finite() => Ok(Value::Real(r)),
                        _ => Err(bad(self, "expected a number or a bit literal")),
                    }
                }
            }
        }
    }

    fn input_bits(&self, par: &Param, input: &Input, width: Option<usize>) -> R<Vec<bool>> {
        let bad = |what: String| self.err(ErrorKind::Input, format!("input for `{}`: {what}", par.name));
        let bits = match input {
            Input::Bits(b) => b.clone(),
            Input::Int(v) => match width {
                Some(w) => int_to_bits(*v, w).ok_or_else(|| bad(format!("{v} does not fit in {w} bits")))?,
                None => value::init_bits(&Value::Int(*v)).map_err(bad)?,
            },
            Input::Text(t) => {
                let t = t.trim();
                match (value::parse_bit_string(t), width) {
                    (Some(b), Some(w)) if b.len() == w => b,
                    (Some(b), None) => b,
                    _ => match (t.parse::<i64>(), width) {
                        (Ok(v), Some(w)) => int_to_bits(v, w)
                            .ok_or_else(|| bad(format!("{v} does not fit in {w} bits")))?,
                        _ => return Err(bad(format!("expected a bit string, got `{t}`"))),
                    },
                }
            }
            Input::Real(_) | Input::State(_) => return Err(bad("expected bits".into())),
        };
        if bits.is_empty() || bits.len() as i64 > MAX_WIDTH {
            return Err(bad("register width out of range".into()));
        }
        if let Some(w) = width {
            if bits.len() != w {
                return Err(bad(format!("expected {w} bits, got {}", bits.len())));
            }
        }
        Ok(bits)
    }

    /// Binds every parameter of the entry proc. Quantum parameters without
    /// an input start in the all-zero state.
    pub fn bind_entry(&mut self, proc: &Proc, inputs: &Inputs) -> R<Env> {
        let mut env = self.bind_classical(proc, inputs)?;
        for par in proc.params.iter().filter(|p| p.quantum) {
            let width = match &par.ty {
                Some(ParamType::Bits(w)) => Some(self.width_expr(w, &env)?),
                Some(_) => {
                    return Err(self.err(
                        ErrorKind::Input,
                        format!("quantum parameter `{}` must have a bits type", par.name),
                    ))
                }
                None => None,
            };
            let ids = match inputs.get(&par.name) {
                Some(Input::State(amps)) => {
                    if let Some(w) = width {
                        if amps.len() != 1 << w.min(62) {
                            return Err(self.err(
                                ErrorKind::Input,
                                format!("`{}` needs {} amplitudes", par.name, 1u64 << w.min(62)),
                            ));
                        }
                    }
                    self.store.prepare(amps).map_err(|e| self.err(ErrorKind::Input, e.to_string()))?
                }
                Some(input) => {
                    let bits = self.input_bits(par, input, width)?;
                    self.store.allocate_bits(&bits).map_err(|e| self.qerr(e))?
                }
                None => {
                    let bits = vec![false; width.unwrap_or(1)];
                    self.store.allocate_bits(&bits).map_err(|e| self.qerr(e))?
                }
            };
            env.insert(par.name.clone(), Value::from_qubits_msb(&ids));
        }
        Ok(env)
    }

    pub fn run_body(&mut self, proc: &Proc, env: &mut Env) -> R<()> {
        self.span = proc.span;
        self.exec_block(&proc.body, env)
    }

    // ----- store access, trace aware -------------------------------------

    fn alloc(&mut self, bits: &[bool]) -> R<Vec<QubitId>> {
        if bits.is_empty() {
            return Ok(Vec::new());
        }
        if let Some(t) = self.trace.as_mut() {
            let ids = self.store.reserve_ids(bits.len());
            for (q, b) in ids.iter().zip(bits) {
                self.virtual_init.insert(*q, *b);
            }
            t.push(Event::Alloc(ids.clone(), bits.to_vec()));
            return Ok(ids);
        }
        self.store.allocate_bits(bits).map_err(|e| self.qerr(e))
    }

    fn emit_gate(&mut self, g: &GateSpec, qs: &[QubitId]) -> R<()> {
        if let Some(q) = qs.iter().find(|q| self.guards.contains(q)) {
            return Err(self.mode_err(format!("qif control {q} is used inside its own body")));
        }
        match self.control {
            Some(c) => {
                let cg = gates::controlled(g, 1);
                let mut t = Vec::with_capacity(qs.len() + 1);
                t.push(c);
                t.extend_from_slice(qs);
                self.emit_raw(&cg, &t)
            }
            None => self.emit_raw(g, qs),
        }
    }

    fn emit_raw(&mut self, g: &GateSpec, qs: &[QubitId]) -> R<()> {
        let mut seen = HashSet::new();
        if let Some(q) = qs.iter().find(|q| !seen.insert(**q)) {
            return Err(self.mode_err(format!("qubit {q} appears twice in one `{}`", g.name())));
        }
        if let Some(t) = self.trace.as_mut() {
            t.push(Event::Gate(g.clone(), qs.to_vec()));
            return Ok(());
        }
        self.store.apply_unitary(g, qs).map_err(|e| self.qerr(e))?;
        if let Some(log) = self.gate_log.as_mut() {
            log.push(GateEvent {
                gate: g.name().to_string(),
                qubits: qs.to_vec(),
            });
        }
        Ok(())
    }

    /// Measures `qs` (most significant first) and returns the outcome.
    fn measure_qubits(&mut self, qs: &[QubitId], record: bool) -> R<String> {
        if qs.is_empty() {
            return Ok(String::new());
        }
        if self.trace.is_some() {
            return Err(self.mode_err("measurement inside a reversed block"));
        }
        if self.control.is_some() {
            return Err(self.mode_err("measurement inside a qif body"));
        }
        if self.forbid_measure {
            return Err(self.err(ErrorKind::Unsupported, "measurement in a proc run as a unitary"));
        }
        let rec = match &mut self.sampler {
            Sampler::Random => self.store.measure(qs).map_err(|e| RuntimeError::new(qerr_kind(&e), self.span, e.to_string()))?,
            Sampler::Scripted { script, taken } => {
                if taken.len() >= MAX_PATH_EVENTS {
                    return Err(RuntimeError::new(
                        ErrorKind::Resource,
                        self.span,
                        format!("more than {MAX_PATH_EVENTS} measurements on one path"),
                    ));
                }
                let mut dist = self
                    .store
                    .outcome_distribution(qs)
                    .map_err(|e| RuntimeError::new(qerr_kind(&e), self.span, e.to_string()))?;
                dist.retain(|(_, p)| *p > PATH_PRUNE);
                let choice = script.get(taken.len()).copied().unwrap_or(0);
                let (outcome, p) = dist[choice.min(dist.len() - 1)].clone();
                self.store
                    .collapse(qs, &outcome)
                    .map_err(|e| RuntimeError::new(qerr_kind(&e), self.span, e.to_string()))?;
                taken.push(Branch {
                    options: dist.len(),
                    choice,
                    probability: p,
                });
                MeasurementRecord {
                    qubits: qs.to_vec(),
                    outcome,
                    probability: p,
                }
            }
        };
        let outcome = rec.outcome.clone();
        if record {
            self.log.push(rec);
        }
        Ok(outcome)
    }

    /// Releases `qs` after checking they hold a basis state; returns it.
    fn release_assert(&mut self, qs: &[QubitId], expect: Option<&[bool]>) -> R<Vec<bool>> {
        if qs.is_empty() {
            return Ok(Vec::new());
        }
        if let Some(t) = self.trace.as_mut() {
            let bits: Option<Vec<bool>> = qs.iter().map(|q| self.virtual_init.get(q).copied()).collect();
            let Some(bits) = bits else {
                return Err(RuntimeError::new(
                    ErrorKind::Unsupported,
                    self.span,
                    "assert_classical inside a reversed block on a register from outside it",
                ));
            };
            t.push(Event::Release(qs.to_vec(), Release::Assert));
            return Ok(bits);
        }
        let s = self
            .store
            .assert_classical(qs, self.opts.assert_tol)
            .map_err(|e| self.qerr(e))?;
        let bits: Vec<bool> = s.chars().map(|c| c == '1').collect();
        if let Some(e) = expect {
            if e != bits.as_slice() {
                return Err(self.err(
                    ErrorKind::Assertion,
                    format!(
                        "ancilla left in |{}⟩, expected |{}⟩",
                        value::bits_to_string(&bits),
                        value::bits_to_string(e)
                    ),
                ));
            }
        }
        Ok(bits)
    }

    fn release_dissipate(&mut self, qs: &[QubitId]) -> R<()> {
        if qs.is_empty() {
            return Ok(());
        }
        if let Some(t) = self.trace.as_mut() {
            if qs.iter().any(|q| !self.virtual_init.contains_key(q)) {
                return Err(self.mode_err("dissipation inside a reversed block of a register from outside it"));
            }
            t.push(Event::Release(qs.to_vec(), Release::Dissipate));
            return Ok(());
        }
        self.measure_qubits(qs, false).map(|_| ())
    }

    // ----- registers -----------------------------------------------------

    fn place(&mut self, r: &RegRef, env: &mut Env) -> R<Place> {
        let index = match &r.index {
            None => None,
            Some(e) => {
                let v = self.eval(e, env)?;
                let i = value::as_int(&v).map_err(|m| self.arith(m))?;
                Some(usize::try_from(i).map_err(|_| self.err(ErrorKind::Arithmetic, format!("negative index {i}")))?)
            }
        };
        Ok(Place {
            name: r.name.clone(),
            index,
        })
    }

    fn lookup<'e>(&self, env: &'e Env, name: &str) -> R<&'e Value> {
        env.get(name).ok_or_else(|| self.mode_err(format!("`{name}` is not defined")))
    }

    fn read_cells(&self, p: &Place, env: &Env) -> R<Vec<Cell>> {
        let v = self.lookup(env, &p.name)?;
        match (v, p.index) {
            (Value::Bits(c), None) => Ok(c.clone()),
            (_, Some(i)) => value::index_value(v, i as i64)
                .map(|c| vec![c])
                .map_err(|m| self.arith(format!("`{}`: {m}", p.name))),
            (other, None) => Err(self.mode_err(format!("`{}` holds the {} {other}, not bits", p.name, other.kind_name()))),
        }
    }

    fn write_cells(&self, p: &Place, cells: Vec<Cell>, env: &mut Env) -> R<()> {
        let Some(i) = p.index else {
            env.insert(p.name.clone(), Value::Bits(cells));
            return Ok(());
        };
        if cells.len() != 1 {
            return Err(self.mode_err(format!("`{}[{i}]` holds one bit", p.name)));
        }
        match env.get_mut(&p.name) {
            Some(Value::Bits(c)) if i < c.len() => {
                c[i] = cells[0];
                Ok(())
            }
            Some(Value::Int(x)) if i < 63 => match cells[0] {
                Cell::C(b) => {
                    *x = (*x & !(1 << i)) | ((b as i64) << i);
                    Ok(())
                }
                Cell::Q(_) => Err(self.mode_err(format!("`{}` is an integer and cannot hold a qubit", p.name))),
            },
            Some(_) => Err(self.arith(format!("index {i} out of range for `{}`", p.name))),
            None => Err(self.mode_err(format!("`{}` is not defined", p.name))),
        }
    }

    /// Cells of a register used as a quantum operand. Classical bits are
    /// promoted when `promote` is set or in permissive mode.
    fn quantum_cells(&mut self, p: &Place, env: &mut Env, promote: bool) -> R<Vec<Cell>> {
        let cells = match (self.lookup(env, &p.name)?, p.index) {
            (Value::Int(v), None) => {
                let bits = value::init_bits(&Value::Int(*v)).map_err(|m| self.mode_err(format!("`{}`: {m}", p.name)))?;
                bits.iter().rev().map(|&b| Cell::C(b)).collect()
            }
            _ => self.read_cells(p, env)?,
        };
        if cells.iter().all(|c| matches!(c, Cell::Q(_))) {
            return Ok(cells);
        }
        if !promote && !self.permissive() {
            return Err(self.mode_err(format!(
                "`{}` is classical here; promote it with `~{} <- {}`",
                p.name, p.name, p.name
            )));
        }
        let mut out = cells.clone();
        let classical: Vec<usize> = (0..cells.len()).rev().filter(|&i| matches!(cells[i], Cell::C(_))).collect();
        let bits: Vec<bool> = classical.iter().map(|&i| matches!(cells[i], Cell::C(true))).collect();
        let ids = self.alloc(&bits)?;
        for (&i, q) in classical.iter().zip(ids) {
            out[i] = Cell::Q(q);
        }
        self.write_cells(p, out.clone(), env)?;
        Ok(out)
    }

    /// Measures the quantum cells at `p` in place.
    fn measure_place(&mut self, p: &Place, env: &mut Env, record: bool) -> R<Vec<Cell>> {
        let cells = self.read_cells(p, env)?;
        let qs = msb_qubits(&cells);
        let outcome = self.measure_qubits(&qs, record)?;
        let mut bits = outcome.chars().map(|c| c == '1');
        let mut out = cells;
        for c in out.iter_mut().rev() {
            if matches!(c, Cell::Q(_)) {
                *c = Cell::C(bits.next().expect("one outcome bit per qubit"));
            }
        }
        self.write_cells(p, out.clone(), env)?;
        Ok(out)
    }

    /// Makes room for a new value at `p`: quantum contents there are
    /// dissipated in permissive mode and an error in strict mode.
    fn overwrite(&mut self, p: &Place, env: &mut Env) -> R<()> {
        if !env.contains_key(&p.name) {
            return Ok(());
        }
        let Ok(cells) = self.read_cells(p, env) else {
            return Ok(());
        };
        let qs = msb_qubits(&cells);
        if qs.is_empty() {
            return Ok(());
        }
        if !self.permissive() {
            return Err(self.mode_err(format!("assignment would discard quantum register `{}`", p.name)));
        }
        self.release_dissipate(&qs)
    }

    fn classicalize(&mut self, v: Value, what: &str) -> R<Value> {
        if v.is_classical() {
            return Ok(v);
        }
        if !self.permissive() {
            return Err(self.mode_err(format!("{what} is still quantum")));
        }
        let Value::Bits(cells) = v else { unreachable!("only bits hold qubits") };
        let qs = msb_qubits(&cells);
        let outcome = self.measure_qubits(&qs, true)?;
        let mut bits = outcome.chars().map(|c| c == '1');
        let out = cells
            .into_iter()
            .rev()
            .map(|c| match c {
                Cell::Q(_) => Cell::C(bits.next().expect("one bit per qubit")),
                c => c,
            })
            .collect::<Vec<_>>();
        Ok(Value::Bits(out.into_iter().rev().collect()))
    }

    fn assign_classical(&mut self, l: &RegRef, v: Value, env: &mut Env) -> R<()> {
        let p = self.place(l, env)?;
        self.overwrite(&p, env)?;
        match p.index {
            None => {
                env.insert(p.name, v);
                Ok(())
            }
            Some(_) => {
                let b = value::as_bit(&v).map_err(|m| self.arith(m))?;
                self.write_cells(&p, vec![Cell::C(b)], env)
            }
        }
    }

    fn bind_quantum(&mut self, l: &RegRef, cells: Vec<Cell>, env: &mut Env) -> R<()> {
        let p = self.place(l, env)?;
        if p.index.is_none() && env.get(&p.name) == Some(&Value::Bits(cells.clone())) {
            return Ok(());
        }
        self.overwrite(&p, env)?;
        self.write_cells(&p, cells, env)
    }

    // ----- expressions ---------------------------------------------------

    fn eval(&mut self, e: &Expr, env: &mut Env) -> R<Value> {
        match e {
            Expr::Int(v) => Ok(Value::Int(*v)),
            Expr::Real(v) => Ok(Value::Real(*v)),
            Expr::Bits(b) => Ok(Value::from_msb(b)),
            Expr::Pi => Ok(Value::Real(std::f64::consts::PI)),
            Expr::Ref(r) => self.read_classical(r, env),
            Expr::Unary(op, x) => {
                let v = self.eval(x, env)?;
                value::unop(*op, &v).map_err(|m| self.arith(m))
            }
            Expr::Binary(op, a, b) => {
                let x = self.eval(a, env)?;
                let y = self.eval(b, env)?;
                value::binop(*op, &x, &y).map_err(|m| self.arith(m))
            }
            Expr::Call(c) => self.eval_func(c, env),
        }
    }

    fn eval_func(&mut self, c: &Call, env: &mut Env) -> R<Value> {
        let mut args = Vec::with_capacity(c.args.len());
        for a in &c.args {
            args.push(self.eval(a, env)?);
        }
        match (c.name.as_str(), args.as_slice()) {
            ("zeros", [n]) => {
                let n = value::as_int(n).map_err(|m| self.arith(m))?;
                if !(1..=MAX_WIDTH).contains(&n) {
                    return Err(self.arith(format!("zeros({n}): width out of range")));
                }
                Ok(Value::Bits(vec![Cell::C(false); n as usize]))
            }
            (f @ ("min" | "max"), [a, b]) => {
                let pick_first = |x: f64, y: f64| if f == "min" { x <= y } else { x >= y };
                match (a, b) {
                    (Value::Real(_), _) | (_, Value::Real(_)) => {
                        let x = if let Value::Real(r) = a { *r } else { value::as_int(a).map_err(|m| self.arith(m))? as f64 };
                        let y = if let Value::Real(r) = b { *r } else { value::as_int(b).map_err(|m| self.arith(m))? as f64 };
                        Ok(Value::Real(if pick_first(x, y) { x } else { y }))
                    }
                    _ => {
                        let x = value::as_int(a).map_err(|m| self.arith(m))?;
                        let y = value::as_int(b).map_err(|m| self.arith(m))?;
                        Ok(Value::Int(if pick_first(x as f64, y as f64) { x } else { y }))
                    }
                }
            }
            _ => Err(self.err(
                ErrorKind::Unsupported,
                format!("`{}` cannot be used inside an expression", c.name),
            )),
        }
    }

    fn read_classical(&mut self, r: &RegRef, env: &mut Env) -> R<Value> {
        let p = self.place(r, env)?;
        let v = self.lookup(env, &p.name)?.clone();
        let v = match p.index {
            None => v,
            Some(i) => match value::index_value(&v, i as i64).map_err(|m| self.arith(format!("`{}`: {m}", p.name)))? {
                Cell::C(b) => return Ok(Value::Int(b as i64)),
                Cell::Q(q) => Value::Bits(vec![Cell::Q(q)]),
            },
        };
        if v.is_classical() {
            return Ok(v);
        }
        if !self.permissive() {
            return Err(self.mode_err(format!(
                "classical use of quantum register `{}`; measure it first",
                p.name
            )));
        }
        let cells = self.measure_place(&p, env, true)?;
        Ok(match p.index {
            Some(_) => Value::Int(matches!(cells[0], Cell::C(true)) as i64),
            None => Value::Bits(cells),
        })
    }

    // ----- statements ----------------------------------------------------

    fn exec_block(&mut self, body: &[Stmt], env: &mut Env) -> R<()> {
        for s in body {
            self.exec_stmt(s, env)?;
        }
        Ok(())
    }

    fn exec_stmt(&mut self, s: &Stmt, env: &mut Env) -> R<()> {
        self.span = s.span();
        self.steps += 1;
        if self.steps > self.opts.max_steps {
            return Err(self.err(
                ErrorKind::Resource,
                format!("step budget of {} exhausted", self.opts.max_steps),
            ));
        }
        match s {
            Stmt::Assign {
                lhs,
                rhs: Rhs::Expr(Expr::Call(c)),
                ..
            } if self.is_operation(&c.name) => self.exec_call(c, lhs, env),
            Stmt::Assign {
                lhs,
                rhs: Rhs::Expr(e),
                ..
            } => self.exec_assign(lhs, e, env),
            Stmt::Assign {
                lhs,
                rhs: Rhs::Reversify(c),
                ..
            } => self.exec_reversify(lhs, c, env),
            Stmt::Call { call, .. } => {
                if !self.is_operation(&call.name) {
                    return Err(self.mode_err(format!("unknown proc `{}`", call.name)));
                }
                self.exec_call(call, &[], env)
            }
            Stmt::QIf { control, body, .. } => self.exec_qif(control, body, env),
            Stmt::For {
                var,
                from,
                dir,
                to,
                body,
                ..
            } => self.exec_for(var, from, *dir, to, body, env),
            Stmt::Reverse {
                target: ReverseTarget::Block(body),
                ..
            } => self.exec_reverse_block(body, env),
            Stmt::Reverse {
                target: ReverseTarget::Stmt(inner),
                ..
            } => match inner.as_ref() {
                Stmt::Call { call, .. } => self.exec_reverse_call(call, &[], env),
                Stmt::Assign {
                    lhs,
                    rhs: Rhs::Expr(Expr::Call(c)),
                    ..
                } => self.exec_reverse_call(c, lhs, env),
                _ => Err(self.err(ErrorKind::Unsupported, "`reverse` needs a call or a block")),
            },
            Stmt::Dissipate { target, reinit, .. } => self.exec_dissipate(target, reinit, env),
            Stmt::AssertClassical {
                lhs, target, proof, ..
            } => self.exec_assert(lhs, target, proof.as_deref(), env),
        }
    }

    fn is_operation(&self, name: &str) -> bool {
        builtin_signature(name).is_some() || self.prog.proc(name).is_some()
    }

    fn exec_assign(&mut self, lhs: &[RegRef], e: &Expr, env: &mut Env) -> R<()> {
        let [l] = lhs else {
            return Err(self.mode_err("only a call can assign several registers"));
        };
        if let Expr::Ref(r) = e {
            if r.quantum && !l.quantum {
                let rp = self.place(r, env)?;
                let cells = self.measure_place(&rp, env, true)?;
                let v = match rp.index {
                    Some(_) => Value::Int(matches!(cells[0], Cell::C(true)) as i64),
                    None => Value::Bits(cells),
                };
                return self.assign_classical(l, v, env);
            }
            if l.quantum && !r.quantum && l.name == r.name {
                let p = self.place(r, env)?;
                self.quantum_cells(&p, env, true)?;
                return Ok(());
            }
        }
        let v = self.eval(e, env)?;
        if l.quantum {
            let bits = value::init_bits(&v).map_err(|m| self.mode_err(m))?;
            let ids = self.alloc(&bits)?;
            self.bind_quantum(l, cells_from_ids(&ids), env)
        } else {
            self.assign_classical(l, v, env)
        }
    }

    fn quantum_arg(&mut self, call: &Call, a: &Expr, lhs: &[RegRef], env: &mut Env) -> R<(Place, Vec<Cell>)> {
        let Expr::Ref(r) = a else {
            return Err(self.mode_err(format!("`{}` expects a register argument", call.name)));
        };
        let p = self.place(r, env)?;
        let promote = !r.quantum && lhs.iter().any(|l| l.quantum && l.name == r.name);
        let cells = self.quantum_cells(&p, env, promote)?;
        Ok((p, cells))
    }

    fn gate_params(&mut self, call: &Call, np: usize, env: &mut Env) -> R<GateSpec> {
        let mut params = Vec::with_capacity(np);
        for a in &call.args[..np] {
            let v = self.eval(a, env)?;
            params.push(match v {
                Value::Real(r) => r,
                other => value::as_int(&other).map_err(|m| self.arith(m))? as f64,
            });
        }
        gates::builtin(&call.name, &params)
            .expect("caller checked the name")
            .map_err(|e| self.arith(e.to_string()))
    }

    /// Applies `g` to registers: one application if each is a single
    /// qubit, else bit by bit.
    fn apply_gate_regs(&mut self, g: &GateSpec, regs: &[Vec<Cell>]) -> R<()> {
        let qubit = |c: &Cell| match c {
            Cell::Q(q) => *q,
            Cell::C(_) => unreachable!("operands are promoted first"),
        };
        let w = regs[0].len();
        if regs.iter().any(|r| r.len() != w) {
            let ws: Vec<String> = regs.iter().map(|r| r.len().to_string()).collect();
            return Err(self.mode_err(format!(
                "`{}` applied to registers of widths {}",
                g.name(),
                ws.join(", ")
            )));
        }
        for i in 0..w {
            let qs: Vec<QubitId> = regs.iter().map(|r| qubit(&r[i])).collect();
            self.emit_gate(g, &qs)?;
        }
        Ok(())
    }

    fn exec_call(&mut self, call: &Call, lhs: &[RegRef], env: &mut Env) -> R<()> {
        if let Some((np, arity)) = builtin_signature(&call.name) {
            if call.args.len() != np + arity {
                return Err(self.mode_err(format!("`{}` takes {} arguments", call.name, np + arity)));
            }
            let g = self.gate_params(call, np, env)?;
            let mut regs = Vec::with_capacity(arity);
            let mut places = Vec::with_capacity(arity);
            for a in &call.args[np..] {
                let (p, cells) = self.quantum_arg(call, a, lhs, env)?;
                regs.push(cells);
                places.push(p);
            }
            self.apply_gate_regs(&g, &regs)?;
            let names = vec![None; call.args.len()];
            let quantum: Vec<bool> = (0..call.args.len()).map(|k| k >= np).collect();
            let (binding, _) = bind_lhs(lhs, &call.args, &names, &quantum, &[]);
            for (l, b) in lhs.iter().zip(binding) {
                match b {
                    LhsBinding::InPlace(k) if k >= np => {
                        if !l.quantum {
                            self.measure_place(&places[k - np], env, true)?;
                        }
                    }
                    _ => return Err(self.mode_err(format!("`{}` has no output for `{}`", call.name, l.name))),
                }
            }
            return Ok(());
        }
        let callee = self
            .prog
            .proc(&call.name)
            .ok_or_else(|| self.mode_err(format!("unknown proc `{}`", call.name)))?;
        if callee.params.len() != call.args.len() {
            return Err(self.mode_err(format!("`{}` takes {} arguments", call.name, callee.params.len())));
        }
        let args = self.eval_args(callee, call, lhs, env)?;
        let (outs, finals) = self.invoke(callee, &args)?;
        self.write_back(&args, finals, env)?;

        let names: Vec<Option<&str>> = callee.params.iter().map(|p| Some(p.name.as_str())).collect();
        let quantum: Vec<bool> = callee.params.iter().map(|p| p.quantum).collect();
        let (binding, _) = bind_lhs(lhs, &call.args, &names, &quantum, &callee.outputs);
        for (l, b) in lhs.iter().zip(binding) {
            match b {
                LhsBinding::Output(oi) => {
                    let v = outs[oi].clone();
                    if l.quantum {
                        let cells = self.quantize(v, &format!("output `{}` of `{}`", callee.outputs[oi].name, call.name))?;
                        self.bind_quantum(l, cells, env)?;
                    } else {
                        let v = self.classicalize(v, &format!("output `{}` of `{}`", callee.outputs[oi].name, call.name))?;
                        let p = self.place(l, env)?;
                        if p.index.is_none() && env.get(&p.name) == Some(&v) {
                            continue;
                        }
                        self.assign_classical(l, v, env)?;
                    }
                }
                LhsBinding::InPlace(k) => {
                    if let (false, Arg::Quantum(p, _)) = (l.quantum, &args[k]) {
                        self.measure_place(p, env, true)?;
                    }
                }
                LhsBinding::Unbound => {
                    return Err(self.mode_err(format!("`{}` has no output for `{}`", call.name, l.name)))
                }
            }
        }
        Ok(())
    }

    fn quantize(&mut self, v: Value, what: &str) -> R<Vec<Cell>> {
        let cells = match v {
            Value::Bits(c) => c,
            other => return Err(self.mode_err(format!("{what} is the {} {other}", other.kind_name()))),
        };
        if cells.iter().all(|c| matches!(c, Cell::Q(_))) {
            return Ok(cells);
        }
        if !self.permissive() {
            return Err(self.mode_err(format!("{what} is classical")));
        }
        let mut out = cells.clone();
        let idx: Vec<usize> = (0..cells.len()).rev().filter(|&i| matches!(cells[i], Cell::C(_))).collect();
        let bits: Vec<bool> = idx.iter().map(|&i| matches!(cells[i], Cell::C(true))).collect();
        let ids = self.alloc(&bits)?;
        for (&i, q) in idx.iter().zip(ids) {
            out[i] = Cell::Q(q);
        }
        Ok(out)
    }

    fn eval_args(&mut self, callee: &Proc, call: &Call, lhs: &[RegRef], env: &mut Env) -> R<Vec<Arg>> {
        let mut args = Vec::with_capacity(call.args.len());
        for (par, a) in callee.params.iter().zip(&call.args) {
            if par.quantum {
                let (p, cells) = self.quantum_arg(call, a, lhs, env)?;
                args.push(Arg::Quantum(p, cells));
            } else {
                args.push(Arg::Classical(self.eval(a, env)?));
            }
        }
        Ok(args)
    }

    fn write_back(&mut self, args: &[Arg], finals: Vec<Value>, env: &mut Env) -> R<()> {
        for (a, v) in args.iter().zip(finals) {
            if let Arg::Quantum(p, before) = a {
                match v {
                    Value::Bits(c) if c.len() == before.len() => self.write_cells(p, c, env)?,
                    _ => {
                        return Err(self.mode_err(format!(
                            "register `{}` changed shape inside the call",
                            p.name
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    /// Runs `callee` in a fresh frame; returns its outputs and the final
    /// values of its parameters.
    fn invoke(&mut self, callee: &Proc, args: &[Arg]) -> R<(Vec<Value>, Vec<Value>)> {
        if self.depth >= MAX_CALL_DEPTH {
            return Err(self.err(ErrorKind::Resource, "call depth limit reached"));
        }
        let call_span = self.span;
        let mut frame = Env::new();
        for (par, a) in callee.params.iter().zip(args) {
            let v = match a {
                Arg::Quantum(_, cells) => Value::Bits(cells.clone()),
                Arg::Classical(v) => v.clone(),
            };
            frame.insert(par.name.clone(), v);
        }
        for par in &callee.params {
            let v = frame[&par.name].clone();
            let fixed = match (&par.ty, v) {
                (None, v) => v,
                (Some(ParamType::Int), v @ Value::Int(_)) => v,
                (Some(ParamType::Int), v @ Value::Bits(_)) if !par.quantum => {
                    Value::Int(value::as_int(&v).map_err(|m| self.arith(m))?)
                }
                (Some(ParamType::Real), Value::Int(i)) => Value::Real(i as f64),
                (Some(ParamType::Real), v @ Value::Real(_)) => v,
                (Some(ParamType::Bits(w)), v) => {
                    self.span = call_span;
                    let w = self.width_expr(w, &frame)?;
                    match v {
                        Value::Bits(c) if c.len() == w => Value::Bits(c),
                        Value::Int(i) if !par.quantum => {
                            Value::from_msb(&int_to_bits(i, w).ok_or_else(|| {
                                self.mode_err(format!("{i} does not fit in `{}: bits[{w}]`", par.name))
                            })?)
                        }
                        other => {
                            return Err(self.mode_err(format!(
                                "argument for `{}` of `{}` has the wrong width: expected {w}, got {other}",
                                par.name, callee.name
                            )))
                        }
                    }
                }
                (Some(_), other) => {
                    return Err(self.mode_err(format!(
                        "argument for `{}` of `{}` has the wrong type: {}",
                        par.name,
                        callee.name,
                        other.kind_name()
                    )))
                }
            };
            frame.insert(par.name.clone(), fixed);
        }
        self.depth += 1;
        self.exec_block(&callee.body, &mut frame)?;
        self.depth -= 1;
        self.span = call_span;
        let mut outs = Vec::with_capacity(callee.outputs.len());
        for o in &callee.outputs {
            outs.push(
                frame
                    .get(&o.name)
                    .cloned()
                    .ok_or_else(|| self.mode_err(format!("`{}` did not set its output `{}`", callee.name, o.name)))?,
            );
        }
        let finals = callee
            .params
            .iter()
            .map(|p| frame.remove(&p.name).unwrap_or(Value::Int(0)))
            .collect();
        Ok((outs, finals))
    }

    fn exec_qif(&mut self, control: &RegRef, body: &[Stmt], env: &mut Env) -> R<()> {
        let p = self.place(control, env)?;
        let cells = self.read_cells(&p, env)?;
        let [cell] = cells.as_slice() else {
            return Err(self.mode_err(format!(
                "qif control `{}` has {} bits; use one qubit",
                p.name,
                cells.len()
            )));
        };
        let before: HashSet<String> = env.keys().cloned().collect();
        let c = match *cell {
            Cell::Q(q) => q,
            Cell::C(b) => {
                if !self.permissive() {
                    return Err(self.mode_err(format!("qif control `{}` is classical", p.name)));
                }
                if b {
                    self.exec_block(body, env)?;
                }
                env.retain(|k, v| before.contains(k) || !v.is_classical());
                return Ok(());
            }
        };
        if self.guards.contains(&c) {
            return Err(self.mode_err(format!("qif control `{}` is already a control", p.name)));
        }
        self.guards.push(c);
        match self.control {
            None => {
                self.control = Some(c);
                let r = self.exec_block(body, env);
                self.control = None;
                r?;
            }
            Some(outer) => {
                let e = self.alloc(&[false])?[0];
                let tof = gates::toffoli();
                self.emit_raw(&tof, &[outer, c, e])?;
                self.control = Some(e);
                let r = self.exec_block(body, env);
                self.control = Some(outer);
                r?;
                self.emit_raw(&tof, &[outer, c, e])?;
                self.release_assert(&[e], Some(&[false]))?;
            }
        }
        self.guards.pop();
        env.retain(|k, v| before.contains(k) || !v.is_classical());
        Ok(())
    }

    fn exec_for(
        &mut self,
        var: &str,
        from: &Expr,
        dir: Direction,
        to: &Expr,
        body: &[Stmt],
        env: &mut Env,
    ) -> R<()> {
        let a = self.eval(from, env)?;
        let a = value::as_int(&a).map_err(|m| self.arith(format!("loop bound: {m}")))?;
        let b = self.eval(to, env)?;
        let b = value::as_int(&b).map_err(|m| self.arith(format!("loop bound: {m}")))?;
        let saved = env.remove(var);
        let (mut i, step) = match dir {
            Direction::DownTo => (a as i128, -1i128),
            Direction::UpTo => (a as i128, 1i128),
        };
        let end = b as i128;
        while (step < 0 && i >= end) || (step > 0 && i <= end) {
            env.insert(var.to_string(), Value::Int(i as i64));
            self.exec_block(body, env)?;
            i += step;
        }
        match saved {
            Some(v) => env.insert(var.to_string(), v),
            None => env.remove(var),
        };
        Ok(())
    }

    /// Starts recording: gates and allocations go to a fresh trace and
    /// the qif control is suspended.
    fn begin_trace(&mut self) -> (Option<Vec<Event>>, Option<QubitId>, Vec<QubitId>) {
        let t = self.trace.replace(Vec::new());
        let c = self.control.take();
        let g = std::mem::take(&mut self.guards);
        (t, c, g)
    }

    fn end_trace(&mut self, saved: (Option<Vec<Event>>, Option<QubitId>, Vec<QubitId>)) -> Vec<Event> {
        let events = self.trace.take().unwrap_or_default();
        self.trace = saved.0;
        self.control = saved.1;
        self.guards = saved.2;
        events
    }

    fn exec_reverse_block(&mut self, body: &[Stmt], env: &mut Env) -> R<()> {
        let snapshot = env.clone();
        let saved = self.begin_trace();
        let r = self.exec_block(body, env);
        let events = self.end_trace(saved);
        r?;
        *env = snapshot;
        self.replay_inverse(events, HashMap::new())
    }

    fn exec_reverse_call(&mut self, call: &Call, lhs: &[RegRef], env: &mut Env) -> R<()> {
        if let Some((np, arity)) = builtin_signature(&call.name) {
            if !lhs.is_empty() {
                return Err(self.mode_err(format!("`{}` has no outputs to reverse", call.name)));
            }
            if call.args.len() != np + arity {
                return Err(self.mode_err(format!("`{}` takes {} arguments", call.name, np + arity)));
            }
            let g = self.gate_params(call, np, env)?;
            let mut regs = Vec::with_capacity(arity);
            for a in &call.args[np..] {
                regs.push(self.quantum_arg(call, a, &[], env)?.1);
            }
            return self.apply_gate_regs(&gates::inverse(&g), &regs);
        }
        let callee = self
            .prog
            .proc(&call.name)
            .ok_or_else(|| self.mode_err(format!("unknown proc `{}`", call.name)))?;
        if callee.params.len() != call.args.len() {
            return Err(self.mode_err(format!("`{}` takes {} arguments", call.name, callee.params.len())));
        }
        if lhs.len() != callee.outputs.len() {
            return Err(self.mode_err(format!(
                "`{}` has {} outputs, {} named",
                call.name,
                callee.outputs.len(),
                lhs.len()
            )));
        }
        let args = self.eval_args(callee, call, &[], env)?;
        let saved = self.begin_trace();
        let r = self.invoke(callee, &args);
        let events = self.end_trace(saved);
        let (outs, _) = r?;
        let mut map = HashMap::new();
        for (l, out) in lhs.iter().zip(outs) {
            let p = self.place(l, env)?;
            let target = self.read_cells(&p, env)?;
            let Value::Bits(produced) = out else {
                return Err(self.mode_err(format!("output for `{}` is not a register", l.name)));
            };
            if produced.len() != target.len() {
                return Err(self.mode_err(format!(
                    "`~{}` has width {}, the call produces {}",
                    l.name,
                    target.len(),
                    produced.len()
                )));
            }
            for (v, t) in produced.iter().zip(&target) {
                match (v, t) {
                    (Cell::Q(v), Cell::Q(t)) if self.virtual_init.contains_key(v) => {
                        map.insert(*v, *t);
                    }
                    _ => {
                        return Err(self.mode_err(format!(
                            "`~{}` must be a quantum register the call allocates",
                            l.name
                        )))
                    }
                }
            }
        }
        self.replay_inverse(events, map)
    }

    /// Applies the inverse of a recorded block. `outputs` maps recorded
    /// registers onto live ones that stand for them; those stay live.
    fn replay_inverse(&mut self, events: Vec<Event>, outputs: HashMap<QubitId, QubitId>) -> R<()> {
        let keep: HashSet<QubitId> = outputs.keys().copied().collect();
        let mut released: HashSet<QubitId> = HashSet::new();
        for ev in &events {
            if let Event::Release(qs, _) = ev {
                released.extend(qs.iter().copied());
            }
        }
        for ev in &events {
            if let Event::Alloc(qs, _) = ev {
                if qs.iter().any(|q| !released.contains(q) && !keep.contains(q)) {
                    return Err(self.mode_err("a reversed block may not leave a new quantum register live"));
                }
            }
        }
        let mut map = outputs;
        let mut dissipated: HashSet<QubitId> = HashSet::new();
        for ev in events.into_iter().rev() {
            match ev {
                Event::Gate(g, qs) => {
                    let qs: Vec<QubitId> = qs.iter().map(|q| *map.get(q).unwrap_or(q)).collect();
                    self.emit_gate(&gates::inverse(&g), &qs)?;
                }
                Event::Release(qs, kind) => {
                    let bits: Vec<bool> = qs.iter().map(|q| self.virtual_init[q]).collect();
                    let fresh = self.alloc(&bits)?;
                    for (v, f) in qs.iter().zip(fresh) {
                        map.insert(*v, f);
                    }
                    if kind == Release::Dissipate {
                        dissipated.extend(qs);
                    }
                }
                Event::Alloc(qs, bits) => {
                    if qs.iter().all(|q| keep.contains(q)) {
                        continue;
                    }
                    let real: Vec<QubitId> = qs.iter().map(|q| *map.get(q).unwrap_or(q)).collect();
                    if qs.iter().any(|q| dissipated.contains(q)) {
                        self.release_dissipate(&real)?;
                    } else {
                        self.release_assert(&real, Some(&bits))?;
                    }
                }
            }
        }
        Ok(())
    }

    fn exec_reversify(&mut self, lhs: &[RegRef], call: &Call, env: &mut Env) -> R<()> {
        let f = self
            .prog
            .proc(&call.name)
            .ok_or_else(|| self.mode_err(format!("`reversify` needs a proc, `{}` is not one", call.name)))?;
        if let Some((_, msg)) = reversify_obstacle(&f.body) {
            return Err(self.err(ErrorKind::Unsupported, format!("cannot reversify `{}`: {msg}", f.name)));
        }
        if f.params.len() != call.args.len() {
            return Err(self.mode_err(format!("`{}` takes {} arguments", call.name, f.params.len())));
        }
        let mut rev_args = Vec::new();
        let mut inputs: Vec<QubitId> = Vec::new();
        for a in &call.args {
            match a {
                Expr::Ref(r) if r.quantum => {
                    let p = self.place(r, env)?;
                    let cells = self.quantum_cells(&p, env, false)?;
                    rev_args.push(RevArg::Quantum(cells.len()));
                    inputs.extend(cells.iter().map(|c| match c {
                        Cell::Q(q) => *q,
                        Cell::C(_) => unreachable!("promoted above"),
                    }));
                }
                other => {
                    let v = self.eval(other, env)?;
                    rev_args.push(RevArg::Classical(v));
                }
            }
        }
        let circuit = reversify::compile(f, &rev_args).map_err(|m| self.err(ErrorKind::Unsupported, m))?;
        if lhs.len() != circuit.outputs.len() {
            return Err(self.mode_err(format!(
                "`{}` has {} outputs, {} named",
                f.name,
                circuit.outputs.len(),
                lhs.len()
            )));
        }
        if let Some(l) = lhs.iter().find(|l| !l.quantum) {
            return Err(self.mode_err(format!("reversify produces quantum registers; write `~{}`", l.name)));
        }
        let mut outs: Vec<Vec<QubitId>> = Vec::new();
        let mut out_flat: Vec<QubitId> = Vec::new();
        for &w in &circuit.outputs {
            let ids = self.alloc(&vec![false; w])?;
            let lsb: Vec<QubitId> = ids.iter().rev().copied().collect();
            out_flat.extend(&lsb);
            outs.push(ids);
        }
        let anc_ids = self.alloc(&vec![false; circuit.ancillas])?;
        let wire = |w: &Wire| match *w {
            Wire::Input(k) => inputs[k],
            Wire::Output(k) => out_flat[k],
            Wire::Ancilla(k) => anc_ids[k],
        };
        for (g, ws) in &circuit.gates {
            let qs: Vec<QubitId> = ws.iter().map(wire).collect();
            self.emit_gate(g, &qs)?;
        }
        self.release_assert(&anc_ids, Some(&vec![false; circuit.ancillas]))?;
        for (l, ids) in lhs.iter().zip(outs) {
            self.bind_quantum(l, cells_from_ids(&ids), env)?;
        }
        Ok(())
    }

    fn exec_dissipate(&mut self, target: &RegRef, reinit: &Expr, env: &mut Env) -> R<()> {
        let p = self.place(target, env)?;
        let cells = self.read_cells(&p, env)?;
        self.release_dissipate(&msb_qubits(&cells))?;
        let v = self.eval(reinit, env)?;
        match p.index {
            None => {
                env.insert(p.name, v);
                Ok(())
            }
            Some(_) => {
                let b = value::as_bit(&v).map_err(|m| self.arith(m))?;
                self.write_cells(&p, vec![Cell::C(b)], env)
            }
        }
    }

    fn exec_assert(&mut self, lhs: &RegRef, target: &RegRef, proof: Option<&str>, env: &mut Env) -> R<()> {
        let p = self.place(target, env)?;
        let cells = self.read_cells(&p, env)?;
        let qs = msb_qubits(&cells);
        let bits = self.release_assert(&qs, None).map_err(|mut e| {
            if let Some(pr) = proof {
                e.message = format!("{} (proof: {pr})", e.message);
            }
            e
        })?;
        let mut it = bits.into_iter();
        let mut out = cells;
        for c in out.iter_mut().rev() {
            if matches!(c, Cell::Q(_)) {
                *c = Cell::C(it.next().expect("one bit per qubit"));
            }
        }
        self.write_cells(&p, out.clone(), env)?;
        let v = match p.index {
            Some(_) => Value::Int(matches!(out[0], Cell::C(true)) as i64),
            None => Value::Bits(out),
        };
        let same = lhs.name == target.name && lhs.index == target.index;
        if same {
            return Ok(());
        }
        self.assign_classical(lhs, v, env)
    }
}
