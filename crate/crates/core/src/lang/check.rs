//! Static checks: program structure, register modes and the reversibility
//! preconditions of `qif` and `reverse` blocks.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::ast::*;
use super::diag::{Code, Diagnostic, Span};
use super::pretty::expr_to_string;
use crate::gates::builtin_signature;

/// Builtin functions usable inside classical expressions: (name, arity).
pub const EXPR_FUNCS: &[(&str, usize)] = &[("zeros", 1), ("min", 2), ("max", 2)];

pub fn expr_func_arity(name: &str) -> Option<usize> {
    EXPR_FUNCS.iter().find(|(n, _)| *n == name).map(|(_, a)| *a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Int,
    Real,
    Bits,
    Any,
}

impl Kind {
    fn join(self, other: Kind) -> Kind {
        if self == other {
            self
        } else {
            Kind::Any
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Unset,
    Classical(Kind),
    Quantum,
    /// Some bits measured, some still quantum. Holds the index expressions
    /// (printed) of bits known to be classical.
    Mixed(BTreeSet<String>),
}

impl Mode {
    fn join(&self, other: &Mode) -> Mode {
        use Mode::*;
        match (self, other) {
            (a, b) if a == b => a.clone(),
            (Unset, m) | (m, Unset) => m.clone(),
            (Classical(a), Classical(b)) => Classical(a.join(*b)),
            (Mixed(a), Mixed(b)) => Mixed(a.intersection(b).cloned().collect()),
            (Mixed(s), Classical(_)) | (Classical(_), Mixed(s)) => Mixed(s.clone()),
            _ => Mixed(BTreeSet::new()),
        }
    }

    fn is_quantumish(&self) -> bool {
        matches!(self, Mode::Quantum | Mode::Mixed(_))
    }
}

/// Mode of every register name at one program point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModeState {
    modes: BTreeMap<String, Mode>,
    widths: BTreeMap<String, Expr>,
}

impl ModeState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Mode {
        self.modes.get(name).cloned().unwrap_or(Mode::Unset)
    }

    pub fn set(&mut self, name: &str, mode: Mode) {
        if mode == Mode::Unset {
            self.modes.remove(name);
            self.widths.remove(name);
        } else {
            self.modes.insert(name.to_string(), mode);
        }
    }

    pub fn defined(&self) -> BTreeSet<String> {
        self.modes.keys().cloned().collect()
    }

    fn join(&self, other: &ModeState) -> ModeState {
        let mut out = ModeState::default();
        for name in self.modes.keys().chain(other.modes.keys()) {
            out.set(name, self.get(name).join(&other.get(name)));
        }
        for (k, w) in &self.widths {
            if other.widths.get(k) == Some(w) {
                out.widths.insert(k.clone(), w.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Qif,
    Reverse,
}

/// What a caller needs to know about a proc without re-reading its body.
#[derive(Debug, Clone, Default)]
pub struct ProcSummary {
    pub measures: bool,
    pub dissipates: bool,
    /// Per parameter: a quantum parameter that is no longer quantum when
    /// the proc returns.
    pub consumes: Vec<bool>,
    /// Only classical parameters and outputs, and a body `reversify` can
    /// compile.
    pub reversifiable: bool,
}

/// Runs every static check: structure, modes and reversibility.
pub fn check_program(p: &Program) -> Vec<Diagnostic> {
    let mut c = Checker::new(p);
    c.run();
    c.finish()
}

/// Alias kept for callers that think of the whole pass as mode checking.
pub fn check_modes(p: &Program) -> Vec<Diagnostic> {
    check_program(p)
}

/// Checks `body` as the body of a `qif` or `reverse` block entered with
/// register modes `env`. Only reversibility diagnostics are returned.
pub fn check_reversible(
    p: &Program,
    body: &[Stmt],
    env: &ModeState,
    kind: BlockKind,
) -> Vec<Diagnostic> {
    let mut c = Checker::new(p);
    c.run();
    c.diags.clear();
    let mut st = env.clone();
    let span = body.first().map(|s| s.span()).unwrap_or_default();
    c.block(kind, body, &mut st, span);
    c.finish()
        .into_iter()
        .filter(|d| is_reversibility_code(d.code))
        .collect()
}

fn is_reversibility_code(code: Code) -> bool {
    matches!(
        code,
        Code::MeasureInQif
            | Code::DissipateInQif
            | Code::ClassicalOutputInQif
            | Code::MeasureInReverse
            | Code::ClassicalOutputInReverse
            | Code::QuantumOutputInReverse
            | Code::DissipateInReverse
            | Code::ControlInBody
    )
}

/// Procedure summaries in dependency order. Procs involved in recursion or
/// calling unknown procs get default summaries.
pub fn summarize(p: &Program) -> HashMap<String, ProcSummary> {
    let mut c = Checker::new(p);
    c.run();
    c.summaries
}

/// Visits every statement, nested blocks included, in source order.
pub fn walk_stmts<'a>(body: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for s in body {
        f(s);
        match s {
            Stmt::QIf { body, .. } | Stmt::For { body, .. } => walk_stmts(body, f),
            Stmt::Reverse { target, .. } => match target {
                ReverseTarget::Block(b) => walk_stmts(b, f),
                ReverseTarget::Stmt(inner) => walk_stmts(std::slice::from_ref(inner), f),
            },
            _ => {}
        }
    }
}

/// Expressions appearing directly in a statement (not in nested blocks).
fn stmt_exprs(s: &Stmt) -> Vec<&Expr> {
    fn idx<'a>(r: &'a RegRef, out: &mut Vec<&'a Expr>) {
        if let Some(i) = &r.index {
            out.push(&**i);
        }
    }
    let mut out = Vec::new();
    match s {
        Stmt::Assign { lhs, rhs, .. } => {
            for r in lhs {
                if let Some(i) = &r.index {
                    out.push(&**i);
                }
            }
            match rhs {
                Rhs::Expr(e) => out.push(e),
                Rhs::Reversify(c) => out.extend(c.args.iter()),
            }
        }
        Stmt::Call { call, .. } => out.extend(call.args.iter()),
        Stmt::QIf { control, .. } => idx(control, &mut out),
        Stmt::For { from, to, .. } => {
            out.push(from);
            out.push(to);
        }
        Stmt::Reverse { .. } => {}
        Stmt::Dissipate { target, reinit, .. } => {
            idx(target, &mut out);
            out.push(reinit);
        }
        Stmt::AssertClassical { lhs, target, .. } => {
            idx(lhs, &mut out);
            idx(target, &mut out);
        }
    }
    out
}

/// Calls made directly by a statement, with the reversify target flagged.
fn stmt_calls(s: &Stmt) -> Vec<&Call> {
    let mut out = Vec::new();
    match s {
        Stmt::Call { call, .. } => out.push(call),
        Stmt::Assign {
            rhs: Rhs::Reversify(c),
            ..
        } => out.push(c),
        _ => {}
    }
    for e in stmt_exprs(s) {
        out.extend(e.calls());
    }
    out
}

/// Register references made directly by a statement.
fn stmt_refs(s: &Stmt) -> Vec<&RegRef> {
    let mut out = Vec::new();
    match s {
        Stmt::Assign { lhs, .. } => out.extend(lhs.iter()),
        Stmt::QIf { control, .. } => out.push(control),
        Stmt::Dissipate { target, .. } => out.push(target),
        Stmt::AssertClassical { lhs, target, .. } => {
            out.push(lhs);
            out.push(target);
        }
        _ => {}
    }
    for e in stmt_exprs(s) {
        out.extend(e.refs());
    }
    out
}

fn index_key(r: &RegRef) -> Option<String> {
    r.index.as_ref().map(|i| expr_to_string(i))
}

fn mode_word(m: &Mode) -> &'static str {
    match m {
        Mode::Unset => "undefined",
        Mode::Classical(_) => "classical",
        Mode::Quantum => "quantum",
        Mode::Mixed(_) => "partly measured",
    }
}

struct BlockCtx {
    kind: BlockKind,
    outer: BTreeSet<String>,
}

#[derive(Default)]
struct Facts {
    measures: bool,
    dissipates: bool,
}

/// One parameter slot of a callee as the checker sees it.
struct Slot<'a> {
    quantum: bool,
    name: Option<&'a str>,
}

struct Checker<'p> {
    prog: &'p Program,
    procs: HashMap<&'p str, &'p Proc>,
    summaries: HashMap<String, ProcSummary>,
    diags: Vec<Diagnostic>,
    blocks: Vec<BlockCtx>,
    facts: Facts,
    silent: usize,
    /// Set while handling a statement already reported as a measurement.
    quiet_writes: bool,
    /// The register being written also appears on the right side, so
    /// rule (ii) does not apply to it.
    on_right: bool,
}

impl<'p> Checker<'p> {
    fn new(prog: &'p Program) -> Self {
        let mut procs = HashMap::new();
        for p in &prog.procs {
            procs.entry(p.name.as_str()).or_insert(p);
        }
        Checker {
            prog,
            procs,
            summaries: HashMap::new(),
            diags: Vec::new(),
            blocks: Vec::new(),
            facts: Facts::default(),
            silent: 0,
            quiet_writes: false,
            on_right: false,
        }
    }

    fn report(&mut self, span: Span, code: Code, msg: impl Into<String>) {
        if self.silent == 0 {
            self.diags.push(Diagnostic::new(span, code, msg));
        }
    }

    fn finish(mut self) -> Vec<Diagnostic> {
        self.diags.sort_by_key(|d| (d.line, d.col, d.code));
        self.diags.dedup();
        self.diags
    }

    fn run(&mut self) {
        let order = self.structure();
        for name in order {
            let proc = self.procs[name.as_str()];
            let summary = self.proc_body(proc);
            self.summaries.insert(name, summary);
        }
    }

    /// Structural checks. Returns the procs to mode-check, callees first.
    fn structure(&mut self) -> Vec<String> {
        let prog = self.prog;
        let mut seen: HashMap<&str, Span> = HashMap::new();
        for p in &prog.procs {
            if seen.insert(&p.name, p.span).is_some() {
                self.report(p.span, Code::DuplicateProc, format!("proc `{}` is defined twice", p.name));
            } else if builtin_signature(&p.name).is_some() || expr_func_arity(&p.name).is_some() {
                self.report(p.span, Code::DuplicateProc, format!("proc `{}` shadows a builtin", p.name));
            }
            let mut names: BTreeSet<&str> = BTreeSet::new();
            for par in &p.params {
                if !names.insert(&par.name) {
                    self.report(par.span, Code::DuplicateParam, format!("parameter `{}` is declared twice", par.name));
                }
            }
            let mut outs: BTreeSet<&str> = BTreeSet::new();
            for o in &p.outputs {
                if !outs.insert(&o.name) {
                    self.report(o.span, Code::DuplicateParam, format!("output `{}` is declared twice", o.name));
                }
            }
        }

        // Call graph and call-site arity.
        let mut edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        let mut broken: BTreeSet<&str> = BTreeSet::new();
        for p in &prog.procs {
            let mut calls = Vec::new();
            walk_stmts(&p.body, &mut |s| calls.extend(stmt_calls(s)));
            for par in &p.params {
                if let Some(ParamType::Bits(w)) = &par.ty {
                    calls.extend(w.calls());
                }
            }
            let out = edges.entry(&p.name).or_default();
            for c in calls {
                let expected = if let Some((np, ar)) = builtin_signature(&c.name) {
                    np + ar
                } else if let Some(a) = expr_func_arity(&c.name) {
                    a
                } else if let Some(callee) = self.procs.get(c.name.as_str()) {
                    out.insert(callee.name.as_str());
                    callee.params.len()
                } else {
                    self.diags.push(Diagnostic::new(
                        c.span,
                        Code::UnknownProc,
                        format!("unknown proc or gate `{}`", c.name),
                    ));
                    broken.insert(&p.name);
                    continue;
                };
                if c.args.len() != expected {
                    self.diags.push(Diagnostic::new(
                        c.span,
                        Code::Arity,
                        format!("`{}` takes {expected} arguments, got {}", c.name, c.args.len()),
                    ));
                    broken.insert(&p.name);
                }
            }
        }

        // Depth-first topological sort; back edges are recursion.
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let mut marks: HashMap<&str, Mark> = edges.keys().map(|k| (*k, Mark::New)).collect();
        let mut order: Vec<String> = Vec::new();
        let mut cyclic: BTreeSet<&str> = BTreeSet::new();
        fn visit<'a>(
            n: &'a str,
            edges: &BTreeMap<&'a str, BTreeSet<&'a str>>,
            marks: &mut HashMap<&'a str, Mark>,
            stack: &mut Vec<&'a str>,
            order: &mut Vec<&'a str>,
            cyclic: &mut BTreeSet<&'a str>,
        ) {
            marks.insert(n, Mark::Active);
            stack.push(n);
            for &m in &edges[n] {
                match marks[m] {
                    Mark::New => visit(m, edges, marks, stack, order, cyclic),
                    Mark::Active => {
                        let from = stack.iter().position(|s| *s == m).unwrap_or(0);
                        cyclic.extend(stack[from..].iter().copied());
                    }
                    Mark::Done => {}
                }
            }
            stack.pop();
            marks.insert(n, Mark::Done);
            order.push(n);
        }
        let mut raw_order = Vec::new();
        for p in &prog.procs {
            if marks[p.name.as_str()] == Mark::New {
                visit(&p.name, &edges, &mut marks, &mut Vec::new(), &mut raw_order, &mut cyclic);
            }
        }
        for p in &prog.procs {
            if cyclic.contains(p.name.as_str()) {
                self.diags.push(Diagnostic::new(
                    p.span,
                    Code::Recursion,
                    format!("proc `{}` is recursive", p.name),
                ));
            }
        }
        // A proc is only mode-checked when it and everything it reaches is sound.
        let mut bad: BTreeSet<&str> = cyclic.union(&broken).copied().collect();
        for n in &raw_order {
            if edges[n].iter().any(|m| bad.contains(m)) {
                bad.insert(n);
            }
        }
        for n in raw_order {
            if bad.contains(n) {
                self.summaries.insert(n.to_string(), ProcSummary::default());
            } else {
                order.push(n.to_string());
            }
        }
        order
    }

    fn proc_body(&mut self, p: &'p Proc) -> ProcSummary {
        let mut st = ModeState::default();
        for par in &p.params {
            let mode = if par.quantum {
                Mode::Quantum
            } else {
                Mode::Classical(match &par.ty {
                    Some(ParamType::Int) => Kind::Int,
                    Some(ParamType::Real) => Kind::Real,
                    Some(ParamType::Bits(_)) => Kind::Bits,
                    None => Kind::Any,
                })
            };
            st.set(&par.name, mode);
            if let Some(ParamType::Bits(w)) = &par.ty {
                st.widths.insert(par.name.clone(), w.clone());
            }
        }
        for par in &p.params {
            if let Some(ParamType::Bits(w)) = &par.ty {
                self.read_expr(w, &st);
            }
        }
        self.facts = Facts::default();
        self.stmts(&p.body, &mut st);
        for o in &p.outputs {
            let m = st.get(&o.name);
            let ok = if o.quantum {
                m == Mode::Quantum
            } else {
                matches!(m, Mode::Classical(_))
            };
            if !ok {
                self.report(
                    o.span,
                    Code::OutputMode,
                    format!(
                        "output `{}{}` is {} when `{}` returns",
                        if o.quantum { "~" } else { "" },
                        o.name,
                        mode_word(&m),
                        p.name
                    ),
                );
            }
        }
        let consumes = p
            .params
            .iter()
            .map(|par| par.quantum && st.get(&par.name) != Mode::Quantum)
            .collect();
        let reversifiable = p.params.iter().all(|x| !x.quantum)
            && p.outputs.iter().all(|o| !o.quantum)
            && reversify_obstacle(&p.body).is_none();
        ProcSummary {
            measures: self.facts.measures,
            dissipates: self.facts.dissipates,
            consumes,
            reversifiable,
        }
    }

    fn stmts(&mut self, body: &'p [Stmt], st: &mut ModeState) {
        for s in body {
            self.stmt(s, st);
        }
    }

    fn stmt(&mut self, s: &'p Stmt, st: &mut ModeState) {
        match s {
            Stmt::Assign {
                lhs,
                rhs: Rhs::Reversify(call),
                span,
            } => self.reversify(lhs, call, *span, st),
            Stmt::Assign {
                lhs,
                rhs: Rhs::Expr(Expr::Call(call)),
                span,
            } if expr_func_arity(&call.name).is_none() => self.call(call, lhs, *span, st),
            Stmt::Assign {
                lhs,
                rhs: Rhs::Expr(e),
                span,
            } => self.assign_expr(lhs, e, *span, st),
            Stmt::Call { call, span } => self.call(call, &[], *span, st),
            Stmt::QIf {
                control,
                body,
                span,
            } => self.qif(control, body, *span, st),
            Stmt::For {
                var,
                from,
                dir,
                to,
                body,
                ..
            } => self.for_loop(var, from, *dir, to, body, st),
            Stmt::Reverse {
                target: ReverseTarget::Block(body),
                span,
            } => {
                self.block(BlockKind::Reverse, body, st, *span);
            }
            Stmt::Reverse {
                target: ReverseTarget::Stmt(inner),
                span,
            } => self.reverse_stmt(inner, *span, st),
            Stmt::Dissipate {
                target,
                reinit,
                span,
            } => self.dissipate(target, reinit, *span, st),
            Stmt::AssertClassical {
                lhs, target, span, ..
            } => self.assert_classical(lhs, target, *span, st),
        }
    }

    // ---- expressions and register uses ----

    fn read_expr(&mut self, e: &Expr, st: &ModeState) -> Kind {
        match e {
            Expr::Int(_) => Kind::Int,
            Expr::Real(_) | Expr::Pi => Kind::Real,
            Expr::Bits(_) => Kind::Bits,
            Expr::Ref(r) => self.read_ref(r, st),
            Expr::Unary(_, x) => self.read_expr(x, st),
            Expr::Binary(op, a, b) => {
                let ka = self.read_expr(a, st);
                let kb = self.read_expr(b, st);
                match op {
                    BinOp::Div => Kind::Real,
                    BinOp::IntDiv | BinOp::Mod => Kind::Int,
                    BinOp::And | BinOp::Or | BinOp::Xor => {
                        if ka == Kind::Bits || kb == Kind::Bits {
                            Kind::Bits
                        } else {
                            ka.join(kb)
                        }
                    }
                    _ => match (ka, kb) {
                        (Kind::Real, _) | (_, Kind::Real) => Kind::Real,
                        (Kind::Any, _) | (_, Kind::Any) => Kind::Any,
                        _ => Kind::Int,
                    },
                }
            }
            Expr::Call(c) => {
                let kinds: Vec<Kind> = c.args.iter().map(|a| self.read_expr(a, st)).collect();
                match c.name.as_str() {
                    "zeros" => Kind::Bits,
                    "min" | "max" => kinds.into_iter().fold(Kind::Int, |acc, k| match (acc, k) {
                        (Kind::Real, _) | (_, Kind::Real) => Kind::Real,
                        (a, b) => a.join(b),
                    }),
                    _ => {
                        self.report(
                            c.span,
                            Code::NestedCall,
                            format!("`{}` can only be called as a statement or as the whole right side of an assignment", c.name),
                        );
                        Kind::Any
                    }
                }
            }
        }
    }

    fn read_index(&mut self, r: &RegRef, st: &ModeState) {
        if let Some(i) = &r.index {
            self.read_expr(i, st);
        }
    }

    /// A register read as a classical value.
    fn read_ref(&mut self, r: &RegRef, st: &ModeState) -> Kind {
        self.read_index(r, st);
        let m = st.get(&r.name);
        if r.quantum {
            match m {
                Mode::Unset => self.undefined(r),
                Mode::Classical(_) => self.report(
                    r.span,
                    Code::QuantumOnClassical,
                    format!("`~{}` is classical here", r.name),
                ),
                _ => self.report(
                    r.span,
                    Code::ClassicalOnQuantum,
                    format!("quantum register `~{}` used in a classical expression", r.name),
                ),
            }
            return Kind::Any;
        }
        match m {
            Mode::Unset => {
                self.undefined(r);
                Kind::Any
            }
            Mode::Quantum => {
                self.report(
                    r.span,
                    Code::ClassicalOnQuantum,
                    format!("`{}` is quantum; measure it before classical use", r.name),
                );
                Kind::Any
            }
            Mode::Mixed(_) if r.index.is_none() => {
                self.report(
                    r.span,
                    Code::ClassicalOnQuantum,
                    format!("`{}` is partly quantum; only single bits can be read", r.name),
                );
                Kind::Any
            }
            Mode::Mixed(_) => Kind::Int,
            Mode::Classical(k) => {
                if r.index.is_some() {
                    if k == Kind::Real {
                        self.report(r.span, Code::Kind, format!("real register `{}` has no bits", r.name));
                    }
                    Kind::Int
                } else {
                    k
                }
            }
        }
    }

    fn undefined(&mut self, r: &RegRef) {
        self.report(r.span, Code::Undefined, format!("`{}` is not defined", r.name));
    }

    /// A register used as a quantum operand (gate target, control, ...).
    fn use_quantum(&mut self, r: &RegRef, st: &ModeState) -> bool {
        self.read_index(r, st);
        let m = st.get(&r.name);
        if !r.quantum {
            match m {
                Mode::Unset => self.undefined(r),
                Mode::Classical(_) => self.report(
                    r.span,
                    Code::QuantumOnClassical,
                    format!("quantum operation on classical register `{}`; promote it with `~{0} <- {0}`", r.name),
                ),
                _ => self.report(
                    r.span,
                    Code::Kind,
                    format!("quantum operand must be written `~{}`", r.name),
                ),
            }
            return false;
        }
        match m {
            Mode::Unset => {
                self.undefined(r);
                false
            }
            Mode::Classical(_) => {
                self.report(
                    r.span,
                    Code::QuantumOnClassical,
                    format!("`~{0}` used but `{0}` is classical; promote it with `~{0} <- {0}`", r.name),
                );
                false
            }
            Mode::Quantum => true,
            Mode::Mixed(known) => match index_key(r) {
                None => {
                    self.report(
                        r.span,
                        Code::QuantumOnClassical,
                        format!("`~{}` is partly measured; address single bits", r.name),
                    );
                    false
                }
                Some(k) if known.contains(&k) => {
                    self.report(
                        r.span,
                        Code::QuantumOnClassical,
                        format!("`{}[{k}]` has been measured", r.name),
                    );
                    false
                }
                Some(_) => true,
            },
        }
    }

    // ---- effects ----

    fn innermost(&self) -> Option<&BlockCtx> {
        self.blocks.last()
    }

    fn note_measure(&mut self, span: Span, what: &str) {
        self.facts.measures = true;
        match self.innermost().map(|b| b.kind) {
            Some(BlockKind::Qif) => self.report(span, Code::MeasureInQif, format!("{what} inside qif")),
            Some(BlockKind::Reverse) => {
                self.report(span, Code::MeasureInReverse, format!("{what} inside reverse"))
            }
            None => {}
        }
    }

    fn note_dissipate(&mut self, span: Span, what: &str) {
        self.facts.dissipates = true;
        match self.innermost().map(|b| b.kind) {
            Some(BlockKind::Qif) => self.report(span, Code::DissipateInQif, format!("{what} inside qif")),
            Some(BlockKind::Reverse) => self.report(
                span,
                Code::DissipateInReverse,
                format!("{what} inside reverse; reversal replays it instead of inverting"),
            ),
            None => {}
        }
    }

    /// A classical value lands in `name`.
    fn note_classical_write(&mut self, name: &str, span: Span) {
        if self.quiet_writes {
            return;
        }
        let hit = self
            .innermost()
            .filter(|b| b.outer.contains(name))
            .map(|b| b.kind);
        match hit {
            Some(BlockKind::Qif) => self.report(
                span,
                Code::ClassicalOutputInQif,
                format!("qif body writes classical register `{name}` defined outside it"),
            ),
            Some(BlockKind::Reverse) => self.report(
                span,
                Code::ClassicalOutputInReverse,
                format!("reversed code writes classical register `{name}` defined outside it"),
            ),
            None => {}
        }
    }

    /// Classical assignment into `r`, checking rule (ii).
    fn write_classical(&mut self, r: &RegRef, kind: Kind, span: Span, st: &mut ModeState) {
        self.read_index(r, st);
        self.note_classical_write(&r.name, span);
        let m = st.get(&r.name);
        match (&m, index_key(r)) {
            (Mode::Quantum, None) | (Mode::Mixed(_), None) if self.on_right => {
                st.set(&r.name, Mode::Classical(kind));
                st.widths.remove(&r.name);
            }
            (Mode::Quantum, _) | (Mode::Mixed(_), None) => self.report(
                r.span,
                Code::RuleII,
                format!("`{}` is {} and appears only on the left", r.name, mode_word(&m)),
            ),
            (Mode::Mixed(_), Some(_)) => {}
            (Mode::Unset, Some(_)) => self.undefined(r),
            (Mode::Classical(Kind::Real), Some(_)) => {
                self.report(r.span, Code::Kind, format!("real register `{}` has no bits", r.name))
            }
            (Mode::Classical(_), Some(_)) => {}
            (_, None) => {
                st.set(&r.name, Mode::Classical(kind));
                st.widths.remove(&r.name);
            }
        }
    }

    /// Bits of `name` (all of them, or one index) become classical.
    fn make_classical(&mut self, r: &RegRef, st: &mut ModeState) {
        match index_key(r) {
            None => st.set(&r.name, Mode::Classical(Kind::Bits)),
            Some(k) => {
                let mut known = match st.get(&r.name) {
                    Mode::Mixed(s) => s,
                    Mode::Classical(_) => return,
                    _ => BTreeSet::new(),
                };
                known.insert(k);
                st.set(&r.name, Mode::Mixed(known));
            }
        }
    }

    /// Promotion of a classical register (or one of its bits) to quantum.
    fn promote(&mut self, r: &RegRef, st: &mut ModeState) {
        self.read_index(r, st);
        let m = st.get(&r.name);
        let key = index_key(r);
        match (&m, &key) {
            (Mode::Unset, _) => self.undefined(r),
            (Mode::Classical(Kind::Real), _) => self.report(
                r.span,
                Code::Kind,
                format!("real register `{}` cannot be made quantum", r.name),
            ),
            (Mode::Quantum, _) => self.report(
                r.span,
                Code::ClassicalOnQuantum,
                format!("`{}` is already quantum", r.name),
            ),
            (Mode::Mixed(known), Some(k)) if !known.contains(k) => self.report(
                r.span,
                Code::ClassicalOnQuantum,
                format!("`{}[{k}]` may already be quantum", r.name),
            ),
            (Mode::Mixed(known), Some(k)) => {
                let mut known = known.clone();
                known.remove(k);
                st.set(&r.name, Mode::Mixed(known));
            }
            (Mode::Classical(_), Some(_)) => st.set(&r.name, Mode::Mixed(BTreeSet::new())),
            (_, None) => st.set(&r.name, Mode::Quantum),
        }
    }

    /// A fresh quantum register is bound to `r`.
    fn bind_quantum(&mut self, r: &RegRef, span: Span, st: &mut ModeState) {
        if r.index.is_some() {
            self.report(
                span,
                Code::Unsupported,
                format!("a new quantum register must be bound to a whole name, not `{}[..]`", r.name),
            );
            return;
        }
        if st.get(&r.name).is_quantumish() {
            self.report(
                r.span,
                Code::RuleII,
                format!("`{}` is already quantum and appears only on the left", r.name),
            );
        }
        st.set(&r.name, Mode::Quantum);
        st.widths.remove(&r.name);
    }

    fn record_width(&mut self, name: &str, e: &Expr, st: &mut ModeState) {
        match e {
            Expr::Call(c) if c.name == "zeros" && c.args.len() == 1 => {
                st.widths.insert(name.to_string(), c.args[0].clone());
            }
            Expr::Bits(b) => {
                st.widths.insert(name.to_string(), Expr::Int(b.len() as i64));
            }
            _ => {}
        }
    }

    // ---- statements ----

    fn assign_expr(&mut self, lhs: &[RegRef], e: &Expr, span: Span, st: &mut ModeState) {
        if lhs.len() != 1 {
            self.report(span, Code::Arity, "only a call can assign several registers");
            return;
        }
        let l = &lhs[0];
        if let Expr::Ref(r) = e {
            if r.quantum {
                // Measurement: rule (iv).
                if l.quantum {
                    if l.name == r.name {
                        self.report(span, Code::RuleI, format!("`~{}` appears on both sides", l.name));
                    } else {
                        self.report(span, Code::Unsupported, "a quantum register cannot be copied");
                    }
                    return;
                }
                if !self.use_quantum(r, st) {
                    return;
                }
                self.note_measure(span, "measurement");
                self.quiet_writes = !self.blocks.is_empty();
                if l.name == r.name {
                    if index_key(l) != index_key(r) {
                        self.report(
                            span,
                            Code::Unsupported,
                            "measurement must write back to the same bits it reads",
                        );
                    }
                    self.make_classical(r, st);
                } else {
                    self.make_classical(r, st);
                    let kind = if r.index.is_some() { Kind::Int } else { Kind::Bits };
                    self.write_classical(l, kind, span, st);
                }
                self.quiet_writes = false;
                return;
            }
            if l.quantum && l.name == r.name {
                if index_key(l) != index_key(r) {
                    self.report(span, Code::Unsupported, "promotion must keep the same bits");
                    return;
                }
                self.promote(r, st);
                return;
            }
        }
        let kind = self.read_expr(e, st);
        if l.quantum {
            if kind == Kind::Real {
                self.report(span, Code::Kind, "a real value cannot initialize a quantum register");
            }
            self.bind_quantum(l, span, st);
            self.record_width(&l.name, e, st);
        } else {
            self.on_right = e.refs().iter().any(|r| r.name == l.name);
            self.write_classical(l, kind, span, st);
            self.on_right = false;
            if l.index.is_none() {
                self.record_width(&l.name, e, st);
            }
        }
    }

    fn slots(&self, name: &str) -> Option<(Vec<Slot<'p>>, &'p [OutputDecl], Option<&'p str>)> {
        if let Some((np, arity)) = builtin_signature(name) {
            let mut v = Vec::new();
            for _ in 0..np {
                v.push(Slot {
                    quantum: false,
                    name: None,
                });
            }
            for _ in 0..arity {
                v.push(Slot {
                    quantum: true,
                    name: None,
                });
            }
            return Some((v, &[], None));
        }
        let p = *self.procs.get(name)?;
        let v = p
            .params
            .iter()
            .map(|par| Slot {
                quantum: par.quantum,
                name: Some(par.name.as_str()),
            })
            .collect();
        Some((v, &p.outputs, Some(p.name.as_str())))
    }

    fn call(&mut self, call: &'p Call, lhs: &[RegRef], span: Span, st: &mut ModeState) {
        let Some((slots, outputs, proc_name)) = self.slots(&call.name) else {
            return;
        };
        if slots.len() != call.args.len() {
            return;
        }
        let summary = proc_name
            .and_then(|n| self.summaries.get(n))
            .cloned()
            .unwrap_or_default();
        let lhs_q = |name: &str| lhs.iter().any(|l| l.quantum && l.name == name);

        // Arguments.
        let mut promoted: Vec<&RegRef> = Vec::new();
        for (slot, arg) in slots.iter().zip(&call.args) {
            if slot.quantum {
                let Expr::Ref(r) = arg else {
                    self.report(
                        call.span,
                        Code::Kind,
                        format!("`{}` expects a quantum register here", call.name),
                    );
                    self.read_expr(arg, st);
                    continue;
                };
                if !r.quantum && lhs_q(&r.name) {
                    promoted.push(r);
                } else {
                    self.use_quantum(r, st);
                }
            } else {
                self.read_expr(arg, st);
            }
        }

        // Rule (i).
        for l in lhs.iter().filter(|l| l.quantum) {
            if call
                .args
                .iter()
                .flat_map(|a| a.refs())
                .any(|r| r.quantum && r.name == l.name)
            {
                self.report(l.span, Code::RuleI, format!("`~{}` appears on both sides", l.name));
            }
        }

        // Match left-hand entries to outputs or to in-place arguments.
        let ref_arg = |k: usize| match &call.args[k] {
            Expr::Ref(r) => Some(r),
            _ => None,
        };
        let names: Vec<Option<&str>> = slots.iter().map(|s| s.name).collect();
        let quantum: Vec<bool> = slots.iter().map(|s| s.quantum).collect();
        let (binding, out_used) = bind_lhs(lhs, &call.args, &names, &quantum, outputs);
        let mut lhs_bind: Vec<Option<usize>> = vec![None; lhs.len()];
        let mut lhs_inplace: Vec<Option<&RegRef>> = vec![None; lhs.len()];
        for (li, b) in binding.iter().enumerate() {
            match *b {
                LhsBinding::Output(oi) => lhs_bind[li] = Some(oi),
                LhsBinding::InPlace(k) => lhs_inplace[li] = ref_arg(k),
                LhsBinding::Unbound => self.report(
                    lhs[li].span,
                    Code::Arity,
                    format!("`{}` has no output left for `{}`", call.name, lhs[li].name),
                ),
            }
        }
        if out_used.iter().any(|u| !u) {
            let missing: Vec<&str> = outputs
                .iter()
                .zip(&out_used)
                .filter(|(_, u)| !**u)
                .map(|(o, _)| o.name.as_str())
                .collect();
            self.report(
                span,
                Code::Arity,
                format!("outputs of `{}` not assigned: {}", call.name, missing.join(", ")),
            );
        }

        // Rule (iv): consumed quantum arguments need a classical left side.
        for (k, consumed) in summary.consumes.iter().enumerate() {
            if !consumed {
                continue;
            }
            let Some(r) = ref_arg(k) else { continue };
            let ok = lhs.iter().any(|l| !l.quantum && l.name == r.name);
            if !ok {
                self.report(
                    r.span,
                    Code::RuleIV,
                    format!(
                        "`{}` measures `~{}`; write `{} <- {}(...)`",
                        call.name, r.name, r.name, call.name
                    ),
                );
            }
        }
        if summary.measures {
            self.note_measure(span, &format!("`{}` measures", call.name));
        }
        if summary.dissipates {
            self.note_dissipate(span, &format!("`{}` dissipates", call.name));
        }

        // Effects.
        for r in promoted {
            self.promote(r, st);
        }
        for (k, consumed) in summary.consumes.iter().enumerate() {
            if *consumed {
                if let Some(r) = ref_arg(k) {
                    if r.quantum {
                        self.note_classical_write(&r.name, span);
                        self.make_classical(r, st);
                    }
                }
            }
        }
        for (li, l) in lhs.iter().enumerate() {
            if let Some(r) = lhs_inplace[li] {
                if r.quantum && !l.quantum {
                    // Implicit measurement at the end of the call.
                    if st.get(&r.name).is_quantumish() {
                        self.note_measure(span, "implicit measurement");
                        self.note_classical_write(&r.name, span);
                        self.make_classical(r, st);
                    }
                }
                continue;
            }
            let Some(oi) = lhs_bind[li] else { continue };
            let o = &outputs[oi];
            if o.quantum != l.quantum {
                self.report(
                    l.span,
                    Code::OutputMode,
                    format!(
                        "output `{}` of `{}` is {}",
                        o.name,
                        call.name,
                        if o.quantum { "quantum" } else { "classical" }
                    ),
                );
                continue;
            }
            let same_param = slots.iter().position(|s| s.name == Some(o.name.as_str()));
            let in_place = same_param.and_then(ref_arg).is_some_and(|r| r.name == l.name);
            if l.quantum {
                if !in_place {
                    self.bind_quantum(l, span, st);
                }
            } else if in_place {
                self.note_classical_write(&l.name, span);
                if !st.get(&l.name).is_quantumish() || l.index.is_some() {
                    self.write_classical(l, Kind::Any, span, st);
                } else {
                    st.set(&l.name, Mode::Classical(Kind::Bits));
                }
            } else {
                self.write_classical(l, Kind::Any, span, st);
            }
        }
    }

    fn reversify(&mut self, lhs: &[RegRef], call: &'p Call, span: Span, st: &mut ModeState) {
        let Some(f) = self.procs.get(call.name.as_str()).copied() else {
            if builtin_signature(&call.name).is_some() || expr_func_arity(&call.name).is_some() {
                self.report(call.span, Code::Unsupported, format!("`{}` is not a proc", call.name));
            }
            return;
        };
        if f.params.len() != call.args.len() {
            return;
        }
        let summary = self.summaries.get(&f.name).cloned().unwrap_or_default();
        if !summary.reversifiable {
            let why = reversify_obstacle(&f.body)
                .map(|(_, w)| w)
                .unwrap_or_else(|| "it has quantum parameters or outputs".into());
            self.report(call.span, Code::Unsupported, format!("cannot reversify `{}`: {why}", f.name));
        }
        for (par, arg) in f.params.iter().zip(&call.args) {
            match arg {
                Expr::Ref(r) if r.quantum => {
                    if matches!(par.ty, Some(ParamType::Int) | Some(ParamType::Real)) {
                        self.report(r.span, Code::Kind, format!("parameter `{}` is not a bit register", par.name));
                    }
                    self.use_quantum(r, st);
                }
                _ => {
                    self.read_expr(arg, st);
                }
            }
        }
        if lhs.len() != f.outputs.len() {
            self.report(
                span,
                Code::Arity,
                format!("`{}` has {} outputs, {} assigned", f.name, f.outputs.len(), lhs.len()),
            );
        }
        for l in lhs {
            if !l.quantum {
                self.report(l.span, Code::OutputMode, "reversify produces quantum registers; write `~name`");
                continue;
            }
            if call.args.iter().flat_map(|a| a.refs()).any(|r| r.quantum && r.name == l.name) {
                self.report(l.span, Code::RuleI, format!("`~{}` appears on both sides", l.name));
                continue;
            }
            self.bind_quantum(l, span, st);
        }
    }

    fn qif(&mut self, control: &'p RegRef, body: &'p [Stmt], span: Span, st: &mut ModeState) {
        if !control.quantum {
            self.report(control.span, Code::Kind, format!("qif needs a quantum control, write `~{}`", control.name));
        } else {
            self.use_quantum(control, st);
        }
        let ckey = index_key(control);
        let mut hits = Vec::new();
        walk_stmts(body, &mut |s| {
            for r in stmt_refs(s) {
                if r.name == control.name {
                    let rk = index_key(r);
                    if ckey.is_none() || rk.is_none() || rk == ckey {
                        hits.push(r.span);
                    }
                }
            }
        });
        for h in hits {
            self.report(h, Code::ControlInBody, format!("qif control `{}` is used inside its body", control.name));
        }
        self.block(BlockKind::Qif, body, st, span);
    }

    /// Runs a qif or reverse body, then applies block scoping.
    fn block(&mut self, kind: BlockKind, body: &'p [Stmt], st: &mut ModeState, span: Span) {
        let entry = st.clone();
        self.blocks.push(BlockCtx {
            kind,
            outer: entry.defined(),
        });
        self.stmts(body, st);
        self.blocks.pop();
        if kind == BlockKind::Reverse {
            for name in st.defined() {
                if st.get(&name).is_quantumish() && !entry.get(&name).is_quantumish() {
                    self.report(
                        span,
                        Code::QuantumOutputInReverse,
                        format!("reversed block leaves new quantum register `{name}`"),
                    );
                }
            }
        }
        for name in st.defined() {
            if entry.get(&name) == Mode::Unset {
                let keep = kind == BlockKind::Qif && st.get(&name).is_quantumish();
                if !keep {
                    st.set(&name, Mode::Unset);
                }
            }
        }
    }

    fn for_loop(
        &mut self,
        var: &str,
        from: &Expr,
        dir: Direction,
        to: &Expr,
        body: &'p [Stmt],
        st: &mut ModeState,
    ) {
        self.read_expr(from, st);
        self.read_expr(to, st);
        let saved = st.get(var);
        let saved_width = st.widths.get(var).cloned();

        let mut first = st.clone();
        first.set(var, Mode::Classical(Kind::Int));
        self.silent += 1;
        self.stmts(body, &mut first);
        self.silent -= 1;

        let mut second = st.join(&first);
        second.set(var, Mode::Classical(Kind::Int));
        self.stmts(body, &mut second);
        let mut out = st.join(&second);

        for name in covered_measurements(var, from, dir, to, body, st) {
            out.set(&name, Mode::Classical(Kind::Bits));
        }
        out.set(var, saved);
        if let Some(w) = saved_width {
            out.widths.insert(var.to_string(), w);
        }
        *st = out;
    }

    fn reverse_stmt(&mut self, inner: &'p Stmt, span: Span, st: &mut ModeState) {
        self.blocks.push(BlockCtx {
            kind: BlockKind::Reverse,
            outer: st.defined(),
        });
        match inner {
            Stmt::Call { call, .. } => {
                let mut scratch = st.clone();
                self.call(call, &[], span, &mut scratch);
            }
            Stmt::Assign {
                lhs,
                rhs: Rhs::Expr(Expr::Call(call)),
                ..
            } => self.reverse_assign(lhs, call, span, st),
            _ => self.report(span, Code::ReverseTarget, "nothing to reverse"),
        }
        self.blocks.pop();
    }

    fn reverse_assign(&mut self, lhs: &[RegRef], call: &'p Call, span: Span, st: &mut ModeState) {
        let Some((slots, outputs, proc_name)) = self.slots(&call.name) else {
            if expr_func_arity(&call.name).is_some() {
                self.report(span, Code::ReverseTarget, format!("`{}` is not a quantum operation", call.name));
            }
            return;
        };
        if slots.len() != call.args.len() {
            return;
        }
        for (slot, arg) in slots.iter().zip(&call.args) {
            if slot.quantum {
                match arg {
                    Expr::Ref(r) => {
                        self.use_quantum(r, st);
                    }
                    _ => self.report(call.span, Code::Kind, format!("`{}` expects a quantum register here", call.name)),
                }
            } else {
                self.read_expr(arg, st);
            }
        }
        let summary = proc_name
            .and_then(|n| self.summaries.get(n))
            .cloned()
            .unwrap_or_default();
        if summary.measures {
            self.note_measure(span, &format!("`{}` measures", call.name));
        }
        if summary.dissipates {
            self.note_dissipate(span, &format!("`{}` dissipates", call.name));
        }
        if lhs.len() != outputs.len() {
            self.report(
                span,
                Code::Arity,
                format!("`{}` has {} outputs, {} named", call.name, outputs.len(), lhs.len()),
            );
        }
        for (l, o) in lhs.iter().zip(outputs) {
            if call.args.iter().flat_map(|a| a.refs()).any(|r| r.name == l.name) {
                self.report(
                    l.span,
                    Code::ReverseTarget,
                    format!("`{}` is also an argument; reverse the call without an assignment", l.name),
                );
                continue;
            }
            if !l.quantum || !o.quantum {
                self.report(
                    l.span,
                    Code::ClassicalOutputInReverse,
                    format!("reversed call has classical output `{}`", l.name),
                );
                continue;
            }
            if st.get(&l.name) != Mode::Quantum || l.index.is_some() {
                self.report(
                    l.span,
                    Code::ReverseTarget,
                    format!("`~{}` must be the quantum register the forward call produced", l.name),
                );
            }
        }
    }

    fn dissipate(&mut self, target: &RegRef, reinit: &Expr, span: Span, st: &mut ModeState) {
        if !target.quantum {
            self.report(target.span, Code::Kind, format!("dissipate needs a quantum register, write `~{}`", target.name));
            return;
        }
        if !self.use_quantum(target, st) {
            return;
        }
        let kind = self.read_expr(reinit, st);
        self.note_dissipate(span, "dissipation");
        if self.innermost().map(|b| b.kind) == Some(BlockKind::Reverse) {
            self.note_classical_write(&target.name, span);
        }
        if target.index.is_some() {
            self.make_classical(target, st);
        } else {
            st.set(&target.name, Mode::Classical(kind));
            st.widths.remove(&target.name);
            self.record_width(&target.name, reinit, st);
        }
    }

    fn assert_classical(&mut self, lhs: &RegRef, target: &RegRef, span: Span, st: &mut ModeState) {
        if !target.quantum {
            self.report(target.span, Code::Kind, format!("assert_classical needs a quantum register, write `~{}`", target.name));
            return;
        }
        if lhs.quantum {
            self.report(lhs.span, Code::Kind, "assert_classical produces a classical value");
            return;
        }
        if !self.use_quantum(target, st) {
            return;
        }
        self.note_classical_write(&target.name, span);
        self.make_classical(target, st);
        if lhs.name == target.name {
            if index_key(lhs) != index_key(target) {
                self.report(span, Code::Unsupported, "assert_classical must write back to the same bits it reads");
            }
        } else {
            let kind = if target.index.is_some() { Kind::Int } else { Kind::Bits };
            self.write_classical(lhs, kind, span, st);
        }
    }
}

/// Registers fully measured bit by bit by a loop over all their indices.
fn covered_measurements(
    var: &str,
    from: &Expr,
    dir: Direction,
    to: &Expr,
    body: &[Stmt],
    st: &ModeState,
) -> Vec<String> {
    let (lo, hi) = match dir {
        Direction::DownTo => (to, from),
        Direction::UpTo => (from, to),
    };
    if *lo != Expr::Int(0) {
        return Vec::new();
    }
    let is_var = |e: &Option<Box<Expr>>| {
        matches!(e.as_deref(), Some(Expr::Ref(r)) if r.name == var && !r.quantum && r.index.is_none())
    };
    let mut out = Vec::new();
    for s in body {
        let Stmt::Assign {
            lhs,
            rhs: Rhs::Expr(Expr::Ref(r)),
            ..
        } = s
        else {
            continue;
        };
        if lhs.len() != 1 || !r.quantum || lhs[0].quantum || lhs[0].name != r.name {
            continue;
        }
        if !is_var(&r.index) || !is_var(&lhs[0].index) {
            continue;
        }
        let Some(w) = st.widths.get(&r.name) else { continue };
        let top_matches = match (w, hi) {
            (Expr::Int(n), Expr::Int(m)) => *n == m + 1,
            (w, Expr::Binary(BinOp::Sub, a, one)) => **one == Expr::Int(1) && **a == *w,
            _ => false,
        };
        if top_matches {
            out.push(r.name.clone());
        }
    }
    out
}

/// Where a left-hand entry of a call assignment takes its value from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LhsBinding {
    Output(usize),
    /// The register passed as argument `k`, updated in place.
    InPlace(usize),
    Unbound,
}

/// Matches the left side of `lhs <- F(args)` against `F`'s outputs.
///
/// An output named like a parameter goes to the left entry that names the
/// same register as that argument. Left entries naming an argument in the
/// other mode (`~b <- CNot(~a, b)`, `a <- M(~a)`) are updated in place.
/// The rest take the remaining outputs in order. The second result marks
/// which outputs were used; on a bare call, quantum outputs returned
/// through a quantum parameter count as used.
pub fn bind_lhs(
    lhs: &[RegRef],
    args: &[Expr],
    param_names: &[Option<&str>],
    param_quantum: &[bool],
    outputs: &[OutputDecl],
) -> (Vec<LhsBinding>, Vec<bool>) {
    let ref_arg = |k: usize| match args.get(k) {
        Some(Expr::Ref(r)) => Some(r),
        _ => None,
    };
    let mut out_used = vec![false; outputs.len()];
    let mut binding = vec![LhsBinding::Unbound; lhs.len()];
    for (oi, o) in outputs.iter().enumerate() {
        let Some(k) = param_names.iter().position(|n| *n == Some(o.name.as_str())) else {
            continue;
        };
        let Some(r) = ref_arg(k) else { continue };
        if let Some(li) = lhs
            .iter()
            .enumerate()
            .position(|(li, l)| l.name == r.name && binding[li] == LhsBinding::Unbound)
        {
            binding[li] = LhsBinding::Output(oi);
            out_used[oi] = true;
        } else if lhs.is_empty() && o.quantum && param_quantum.get(k) == Some(&true) {
            out_used[oi] = true;
        }
    }
    for (li, l) in lhs.iter().enumerate() {
        if binding[li] != LhsBinding::Unbound {
            continue;
        }
        let arg = args.iter().position(|a| match a {
            Expr::Ref(r) => r.name == l.name && r.quantum != l.quantum,
            _ => false,
        });
        if let Some(k) = arg {
            binding[li] = LhsBinding::InPlace(k);
        }
    }
    let mut next_out = 0;
    for b in binding.iter_mut() {
        if *b != LhsBinding::Unbound {
            continue;
        }
        while next_out < outputs.len() && out_used[next_out] {
            next_out += 1;
        }
        if next_out < outputs.len() {
            *b = LhsBinding::Output(next_out);
            out_used[next_out] = true;
        }
    }
    (binding, out_used)
}

/// First statement that `reversify` cannot compile, if any.
pub fn reversify_obstacle(body: &[Stmt]) -> Option<(Span, String)> {
    for s in body {
        match s {
            Stmt::Assign {
                lhs,
                rhs: Rhs::Expr(e),
                span,
            } => {
                if lhs.len() != 1 || lhs[0].quantum {
                    return Some((*span, "only single classical assignments are allowed".into()));
                }
                let mut exprs = vec![e];
                if let Some(i) = &lhs[0].index {
                    exprs.push(i);
                }
                for e in exprs {
                    if e.refs().iter().any(|r| r.quantum) {
                        return Some((*span, "quantum references are not allowed".into()));
                    }
                    if let Some(c) = e.calls().into_iter().find(|c| c.name != "zeros") {
                        return Some((*span, format!("call to `{}` is not allowed", c.name)));
                    }
                }
            }
            Stmt::For { body, .. } => {
                if let Some(o) = reversify_obstacle(body) {
                    return Some(o);
                }
            }
            other => {
                return Some((other.span(), "only assignments and loops are allowed".into()));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse;
    use super::*;

    fn codes(src: &str) -> Vec<Code> {
        let p = parse(src).unwrap_or_else(|d| panic!("{d}"));
        check_program(&p).into_iter().map(|d| d.code).collect()
    }

    fn clean(src: &str) {
        let p = parse(src).unwrap();
        let d = check_program(&p);
        assert!(d.is_empty(), "{:?}", d.iter().map(|d| d.to_string()).collect::<Vec<_>>());
    }

    #[test]
    fn fourier_is_clean() {
        clean(
            "proc Fourier(~a: bits[d], d: int):\n    for i = d - 1 downto 0:\n        for j = d - 1 downto i + 1:\n            qif ~a[j]: Phase(pi / 2 ^ (j - i), ~a[i])\n        H(~a[i])\n",
        );
    }

    #[test]
    fn measured_fourier_covers_register() {
        clean(
            "proc MF(~a: bits[d], d: int) -> a:\n    phi <- 0.0\n    for i = d - 1 downto 0:\n        Phase(phi, ~a[i])\n        H(~a[i])\n        a[i] <- ~a[i]\n        phi <- (phi + a[i] * pi) / 2\n",
        );
    }

    #[test]
    fn rule_i() {
        let c = codes("proc F(~x) -> ~y:\n    y <- 0b0\n    ~y <- y\n\nproc m():\n    a <- 0b0\n    ~a <- a\n    ~a <- F(~a)\n");
        assert!(c.contains(&Code::RuleI), "{c:?}");
    }

    #[test]
    fn rule_ii() {
        let c = codes("proc m():\n    a <- 0b0\n    ~a <- a\n    a <- 5\n");
        assert_eq!(c, vec![Code::RuleII]);
    }

    #[test]
    fn rule_iv_and_consumption() {
        let src = "proc M(~x) -> x:\n    x <- ~x\n\nproc m():\n    a <- 0b0\n    ~a <- a\n    M(~a)\n";
        assert!(codes(src).contains(&Code::RuleIV));
        clean("proc M(~x) -> x:\n    x <- ~x\n\nproc m() -> a:\n    a <- 0b0\n    ~a <- a\n    a <- M(~a)\n");
    }

    #[test]
    fn classical_on_quantum_and_back() {
        assert_eq!(
            codes("proc m():\n    b <- 0b1\n    ~b <- b\n    b <- 2 * ~b\n"),
            vec![Code::ClassicalOnQuantum]
        );
        assert_eq!(codes("proc m():\n    a <- 0b1\n    H(~a)\n"), vec![Code::QuantumOnClassical]);
    }

    #[test]
    fn qif_rules() {
        let base = "proc m():\n    a <- 0b0\n    ~a <- a\n    b <- 0b0\n    ~b <- b\n    c <- 0\n";
        assert_eq!(codes(&format!("{base}    qif ~b:\n        c <- ~a\n")), vec![Code::MeasureInQif]);
        assert_eq!(codes(&format!("{base}    qif ~b: X(~b)\n")), vec![Code::ControlInBody]);
        assert_eq!(codes(&format!("{base}    qif ~b: dissipate ~a reinit 0\n")), vec![Code::DissipateInQif]);
        assert_eq!(codes(&format!("{base}    qif ~b: c <- 1\n")), vec![Code::ClassicalOutputInQif]);
        clean(&format!("{base}    qif ~b:\n        t <- 1\n        X(~a)\n"));
    }

    #[test]
    fn reverse_rules() {
        let base = "proc m():\n    a <- 0b0\n    ~a <- a\n    n <- 0\n";
        assert_eq!(
            codes(&format!("{base}    reverse:\n        n <- n + 1\n        H(~a)\n")),
            vec![Code::ClassicalOutputInReverse]
        );
        assert_eq!(
            codes(&format!("{base}    reverse:\n        t <- 0b0\n        ~t <- t\n")),
            vec![Code::QuantumOutputInReverse]
        );
        assert_eq!(
            codes(&format!("{base}    reverse:\n        t <- 0b0\n        ~t <- t\n        dissipate ~t reinit 0\n")),
            vec![Code::DissipateInReverse]
        );
        clean(&format!("{base}    reverse H(~a)\n"));
    }

    #[test]
    fn structure() {
        assert_eq!(codes("proc f():\n    f()\n"), vec![Code::Recursion]);
        assert_eq!(codes("proc f():\n    g()\n"), vec![Code::UnknownProc]);
        assert_eq!(codes("proc f():\n    H()\n"), vec![Code::Arity]);
        assert_eq!(codes("proc f(a, a):\n    x <- 1\n"), vec![Code::DuplicateParam]);
        assert_eq!(codes("proc f():\n    x <- y\n"), vec![Code::Undefined]);
    }

    #[test]
    fn check_reversible_direct() {
        let p = parse("proc m():\n    x <- 1\n").unwrap();
        let body = parse("proc b():\n    H(~a[0])\n").unwrap().procs[0].body.clone();
        let mut env = ModeState::new();
        env.set("a", Mode::Quantum);
        assert!(check_reversible(&p, &body, &env, BlockKind::Qif).is_empty());
        let body = parse("proc b():\n    c <- ~a\n").unwrap().procs[0].body.clone();
        env.set("c", Mode::Classical(Kind::Bits));
        let d = check_reversible(&p, &body, &env, BlockKind::Qif);
        assert_eq!(d[0].code, Code::MeasureInQif);
    }
}
