//! Compiles a classical bit-level proc into a reversible circuit
//! `|a⟩|0⟩|0…⟩ → |a⟩|f(a)⟩|0…⟩`.
//!
//! Values depending on the quantum input are tracked symbolically as XOR
//! combinations of wires plus a constant, so XOR and NOT cost no gates.
//! Each AND takes one fresh ancilla and a Toffoli; OR goes through De
//! Morgan. The circuit computes, copies the results into the output wires
//! with CNOTs, then runs the computation backwards.

use std::collections::{BTreeSet, HashMap};

use super::value::{self, Cell, Value};
use crate::gates::{self, GateSpec};
use crate::lang::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Wire {
    /// Bit `k` of the concatenated quantum arguments, each least
    /// significant first.
    Input(usize),
    /// Bit `k` of the concatenated outputs, each least significant first.
    Output(usize),
    Ancilla(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RevArg {
    /// A quantum register of this width.
    Quantum(usize),
    Classical(Value),
}

#[derive(Debug, Clone)]
pub struct ReversibleCircuit {
    pub inputs: usize,
    /// Output register widths in declaration order.
    pub outputs: Vec<usize>,
    pub ancillas: usize,
    pub gates: Vec<(GateSpec, Vec<Wire>)>,
}

/// Statements executed while unrolling, at most.
const MAX_STEPS: u64 = 1_000_000;
const MAX_ANCILLAS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
struct Lin {
    vars: BTreeSet<Wire>,
    c: bool,
}

impl Lin {
    fn constant(c: bool) -> Lin {
        Lin {
            vars: BTreeSet::new(),
            c,
        }
    }

    fn wire(w: Wire, c: bool) -> Lin {
        Lin {
            vars: BTreeSet::from([w]),
            c,
        }
    }

    fn xor(&self, o: &Lin) -> Lin {
        Lin {
            vars: self.vars.symmetric_difference(&o.vars).copied().collect(),
            c: self.c ^ o.c,
        }
    }

    fn not(&self) -> Lin {
        Lin {
            vars: self.vars.clone(),
            c: !self.c,
        }
    }
}

#[derive(Debug, Clone)]
enum Sym {
    Val(Value),
    Bits(Vec<Lin>),
}

type Env = HashMap<String, Sym>;

struct Compiler {
    gates: Vec<(GateSpec, Vec<Wire>)>,
    ancillas: usize,
    steps: u64,
}

fn at(span: crate::lang::diag::Span, msg: impl AsRef<str>) -> String {
    format!("{}:{}: {}", span.line, span.col, msg.as_ref())
}

pub fn compile(f: &Proc, args: &[RevArg]) -> Result<ReversibleCircuit, String> {
    if f.params.len() != args.len() {
        return Err(format!("`{}` takes {} arguments, got {}", f.name, f.params.len(), args.len()));
    }
    let mut c = Compiler {
        gates: Vec::new(),
        ancillas: 0,
        steps: 0,
    };
    let mut env = Env::new();
    for (par, a) in f.params.iter().zip(args) {
        if let RevArg::Classical(v) = a {
            env.insert(par.name.clone(), Sym::Val(v.clone()));
        }
    }
    let mut next = 0;
    for (par, a) in f.params.iter().zip(args) {
        if let RevArg::Quantum(w) = a {
            if let Some(ParamType::Bits(e)) = &par.ty {
                let want = c.eval(e, &mut env.clone())?;
                let want = c.concrete_int(&want, par.span)?;
                if want != *w as i64 {
                    return Err(at(par.span, format!("`{}` has width {want}, got {w}", par.name)));
                }
            }
            let bits = (next..next + w).map(|k| Lin::wire(Wire::Input(k), false)).collect();
            next += w;
            env.insert(par.name.clone(), Sym::Bits(bits));
        }
    }
    c.block(&f.body, &mut env)?;

    let mut widths = Vec::new();
    let mut results: Vec<Lin> = Vec::new();
    for o in &f.outputs {
        let s = env
            .get(&o.name)
            .ok_or_else(|| at(o.span, format!("output `{}` is never set", o.name)))?;
        let lins = lift(s).map_err(|m| at(o.span, format!("output `{}`: {m}", o.name)))?;
        widths.push(lins.len());
        results.extend(lins);
    }

    let compute = std::mem::take(&mut c.gates);
    let mut gates_out = compute.clone();
    for (k, lin) in results.iter().enumerate() {
        for v in &lin.vars {
            gates_out.push((gates::cnot(), vec![*v, Wire::Output(k)]));
        }
        if lin.c {
            gates_out.push((gates::pauli_x(), vec![Wire::Output(k)]));
        }
    }
    for (g, ws) in compute.iter().rev() {
        gates_out.push((gates::inverse(g), ws.clone()));
    }
    Ok(ReversibleCircuit {
        inputs: next,
        outputs: widths,
        ancillas: c.ancillas,
        gates: gates_out,
    })
}

fn lift(s: &Sym) -> Result<Vec<Lin>, String> {
    match s {
        Sym::Bits(l) => Ok(l.clone()),
        Sym::Val(Value::Bits(cells)) => cells
            .iter()
            .map(|c| match c {
                Cell::C(b) => Ok(Lin::constant(*b)),
                Cell::Q(_) => Err("quantum bit in a classical value".to_string()),
            })
            .collect(),
        Sym::Val(Value::Int(0)) => Ok(vec![Lin::constant(false)]),
        Sym::Val(Value::Int(1)) => Ok(vec![Lin::constant(true)]),
        Sym::Val(v) => Err(format!("{v} is not a bit value")),
    }
}

impl Compiler {
    fn block(&mut self, body: &[Stmt], env: &mut Env) -> Result<(), String> {
        for s in body {
            self.steps += 1;
            if self.steps > MAX_STEPS {
                return Err(at(s.span(), "unrolling exceeds the step budget"));
            }
            self.stmt(s, env)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt, env: &mut Env) -> Result<(), String> {
        match s {
            Stmt::Assign {
                lhs,
                rhs: Rhs::Expr(e),
                span,
            } if lhs.len() == 1 && !lhs[0].quantum => {
                let l = &lhs[0];
                let v = self.eval(e, env)?;
                match &l.index {
                    None => {
                        env.insert(l.name.clone(), v);
                    }
                    Some(ie) => {
                        let i = self.eval(ie, env)?;
                        let i = self.concrete_int(&i, *span)?;
                        let target = env
                            .get(&l.name)
                            .ok_or_else(|| at(*span, format!("`{}` is not defined", l.name)))?;
                        let mut bits = lift(target).map_err(|m| at(*span, m))?;
                        let bit = lift(&v).map_err(|m| at(*span, m))?;
                        let [bit] = bit.as_slice() else {
                            return Err(at(*span, "a single bit is needed here"));
                        };
                        let slot = usize::try_from(i)
                            .ok()
                            .and_then(|i| bits.get_mut(i))
                            .ok_or_else(|| at(*span, format!("index {i} out of range for `{}`", l.name)))?;
                        *slot = bit.clone();
                        env.insert(l.name.clone(), Sym::Bits(bits));
                    }
                }
                Ok(())
            }
            Stmt::For {
                var,
                from,
                dir,
                to,
                body,
                span,
            } => {
                let a = self.eval(from, env)?;
                let a = self.concrete_int(&a, *span)?;
                let b = self.eval(to, env)?;
                let b = self.concrete_int(&b, *span)?;
                let saved = env.remove(var);
                let range: Box<dyn Iterator<Item = i64>> = match dir {
                    Direction::DownTo if a >= b => Box::new((b..=a).rev()),
                    Direction::UpTo if a <= b => Box::new(a..=b),
                    _ => Box::new(std::iter::empty()),
                };
                for i in range {
                    env.insert(var.clone(), Sym::Val(Value::Int(i)));
                    self.block(body, env)?;
                }
                match saved {
                    Some(v) => env.insert(var.clone(), v),
                    None => env.remove(var),
                };
                Ok(())
            }
            other => Err(at(
                other.span(),
                "only single classical assignments and loops can be reversified",
            )),
        }
    }

    fn concrete_int(&self, s: &Sym, span: crate::lang::diag::Span) -> Result<i64, String> {
        match s {
            Sym::Val(v) => value::as_int(v).map_err(|m| at(span, m)),
            Sym::Bits(_) => Err(at(span, "this value must not depend on the quantum input")),
        }
    }

    fn eval(&mut self, e: &Expr, env: &mut Env) -> Result<Sym, String> {
        match e {
            Expr::Int(v) => Ok(Sym::Val(Value::Int(*v))),
            Expr::Real(v) => Ok(Sym::Val(Value::Real(*v))),
            Expr::Bits(b) => Ok(Sym::Val(Value::from_msb(b))),
            Expr::Pi => Ok(Sym::Val(Value::Real(std::f64::consts::PI))),
            Expr::Ref(r) => {
                let s = env
                    .get(&r.name)
                    .cloned()
                    .ok_or_else(|| at(r.span, format!("`{}` is not defined", r.name)))?;
                let Some(ie) = &r.index else { return Ok(s) };
                let i = self.eval(ie, env)?;
                let i = self.concrete_int(&i, r.span)?;
                match s {
                    Sym::Val(v) => match value::index_value(&v, i).map_err(|m| at(r.span, m))? {
                        Cell::C(b) => Ok(Sym::Val(Value::Int(b as i64))),
                        Cell::Q(_) => Err(at(r.span, "quantum bit in a classical value")),
                    },
                    Sym::Bits(l) => usize::try_from(i)
                        .ok()
                        .and_then(|i| l.get(i).cloned())
                        .map(|b| Sym::Bits(vec![b]))
                        .ok_or_else(|| at(r.span, format!("index {i} out of range for `{}`", r.name))),
                }
            }
            Expr::Unary(op, x) => match (op, self.eval(x, env)?) {
                (_, Sym::Val(v)) => value::unop(*op, &v).map(Sym::Val),
                (UnOp::Not, Sym::Bits(l)) => Ok(Sym::Bits(l.iter().map(Lin::not).collect())),
                (UnOp::Neg, Sym::Bits(_)) => Err("negation of a value that depends on the quantum input".into()),
            },
            Expr::Binary(op, a, b) => {
                let x = self.eval(a, env)?;
                let y = self.eval(b, env)?;
                if let (Sym::Val(p), Sym::Val(q)) = (&x, &y) {
                    return value::binop(*op, p, q).map(Sym::Val);
                }
                if !matches!(op, BinOp::And | BinOp::Or | BinOp::Xor) {
                    return Err(format!(
                        "operator {op:?} on a value that depends on the quantum input; only and, or, xor and not are allowed"
                    ));
                }
                let (p, q) = (lift(&x)?, lift(&y)?);
                if p.len() != q.len() {
                    return Err(format!("bit widths {} and {} in {op:?}", p.len(), q.len()));
                }
                let mut out = Vec::with_capacity(p.len());
                for (s, t) in p.iter().zip(&q) {
                    out.push(match op {
                        BinOp::Xor => s.xor(t),
                        BinOp::And => self.and(s, t)?,
                        _ => self.and(&s.not(), &t.not())?.not(),
                    });
                }
                Ok(Sym::Bits(out))
            }
            Expr::Call(c) => {
                let mut vals = Vec::new();
                for a in &c.args {
                    match self.eval(a, env)? {
                        Sym::Val(v) => vals.push(v),
                        Sym::Bits(_) => {
                            return Err(at(c.span, format!("`{}` of a value that depends on the quantum input", c.name)))
                        }
                    }
                }
                match (c.name.as_str(), vals.as_slice()) {
                    ("zeros", [n]) => {
                        let n = value::as_int(n)?;
                        if !(1..=4096).contains(&n) {
                            return Err(at(c.span, format!("zeros({n}): width out of range")));
                        }
                        Ok(Sym::Val(Value::Bits(vec![Cell::C(false); n as usize])))
                    }
                    _ => Err(at(c.span, format!("call to `{}` cannot be reversified", c.name))),
                }
            }
        }
    }

    fn fresh(&mut self) -> Result<Wire, String> {
        if self.ancillas >= MAX_ANCILLAS {
            return Err("too many ancillas".into());
        }
        self.ancillas += 1;
        Ok(Wire::Ancilla(self.ancillas - 1))
    }

    /// A single wire holding `x` up to negation.
    fn materialize(&mut self, x: &Lin) -> Result<(Wire, bool), String> {
        if x.vars.len() == 1 {
            return Ok((*x.vars.iter().next().expect("one var"), x.c));
        }
        let a = self.fresh()?;
        for v in &x.vars {
            self.gates.push((gates::cnot(), vec![*v, a]));
        }
        Ok((a, x.c))
    }

    fn and(&mut self, x: &Lin, y: &Lin) -> Result<Lin, String> {
        if x.vars.is_empty() {
            return Ok(if x.c { y.clone() } else { Lin::constant(false) });
        }
        if y.vars.is_empty() {
            return Ok(if y.c { x.clone() } else { Lin::constant(false) });
        }
        let (wx, nx) = self.materialize(x)?;
        let (wy, ny) = self.materialize(y)?;
        if wx == wy {
            return Ok(if nx == ny { Lin::wire(wx, nx) } else { Lin::constant(false) });
        }
        let t = self.fresh()?;
        let flips: Vec<Wire> = [(wx, nx), (wy, ny)].iter().filter(|p| p.1).map(|p| p.0).collect();
        for w in &flips {
            self.gates.push((gates::pauli_x(), vec![*w]));
        }
        self.gates.push((gates::toffoli(), vec![wx, wy, t]));
        for w in &flips {
            self.gates.push((gates::pauli_x(), vec![*w]));
        }
        Ok(Lin::wire(t, false))
    }
}
