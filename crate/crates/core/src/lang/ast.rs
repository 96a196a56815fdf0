//! Syntax tree for `.qps` programs.

use super::diag::Span;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub procs: Vec<Proc>,
}

impl Program {
    pub fn proc(&self, name: &str) -> Option<&Proc> {
        self.procs.iter().find(|p| p.name == name)
    }

    /// The entry point: the named proc, else `main`, else the last proc.
    pub fn entry(&self, name: Option<&str>) -> Option<&Proc> {
        match name {
            Some(n) => self.proc(n),
            None => self.proc("main").or_else(|| self.procs.last()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proc {
    pub name: String,
    pub params: Vec<Param>,
    pub outputs: Vec<OutputDecl>,
    /// Input/output contract text (leading string of the body).
    pub doc: Option<String>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub quantum: bool,
    pub ty: Option<ParamType>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamType {
    Int,
    Real,
    Bits(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputDecl {
    pub name: String,
    pub quantum: bool,
    pub span: Span,
}

/// A register reference: `a`, `~a`, `a[i]` or `~a[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegRef {
    pub name: String,
    pub quantum: bool,
    pub index: Option<Box<Expr>>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub name: String,
    pub args: Vec<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    IntDiv,
    Mod,
    Pow,
    And,
    Or,
    Xor,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Real(f64),
    /// Bit literal, most significant bit first as written (`0b101`).
    Bits(Vec<bool>),
    Pi,
    Ref(RegRef),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Call),
}

impl Expr {
    /// Every register reference in the expression, outermost first.
    pub fn refs(&self) -> Vec<&RegRef> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a RegRef>) {
        match self {
            Expr::Ref(r) => {
                out.push(r);
                if let Some(i) = &r.index {
                    i.collect_refs(out);
                }
            }
            Expr::Unary(_, e) => e.collect_refs(out),
            Expr::Binary(_, a, b) => {
                a.collect_refs(out);
                b.collect_refs(out);
            }
            Expr::Call(c) => c.args.iter().for_each(|a| a.collect_refs(out)),
            Expr::Int(_) | Expr::Real(_) | Expr::Bits(_) | Expr::Pi => {}
        }
    }

    /// Calls nested anywhere in the expression.
    pub fn calls(&self) -> Vec<&Call> {
        let mut out = Vec::new();
        self.collect_calls(&mut out);
        out
    }

    fn collect_calls<'a>(&'a self, out: &mut Vec<&'a Call>) {
        match self {
            Expr::Call(c) => {
                out.push(c);
                c.args.iter().for_each(|a| a.collect_calls(out));
            }
            Expr::Ref(r) => {
                if let Some(i) = &r.index {
                    i.collect_calls(out);
                }
            }
            Expr::Unary(_, e) => e.collect_calls(out),
            Expr::Binary(_, a, b) => {
                a.collect_calls(out);
                b.collect_calls(out);
            }
            Expr::Int(_) | Expr::Real(_) | Expr::Bits(_) | Expr::Pi => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    DownTo,
    UpTo,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rhs {
    Expr(Expr),
    /// `reversify F(args)`: the reversible version of a classical proc.
    Reversify(Call),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReverseTarget {
    Block(Vec<Stmt>),
    /// A call statement or an assignment whose right side is a call.
    Stmt(Box<Stmt>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Assign {
        lhs: Vec<RegRef>,
        rhs: Rhs,
        span: Span,
    },
    Call {
        call: Call,
        span: Span,
    },
    QIf {
        control: RegRef,
        body: Vec<Stmt>,
        span: Span,
    },
    For {
        var: String,
        from: Expr,
        dir: Direction,
        to: Expr,
        body: Vec<Stmt>,
        span: Span,
    },
    Reverse {
        target: ReverseTarget,
        span: Span,
    },
    Dissipate {
        target: RegRef,
        reinit: Expr,
        span: Span,
    },
    AssertClassical {
        lhs: RegRef,
        target: RegRef,
        proof: Option<String>,
        span: Span,
    },
}

impl Stmt {
    pub fn span(&self) -> Span {
        match self {
            Stmt::Assign { span, .. }
            | Stmt::Call { span, .. }
            | Stmt::QIf { span, .. }
            | Stmt::For { span, .. }
            | Stmt::Reverse { span, .. }
            | Stmt::Dissipate { span, .. }
            | Stmt::AssertClassical { span, .. } => *span,
        }
    }
}

/// Words that cannot be used as register or proc names.
pub const KEYWORDS: &[&str] = &[
    "proc",
    "qif",
    "for",
    "downto",
    "upto",
    "reverse",
    "dissipate",
    "reinit",
    "assert_classical",
    "proof",
    "reversify",
    "and",
    "or",
    "xor",
    "not",
    "div",
    "mod",
    "pi",
    "int",
    "real",
    "bits",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}
