//! Canonical source printer. `parse(&pretty_print(p))` reproduces `p`.

use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "    ";

pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    for (i, proc) in p.procs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_proc(&mut out, proc);
    }
    out
}

fn print_proc(out: &mut String, p: &Proc) {
    let params: Vec<String> = p.params.iter().map(param_to_string).collect();
    let _ = write!(out, "proc {}({})", p.name, params.join(", "));
    if !p.outputs.is_empty() {
        let outs: Vec<String> = p
            .outputs
            .iter()
            .map(|o| format!("{}{}", if o.quantum { "~" } else { "" }, o.name))
            .collect();
        let _ = write!(out, " -> {}", outs.join(", "));
    }
    out.push_str(":\n");
    if let Some(doc) = &p.doc {
        let _ = writeln!(out, "{INDENT}{}", quote(doc));
    }
    print_block(out, &p.body, 1);
}

fn param_to_string(p: &Param) -> String {
    let mut s = String::new();
    if p.quantum {
        s.push('~');
    }
    s.push_str(&p.name);
    match &p.ty {
        None => {}
        Some(ParamType::Int) => s.push_str(": int"),
        Some(ParamType::Real) => s.push_str(": real"),
        Some(ParamType::Bits(w)) => {
            let _ = write!(s, ": bits[{}]", expr_to_string(w));
        }
    }
    s
}

fn print_block(out: &mut String, body: &[Stmt], depth: usize) {
    for s in body {
        print_stmt(out, s, depth);
    }
}

fn pad(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
}

fn print_stmt(out: &mut String, s: &Stmt, depth: usize) {
    pad(out, depth);
    match s {
        Stmt::QIf { control, body, .. } => {
            let _ = writeln!(out, "qif {}:", ref_to_string(control));
            print_block(out, body, depth + 1);
        }
        Stmt::For {
            var,
            from,
            dir,
            to,
            body,
            ..
        } => {
            let d = match dir {
                Direction::DownTo => "downto",
                Direction::UpTo => "upto",
            };
            let _ = writeln!(
                out,
                "for {var} = {} {d} {}:",
                expr_to_string(from),
                expr_to_string(to)
            );
            print_block(out, body, depth + 1);
        }
        Stmt::Reverse {
            target: ReverseTarget::Block(body),
            ..
        } => {
            out.push_str("reverse:\n");
            print_block(out, body, depth + 1);
        }
        other => {
            out.push_str(&simple_to_string(other));
            out.push('\n');
        }
    }
}

/// One-line form of a statement that has no nested block.
pub fn simple_to_string(s: &Stmt) -> String {
    match s {
        Stmt::Assign { lhs, rhs, .. } => {
            let l: Vec<String> = lhs.iter().map(ref_to_string).collect();
            let r = match rhs {
                Rhs::Expr(e) => expr_to_string(e),
                Rhs::Reversify(c) => format!("reversify {}", call_to_string(c)),
            };
            format!("{} <- {r}", l.join(", "))
        }
        Stmt::Call { call, .. } => call_to_string(call),
        Stmt::Reverse {
            target: ReverseTarget::Stmt(inner),
            ..
        } => format!("reverse {}", simple_to_string(inner)),
        Stmt::Dissipate { target, reinit, .. } => format!(
            "dissipate {} reinit {}",
            ref_to_string(target),
            expr_to_string(reinit)
        ),
        Stmt::AssertClassical {
            lhs, target, proof, ..
        } => {
            let mut s = format!(
                "{} <- assert_classical {}",
                ref_to_string(lhs),
                ref_to_string(target)
            );
            if let Some(p) = proof {
                let _ = write!(s, " proof {}", quote(p));
            }
            s
        }
        Stmt::QIf { control, .. } => format!("qif {}: ...", ref_to_string(control)),
        Stmt::For { var, .. } => format!("for {var} ..."),
        Stmt::Reverse { .. } => "reverse: ...".into(),
    }
}

fn quote(s: &str) -> String {
    let mut q = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

pub fn ref_to_string(r: &RegRef) -> String {
    let mut s = String::new();
    if r.quantum {
        s.push('~');
    }
    s.push_str(&r.name);
    if let Some(i) = &r.index {
        let _ = write!(s, "[{}]", expr_to_string(i));
    }
    s
}

pub fn call_to_string(c: &Call) -> String {
    let args: Vec<String> = c.args.iter().map(expr_to_string).collect();
    format!("{}({})", c.name, args.join(", "))
}

// Binding strength, loosest first. Atoms bind tightest.
const P_OR: u8 = 1;
const P_XOR: u8 = 2;
const P_AND: u8 = 3;
const P_NOT: u8 = 4;
const P_ADD: u8 = 5;
const P_MUL: u8 = 6;
const P_NEG: u8 = 7;
const P_POW: u8 = 8;
const P_ATOM: u8 = 9;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, ..) => binop_prec(*op),
        Expr::Unary(UnOp::Not, _) => P_NOT,
        Expr::Unary(UnOp::Neg, _) => P_NEG,
        Expr::Int(v) if *v < 0 => P_NEG,
        Expr::Real(v) if v.is_sign_negative() => P_NEG,
        _ => P_ATOM,
    }
}

fn binop_prec(op: BinOp) -> u8 {
    match op {
        BinOp::Or => P_OR,
        BinOp::Xor => P_XOR,
        BinOp::And => P_AND,
        BinOp::Add | BinOp::Sub => P_ADD,
        BinOp::Mul | BinOp::Div | BinOp::IntDiv | BinOp::Mod => P_MUL,
        BinOp::Pow => P_POW,
    }
}

fn binop_str(op: BinOp) -> &'static str {
    match op {
        BinOp::Or => "or",
        BinOp::Xor => "xor",
        BinOp::And => "and",
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "/",
        BinOp::IntDiv => "div",
        BinOp::Mod => "mod",
        BinOp::Pow => "^",
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn write_sub(out: &mut String, e: &Expr, min: u8) {
    if prec(e) < min {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Int(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Real(v) => {
            let _ = write!(out, "{v:?}");
        }
        Expr::Bits(b) => {
            out.push_str("0b");
            for &bit in b {
                out.push(if bit { '1' } else { '0' });
            }
        }
        Expr::Pi => out.push_str("pi"),
        Expr::Ref(r) => out.push_str(&ref_to_string(r)),
        Expr::Call(c) => out.push_str(&call_to_string(c)),
        Expr::Unary(UnOp::Not, x) => {
            out.push_str("not ");
            write_sub(out, x, P_NOT);
        }
        Expr::Unary(UnOp::Neg, x) => {
            out.push('-');
            write_sub(out, x, P_NEG);
        }
        Expr::Binary(BinOp::Pow, a, b) => {
            write_sub(out, a, P_ATOM);
            out.push_str(" ^ ");
            write_sub(out, b, P_NEG);
        }
        Expr::Binary(op, a, b) => {
            let p = binop_prec(*op);
            write_sub(out, a, p);
            let _ = write!(out, " {} ", binop_str(*op));
            write_sub(out, b, p + 1);
        }
    }
}
