//! Recursive-descent parser for `.qps` source.

use super::ast::*;
use super::diag::{Code, Diagnostic, Span};
use super::lexer::{tokenize, Tok, Token};

/// Nesting bound for blocks and expressions; deeper input is rejected with a
/// diagnostic instead of exhausting the stack.
const MAX_DEPTH: usize = 64;

pub fn parse(src: &str) -> Result<Program, Diagnostic> {
    let tokens = tokenize(src)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        depth: 0,
    };
    p.program()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn advance(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(Diagnostic::new(self.span(), Code::Parse, msg))
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        self.error(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> PResult<()> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            self.unexpected(wanted)
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.advance();
            Ok(())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn name(&mut self) -> PResult<String> {
        match self.peek() {
            Tok::Ident(s) if !is_keyword(s) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            Tok::Ident(s) => self.error(format!("`{s}` is a reserved word")),
            _ => self.unexpected("a name"),
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.error("nesting too deep");
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn skip_newlines(&mut self) {
        while *self.peek() == Tok::Newline {
            self.advance();
        }
    }

    fn program(&mut self) -> PResult<Program> {
        let mut procs = Vec::new();
        self.skip_newlines();
        while *self.peek() != Tok::Eof {
            procs.push(self.proc()?);
            self.skip_newlines();
        }
        if procs.is_empty() {
            return Err(Diagnostic::new(
                self.span(),
                Code::EmptyProgram,
                "program contains no procs",
            ));
        }
        Ok(Program { procs })
    }

    fn proc(&mut self) -> PResult<Proc> {
        let span = self.span();
        self.expect_kw("proc")?;
        let name = self.name()?;
        self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                params.push(self.param()?);
                if *self.peek() == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        let mut outputs = Vec::new();
        if *self.peek() == Tok::RArrow {
            self.advance();
            loop {
                let span = self.span();
                let quantum = self.tilde();
                let name = self.name()?;
                outputs.push(OutputDecl {
                    name,
                    quantum,
                    span,
                });
                if *self.peek() == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::Colon, "`:`")?;
        self.expect(Tok::Newline, "end of line after proc header")?;
        self.expect(Tok::Indent, "an indented proc body")?;
        let mut doc = None;
        if let Tok::Str(s) = self.peek() {
            if *self.peek_at(1) == Tok::Newline {
                doc = Some(s.clone());
                self.advance();
                self.advance();
            }
        }
        let body = self.stmts_until_dedent()?;
        Ok(Proc {
            name,
            params,
            outputs,
            doc,
            body,
            span,
        })
    }

    fn tilde(&mut self) -> bool {
        if *self.peek() == Tok::Tilde {
            self.advance();
            true
        } else {
            false
        }
    }

    fn param(&mut self) -> PResult<Param> {
        let span = self.span();
        let quantum = self.tilde();
        let name = self.name()?;
        let ty = if *self.peek() == Tok::Colon && matches!(self.peek_at(1), Tok::Ident(_)) {
            self.advance();
            Some(match self.advance() {
                Tok::Ident(s) if s == "int" => ParamType::Int,
                Tok::Ident(s) if s == "real" => ParamType::Real,
                Tok::Ident(s) if s == "bits" => {
                    self.expect(Tok::LBrack, "`[` after `bits`")?;
                    let w = self.expr()?;
                    self.expect(Tok::RBrack, "`]`")?;
                    ParamType::Bits(w)
                }
                other => {
                    self.pos -= 1;
                    return self.error(format!(
                        "expected `int`, `real` or `bits[..]`, found {}",
                        other.describe()
                    ));
                }
            })
        } else {
            None
        };
        Ok(Param {
            name,
            quantum,
            ty,
            span,
        })
    }

    /// Statements up to and including the closing DEDENT.
    fn stmts_until_dedent(&mut self) -> PResult<Vec<Stmt>> {
        let mut body = Vec::new();
        while *self.peek() != Tok::Dedent {
            if *self.peek() == Tok::Eof {
                return self.unexpected("a statement");
            }
            body.push(self.stmt()?);
        }
        self.advance();
        if body.is_empty() {
            return self.error("empty block");
        }
        Ok(body)
    }

    /// After a `:`, either an indented block or a single simple statement on
    /// the same line.
    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect(Tok::Colon, "`:`")?;
        if *self.peek() == Tok::Newline {
            self.advance();
            self.expect(Tok::Indent, "an indented block")?;
            self.stmts_until_dedent()
        } else {
            let s = self.simple_stmt()?;
            self.expect(Tok::Newline, "end of line")?;
            Ok(vec![s])
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        self.enter()?;
        let r = self.stmt_inner();
        self.leave();
        r
    }

    fn stmt_inner(&mut self) -> PResult<Stmt> {
        let span = self.span();
        if self.is_kw("qif") {
            self.advance();
            let control = self.reg_ref()?;
            let body = self.block()?;
            return Ok(Stmt::QIf {
                control,
                body,
                span,
            });
        }
        if self.is_kw("for") {
            self.advance();
            let var = self.name()?;
            self.expect(Tok::Eq, "`=`")?;
            let from = self.expr()?;
            let dir = if self.is_kw("downto") {
                Direction::DownTo
            } else if self.is_kw("upto") {
                Direction::UpTo
            } else {
                return self.unexpected("`downto` or `upto`");
            };
            self.advance();
            let to = self.expr()?;
            let body = self.block()?;
            return Ok(Stmt::For {
                var,
                from,
                dir,
                to,
                body,
                span,
            });
        }
        if self.is_kw("reverse") && *self.peek_at(1) == Tok::Colon {
            self.advance();
            let body = self.block()?;
            return Ok(Stmt::Reverse {
                target: ReverseTarget::Block(body),
                span,
            });
        }
        let s = self.simple_stmt()?;
        self.expect(Tok::Newline, "end of line")?;
        Ok(s)
    }

    fn simple_stmt(&mut self) -> PResult<Stmt> {
        let span = self.span();
        if self.is_kw("reverse") {
            self.advance();
            let inner = self.simple_stmt()?;
            let ok = matches!(
                &inner,
                Stmt::Call { .. }
                    | Stmt::Assign {
                        rhs: Rhs::Expr(Expr::Call(_)),
                        ..
                    }
            );
            if !ok {
                return Err(Diagnostic::new(
                    span,
                    Code::Parse,
                    "`reverse` expects a call, an assignment from a call, or a block",
                ));
            }
            return Ok(Stmt::Reverse {
                target: ReverseTarget::Stmt(Box::new(inner)),
                span,
            });
        }
        if self.is_kw("dissipate") {
            self.advance();
            let target = self.reg_ref()?;
            self.expect_kw("reinit")?;
            let reinit = self.expr()?;
            return Ok(Stmt::Dissipate {
                target,
                reinit,
                span,
            });
        }
        if matches!(self.peek(), Tok::Ident(s) if !is_keyword(s)) && *self.peek_at(1) == Tok::LParen {
            let call = self.call()?;
            return Ok(Stmt::Call { call, span });
        }
        let mut lhs = vec![self.reg_ref()?];
        while *self.peek() == Tok::Comma {
            self.advance();
            lhs.push(self.reg_ref()?);
        }
        self.expect(Tok::LArrow, "`<-`")?;
        if self.is_kw("assert_classical") {
            self.advance();
            if lhs.len() != 1 {
                return Err(Diagnostic::new(
                    span,
                    Code::Parse,
                    "assert_classical binds exactly one register",
                ));
            }
            let target = self.reg_ref()?;
            let proof = if self.is_kw("proof") {
                self.advance();
                match self.advance() {
                    Tok::Str(s) => Some(s),
                    _ => {
                        self.pos -= 1;
                        return self.unexpected("a proof string");
                    }
                }
            } else {
                None
            };
            return Ok(Stmt::AssertClassical {
                lhs: lhs.pop().expect("one lhs"),
                target,
                proof,
                span,
            });
        }
        if self.is_kw("reversify") {
            self.advance();
            if !matches!(self.peek_at(1), Tok::LParen) {
                return self.unexpected("a proc call after `reversify`");
            }
            let call = self.call()?;
            return Ok(Stmt::Assign {
                lhs,
                rhs: Rhs::Reversify(call),
                span,
            });
        }
        let rhs = self.expr()?;
        Ok(Stmt::Assign {
            lhs,
            rhs: Rhs::Expr(rhs),
            span,
        })
    }

    fn reg_ref(&mut self) -> PResult<RegRef> {
        let span = self.span();
        let quantum = self.tilde();
        let name = self.name()?;
        let index = if *self.peek() == Tok::LBrack {
            self.advance();
            let e = self.expr()?;
            self.expect(Tok::RBrack, "`]`")?;
            Some(Box::new(e))
        } else {
            None
        };
        Ok(RegRef {
            name,
            quantum,
            index,
            span,
        })
    }

    fn call(&mut self) -> PResult<Call> {
        let span = self.span();
        let name = self.name()?;
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.expr()?);
                if *self.peek() == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(Call { name, args, span })
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.enter()?;
        let r = self.or_expr();
        self.leave();
        r
    }

    fn binary_level(
        &mut self,
        ops: &[(&str, BinOp)],
        next: fn(&mut Self) -> PResult<Expr>,
    ) -> PResult<Expr> {
        let mut lhs = next(self)?;
        'outer: loop {
            for (kw, op) in ops {
                if self.is_kw(kw) {
                    self.advance();
                    let rhs = next(self)?;
                    lhs = Expr::Binary(*op, Box::new(lhs), Box::new(rhs));
                    continue 'outer;
                }
            }
            return Ok(lhs);
        }
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        self.binary_level(&[("or", BinOp::Or)], Self::xor_expr)
    }

    fn xor_expr(&mut self) -> PResult<Expr> {
        self.binary_level(&[("xor", BinOp::Xor)], Self::and_expr)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        self.binary_level(&[("and", BinOp::And)], Self::not_expr)
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if self.is_kw("not") {
            self.advance();
            self.enter()?;
            let e = self.not_expr();
            self.leave();
            return Ok(Expr::Unary(UnOp::Not, Box::new(e?)));
        }
        self.additive()
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.multiplicative()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Ident(s) if s == "div" => BinOp::IntDiv,
                Tok::Ident(s) if s == "mod" => BinOp::Mod,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Minus {
            self.advance();
            self.enter()?;
            let e = self.unary();
            self.leave();
            return Ok(Expr::Unary(UnOp::Neg, Box::new(e?)));
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.advance();
            self.enter()?;
            let exp = self.unary();
            self.leave();
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                Ok(Expr::Int(v))
            }
            Tok::Real(v) => {
                self.advance();
                Ok(Expr::Real(v))
            }
            Tok::Bits(b) => {
                self.advance();
                Ok(Expr::Bits(b))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(s) if s == "pi" => {
                self.advance();
                Ok(Expr::Pi)
            }
            Tok::Ident(s) if !is_keyword(&s) && *self.peek_at(1) == Tok::LParen => {
                Ok(Expr::Call(self.call()?))
            }
            Tok::Tilde | Tok::Ident(_) => Ok(Expr::Ref(self.reg_ref()?)),
            _ => self.unexpected("an expression"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOURIER: &str = "\
proc Fourier(~a: bits[d], d: int):
    for i = d - 1 downto 0:
        for j = d - 1 downto i + 1:
            qif ~a[j]:
                Phase(pi / 2 ^ (j - i), ~a[i])
        H(~a[i])
";

    #[test]
    fn fourier_structure() {
        let p = parse(FOURIER).unwrap();
        let f = &p.procs[0];
        assert_eq!(f.params.len(), 2);
        assert!(f.params[0].quantum);
        let Stmt::For { body, dir, .. } = &f.body[0] else { panic!() };
        assert_eq!(*dir, Direction::DownTo);
        let Stmt::For { body: inner, .. } = &body[0] else { panic!() };
        assert!(matches!(inner[0], Stmt::QIf { .. }));
        assert!(matches!(body[1], Stmt::Call { .. }));
    }

    #[test]
    fn empty_program() {
        assert_eq!(parse("").unwrap_err().code, Code::EmptyProgram);
        assert_eq!(parse("\n  \n# only a comment\n").unwrap_err().code, Code::EmptyProgram);
    }

    #[test]
    fn undeclared_promotion_parses() {
        let p = parse("proc m():\n    ~a <- a\n").unwrap();
        let Stmt::Assign { lhs, rhs, .. } = &p.procs[0].body[0] else { panic!() };
        assert!(lhs[0].quantum);
        assert!(matches!(rhs, Rhs::Expr(Expr::Ref(r)) if !r.quantum));
    }

    #[test]
    fn inline_blocks_and_forms() {
        let src = "proc m(~b, ~a, ~c) -> x:\n    qif ~b: X(~a)\n    reverse H(~a)\n    reverse ~c <- F(~a)\n    reverse:\n        H(~a)\n    dissipate ~c reinit 0\n    x <- assert_classical ~b proof \"obvious\"\n    ~y <- reversify Maj(~a)\n";
        let p = parse(src).unwrap();
        let b = &p.procs[0].body;
        assert_eq!(b.len(), 7);
        assert!(matches!(&b[1], Stmt::Reverse { target: ReverseTarget::Stmt(_), .. }));
        assert!(matches!(&b[3], Stmt::Reverse { target: ReverseTarget::Block(_), .. }));
        assert!(matches!(&b[5], Stmt::AssertClassical { proof: Some(_), .. }));
        assert!(matches!(&b[6], Stmt::Assign { rhs: Rhs::Reversify(_), .. }));
    }

    #[test]
    fn precedence() {
        let p = parse("proc m():\n    x <- -2 ^ 2 + 3 * 4\n").unwrap();
        let Stmt::Assign { rhs: Rhs::Expr(e), .. } = &p.procs[0].body[0] else { panic!() };
        let Expr::Binary(BinOp::Add, l, r) = e else { panic!("{e:?}") };
        assert!(matches!(**l, Expr::Unary(UnOp::Neg, _)));
        assert!(matches!(**r, Expr::Binary(BinOp::Mul, _, _)));
    }

    #[test]
    fn diagnostics_carry_positions() {
        let d = parse("proc m():\n    x <- (1 +\n").unwrap_err();
        assert_eq!(d.code, Code::Parse);
        let d = parse("proc m():\n    H(~a\n    X(~a)\n").unwrap_err();
        assert_eq!(d.code, Code::Parse);
        let d = parse("proc m():\n    reverse x <- 1\n").unwrap_err();
        assert_eq!((d.line, d.col), (2, 5));
        assert!(d.to_string().starts_with("2:5 E_PARSE"));
    }

    #[test]
    fn deep_nesting_is_rejected_not_overflowed() {
        let src = format!("proc m():\n    x <- {}1{}\n", "(".repeat(5000), ")".repeat(5000));
        assert_eq!(parse(&src).unwrap_err().code, Code::Parse);
        let src = format!("proc m():\n    x <- {}1\n", "-".repeat(5000));
        assert_eq!(parse(&src).unwrap_err().code, Code::Parse);
    }

    #[test]
    fn doc_string() {
        let p = parse("proc m():\n    \"contract\"\n    x <- 1\n").unwrap();
        assert_eq!(p.procs[0].doc.as_deref(), Some("contract"));
    }
}
