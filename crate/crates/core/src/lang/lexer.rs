//! Tokenizer with Python-style indentation tracking.

use super::diag::{Code, Diagnostic, Span};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Real(f64),
    Bits(Vec<bool>),
    Str(String),
    Tilde,
    LArrow,
    RArrow,
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Colon,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Eq,
    Newline,
    Indent,
    Dedent,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("integer {v}"),
            Tok::Real(v) => format!("real {v:?}"),
            Tok::Bits(_) => "bit literal".into(),
            Tok::Str(_) => "string".into(),
            Tok::Tilde => "`~`".into(),
            Tok::LArrow => "`<-`".into(),
            Tok::RArrow => "`->`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrack => "`[`".into(),
            Tok::RBrack => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Newline => "end of line".into(),
            Tok::Indent => "indent".into(),
            Tok::Dedent => "dedent".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
    depth: usize,
    indents: Vec<usize>,
    out: Vec<Token>,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut lx = Lexer {
        chars: src.chars().collect(),
        pos: 0,
        line: 1,
        col: 1,
        depth: 0,
        indents: vec![0],
        out: Vec::new(),
    };
    lx.run()?;
    Ok(lx.out)
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, k: usize) -> Option<char> {
        self.chars.get(self.pos + k).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn span(&self) -> Span {
        Span::new(self.line, self.col)
    }

    fn err(&self, span: Span, msg: impl Into<String>) -> Diagnostic {
        Diagnostic::new(span, Code::Lex, msg)
    }

    fn push(&mut self, tok: Tok, span: Span) {
        self.out.push(Token { tok, span });
    }

    fn last_is_newline(&self) -> bool {
        matches!(
            self.out.last().map(|t| &t.tok),
            None | Some(Tok::Newline) | Some(Tok::Indent) | Some(Tok::Dedent)
        )
    }

    fn run(&mut self) -> Result<(), Diagnostic> {
        let mut at_line_start = true;
        loop {
            if at_line_start && self.depth == 0 {
                at_line_start = false;
                if !self.handle_indentation()? {
                    break;
                }
            }
            let Some(c) = self.peek() else { break };
            let span = self.span();
            match c {
                '\n' => {
                    self.bump();
                    if self.depth == 0 {
                        if !self.last_is_newline() {
                            self.push(Tok::Newline, span);
                        }
                        at_line_start = true;
                    }
                }
                ' ' | '\r' => {
                    self.bump();
                }
                '\t' => {
                    if self.depth == 0 {
                        return Err(self.err(span, "tab characters are not allowed"));
                    }
                    self.bump();
                }
                '#' => {
                    while !matches!(self.peek(), None | Some('\n')) {
                        self.bump();
                    }
                }
                '"' => self.string()?,
                '0'..='9' => self.number()?,
                c if c.is_alphabetic() || c == '_' => self.ident(),
                _ => self.punct(c, span)?,
            }
        }
        let end = self.span();
        if !self.last_is_newline() {
            self.push(Tok::Newline, end);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(Tok::Dedent, end);
        }
        self.push(Tok::Eof, end);
        Ok(())
    }

    /// Consumes leading whitespace of a logical line and emits
    /// INDENT/DEDENT tokens. Returns false at end of input.
    fn handle_indentation(&mut self) -> Result<bool, Diagnostic> {
        loop {
            let mut width = 0;
            while let Some(c) = self.peek() {
                match c {
                    ' ' => width += 1,
                    '\r' => {}
                    '\t' => return Err(self.err(self.span(), "tab characters are not allowed in indentation")),
                    _ => break,
                }
                self.bump();
            }
            match self.peek() {
                None => return Ok(false),
                Some('\n') => {
                    self.bump();
                    continue;
                }
                Some('#') => {
                    while !matches!(self.peek(), None | Some('\n')) {
                        self.bump();
                    }
                    continue;
                }
                Some(_) => {}
            }
            let span = self.span();
            let current = *self.indents.last().expect("indent stack");
            if width > current {
                self.indents.push(width);
                self.push(Tok::Indent, span);
            } else {
                while width < *self.indents.last().expect("indent stack") {
                    self.indents.pop();
                    self.push(Tok::Dedent, span);
                }
                if width != *self.indents.last().expect("indent stack") {
                    return Err(self.err(span, "inconsistent dedent"));
                }
            }
            return Ok(true);
        }
    }

    fn string(&mut self) -> Result<(), Diagnostic> {
        let span = self.span();
        self.bump();
        let mut s = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => return Err(self.err(span, "unterminated string")),
                Some('"') => break,
                Some('\\') => match self.bump() {
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    Some('n') => s.push('\n'),
                    _ => return Err(self.err(span, "invalid escape in string")),
                },
                Some(c) => s.push(c),
            }
        }
        self.push(Tok::Str(s), span);
        Ok(())
    }

    fn number(&mut self) -> Result<(), Diagnostic> {
        let span = self.span();
        if self.peek() == Some('0') && self.peek_at(1) == Some('b') {
            self.bump();
            self.bump();
            let mut bits = Vec::new();
            while let Some(c @ ('0' | '1')) = self.peek() {
                bits.push(c == '1');
                self.bump();
            }
            if bits.is_empty() || matches!(self.peek(), Some(c) if c.is_alphanumeric()) {
                return Err(self.err(span, "malformed bit literal"));
            }
            self.push(Tok::Bits(bits), span);
            return Ok(());
        }
        let mut text = String::new();
        let mut real = false;
        while let Some(c @ '0'..='9') = self.peek() {
            text.push(c);
            self.bump();
        }
        if self.peek() == Some('.') && matches!(self.peek_at(1), Some('0'..='9')) {
            real = true;
            text.push('.');
            self.bump();
            while let Some(c @ '0'..='9') = self.peek() {
                text.push(c);
                self.bump();
            }
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let sign = matches!(self.peek_at(1), Some('+' | '-'));
            let digit_at = if sign { 2 } else { 1 };
            if matches!(self.peek_at(digit_at), Some('0'..='9')) {
                real = true;
                text.push('e');
                self.bump();
                if sign {
                    text.push(self.bump().expect("sign"));
                }
                while let Some(c @ '0'..='9') = self.peek() {
                    text.push(c);
                    self.bump();
                }
            }
        }
        let tok = if real {
            let v: f64 = text
                .parse()
                .map_err(|_| self.err(span, format!("invalid real literal `{text}`")))?;
            if !v.is_finite() {
                return Err(self.err(span, format!("real literal `{text}` out of range")));
            }
            Tok::Real(v)
        } else {
            Tok::Int(
                text.parse()
                    .map_err(|_| self.err(span, format!("integer literal `{text}` out of range")))?,
            )
        };
        self.push(tok, span);
        Ok(())
    }

    fn ident(&mut self) {
        let span = self.span();
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        self.push(Tok::Ident(s), span);
    }

    fn punct(&mut self, c: char, span: Span) -> Result<(), Diagnostic> {
        let tok = match c {
            '<' if self.peek_at(1) == Some('-') => {
                self.bump();
                Tok::LArrow
            }
            '-' if self.peek_at(1) == Some('>') => {
                self.bump();
                Tok::RArrow
            }
            '~' => Tok::Tilde,
            '(' => {
                self.depth += 1;
                Tok::LParen
            }
            ')' => {
                self.depth = self.depth.saturating_sub(1);
                Tok::RParen
            }
            '[' => {
                self.depth += 1;
                Tok::LBrack
            }
            ']' => {
                self.depth = self.depth.saturating_sub(1);
                Tok::RBrack
            }
            ',' => Tok::Comma,
            ':' => Tok::Colon,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '=' => Tok::Eq,
            other => return Err(self.err(span, format!("unexpected character {other:?}"))),
        };
        self.bump();
        self.push(tok, span);
        Ok(())
    }
}
