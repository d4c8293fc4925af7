use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{EquationIr, Expr, FieldRef, TimeKind};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("expected {expected}, found {found}")]
    Unexpected { expected: &'static str, found: String },
    #[error("field shifts must be integers")]
    NonIntegerShift,
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("fully discrete and differential-difference field references are mixed")]
    MixedTimeKind,
    #[error("invalid number `{0}`")]
    InvalidNumber(String),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Sym(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(s) | Tok::Ident(s) => alloc::format!("`{s}`"),
            Tok::Sym(c) => alloc::format!("`{c}`"),
            Tok::End => "end of input".to_string(),
        }
    }
}

struct Lexed {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Lexed>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            Tok::Num(chars[start..i].iter().collect())
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if "+-*/^()[],=".contains(c) {
            i += 1;
            Tok::Sym(c)
        } else {
            return Err(ParseError { line: l0, column: c0, kind: ParseErrorKind::UnexpectedChar(c) });
        };
        col += i - start;
        out.push(Lexed { tok, line: l0, column: c0 });
    }
    out.push(Lexed { tok: Tok::End, line, column: col });
    Ok(out)
}

struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
    kind: Option<TimeKind>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        self.err_at(self.pos, kind)
    }

    fn err_at(&self, at: usize, kind: ParseErrorKind) -> ParseError {
        let t = &self.toks[at];
        ParseError { line: t.line, column: t.column, kind }
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        self.err(ParseErrorKind::Unexpected { expected, found: self.peek().describe() })
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char, what: &'static str) -> Result<(), ParseError> {
        if self.eat(c) { Ok(()) } else { Err(self.unexpected(what)) }
    }

    fn set_kind(&mut self, k: TimeKind, at: usize) -> Result<(), ParseError> {
        match self.kind {
            Some(prev) if prev != k => Err(self.err_at(at, ParseErrorKind::MixedTimeKind)),
            _ => {
                self.kind = Some(k);
                Ok(())
            }
        }
    }

    fn equation(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.expr()?;
        let root = if self.eat('=') {
            let rhs = self.expr()?;
            Expr::Sub(Box::new(lhs), Box::new(rhs))
        } else {
            lhs
        };
        if *self.peek() != Tok::End {
            return Err(self.unexpected("operator or end of input"));
        }
        Ok(root)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = Expr::Add(Box::new(acc), Box::new(self.term()?));
            } else if self.eat('-') {
                acc = Expr::Sub(Box::new(acc), Box::new(self.term()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        loop {
            if self.eat('*') {
                acc = Expr::Mul(Box::new(acc), Box::new(self.factor()?));
            } else if self.eat('/') {
                acc = Expr::Div(Box::new(acc), Box::new(self.factor()?));
            } else {
                return Ok(acc);
            }
        }
    }

    /// Unary minus binds looser than `^`: `-x^2` is `-(x^2)`.
    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.base()?;
        if self.eat('^') {
            let n = self.integer(ParseErrorKind::InvalidNumber)?;
            return Ok(Expr::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    /// Optionally signed integer literal. `on_fraction` builds the error for
    /// a literal that is a number but not an integer.
    fn integer(&mut self, on_fraction: fn(String) -> ParseErrorKind) -> Result<i32, ParseError> {
        let neg = self.eat('-');
        if !neg {
            self.eat('+');
        }
        let Tok::Num(text) = self.peek().clone() else {
            return Err(self.unexpected("integer"));
        };
        let v: i32 = match text.parse() {
            Ok(v) => v,
            Err(_) => return Err(self.err(on_fraction(text))),
        };
        self.pos += 1;
        Ok(if neg { -v } else { v })
    }

    fn field(&mut self) -> Result<FieldRef, ParseError> {
        self.expect('[', "`[`")?;
        let dn = self.integer(|_| ParseErrorKind::NonIntegerShift)?;
        let dm = if self.eat(',') { Some(self.integer(|_| ParseErrorKind::NonIntegerShift)?) } else { None };
        self.expect(']', "`]`")?;
        Ok(FieldRef { dn, dm })
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        let tok = self.peek().clone();
        match tok {
            Tok::Num(text) => {
                let v: f64 = text.parse().map_err(|_| self.err(ParseErrorKind::InvalidNumber(text.clone())))?;
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Tok::Sym('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')', "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let at = self.pos;
                self.pos += 1;
                match name.as_str() {
                    "i" => Ok(Expr::ImagUnit),
                    "u" => {
                        let f = self.field()?;
                        let k = if f.dm.is_some() { TimeKind::FullyDiscrete } else { TimeKind::DifferentialDifference };
                        self.set_kind(k, at)?;
                        Ok(Expr::Field(f))
                    }
                    "exp" => {
                        self.expect('(', "`(`")?;
                        let e = self.expr()?;
                        self.expect(')', "`)`")?;
                        Ok(Expr::Exp(Box::new(e)))
                    }
                    "dt" => {
                        self.expect('(', "`(`")?;
                        let Tok::Ident(u) = self.peek().clone() else {
                            return Err(self.unexpected("field `u[..]`"));
                        };
                        if u != "u" {
                            return Err(self.unexpected("field `u[..]`"));
                        }
                        let fat = self.pos;
                        self.pos += 1;
                        let f = self.field()?;
                        if f.dm.is_some() {
                            return Err(self.err_at(fat, ParseErrorKind::MixedTimeKind));
                        }
                        self.set_kind(TimeKind::DifferentialDifference, fat)?;
                        self.expect(')', "`)`")?;
                        Ok(Expr::TimeDeriv(f.dn))
                    }
                    _ => {
                        if *self.peek() == Tok::Sym('(') {
                            return Err(self.err_at(at, ParseErrorKind::UnknownFunction(name)));
                        }
                        Ok(Expr::Param(name))
                    }
                }
            }
            _ => Err(self.unexpected("number, parameter, field or `(`")),
        }
    }
}

/// Parses an equation. Errors carry a 1-based line and column.
pub fn parse(src: &str) -> Result<EquationIr, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0, kind: None };
    let root = p.equation()?;
    Ok(EquationIr::from_root(root, p.kind.unwrap_or(TimeKind::FullyDiscrete)))
}
