use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }

    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => a / b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnaryOp {
    Cos,
    Sin,
    Exp,
    Log,
    Log10,
    Sqrt,
    Abs,
    Neg,
}

impl UnaryOp {
    pub fn from_name(name: &str) -> Option<UnaryOp> {
        Some(match name {
            "cos" => UnaryOp::Cos,
            "sin" => UnaryOp::Sin,
            "exp" => UnaryOp::Exp,
            "log" | "ln" => UnaryOp::Log,
            "log10" => UnaryOp::Log10,
            "sqrt" => UnaryOp::Sqrt,
            "abs" => UnaryOp::Abs,
            "neg" => UnaryOp::Neg,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Cos => "cos",
            UnaryOp::Sin => "sin",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Log10 => "log10",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Abs => "abs",
            UnaryOp::Neg => "neg",
        }
    }

    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            UnaryOp::Cos => a.cos(),
            UnaryOp::Sin => a.sin(),
            UnaryOp::Exp => a.exp(),
            UnaryOp::Log => a.ln(),
            UnaryOp::Log10 => a.log10(),
            UnaryOp::Sqrt => a.sqrt(),
            UnaryOp::Abs => a.abs(),
            UnaryOp::Neg => -a,
        }
    }
}

/// Expression tree over dataset columns.
///
/// Features are zero-based column indices and print as 1-based `x[i]`.
/// `Const(k)` is the k-th fittable constant in left-to-right order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Feature(usize),
    Literal(f64),
    Const(usize),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn feature(i: usize) -> Expr {
        Expr::Feature(i)
    }

    pub fn lit(v: f64) -> Expr {
        Expr::Literal(v)
    }

    pub fn unary(op: UnaryOp, a: Expr) -> Expr {
        Expr::Unary(op, Box::new(a))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    /// Number of `const` leaves.
    pub fn const_count(&self) -> usize {
        match self {
            Expr::Const(k) => k + 1,
            Expr::Feature(_) | Expr::Literal(_) => 0,
            Expr::Unary(_, a) => a.const_count(),
            Expr::Binary(_, a, b) => a.const_count().max(b.const_count()),
        }
    }

    /// Highest feature index referenced, if any.
    pub fn max_feature(&self) -> Option<usize> {
        match self {
            Expr::Feature(i) => Some(*i),
            Expr::Literal(_) | Expr::Const(_) => None,
            Expr::Unary(_, a) => a.max_feature(),
            Expr::Binary(_, a, b) => match (a.max_feature(), b.max_feature()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Feature(_) | Expr::Literal(_) | Expr::Const(_) => 1,
            Expr::Unary(_, a) => 1 + a.node_count(),
            Expr::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    /// Replace every `const` leaf with the matching literal.
    pub fn substitute_constants(&self, values: &[f64]) -> Expr {
        match self {
            Expr::Const(k) => Expr::Literal(values[*k]),
            Expr::Feature(_) | Expr::Literal(_) => self.clone(),
            Expr::Unary(op, a) => Expr::unary(*op, a.substitute_constants(values)),
            Expr::Binary(op, a, b) => Expr::binary(
                *op,
                a.substitute_constants(values),
                b.substitute_constants(values),
            ),
        }
    }

    /// Render with column names (`x.name`) instead of `x[i]`.
    pub fn display_with<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        Named { expr: self, names }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, names: Option<&[String]>) -> fmt::Result {
        match self {
            Expr::Feature(i) => match names.and_then(|n| n.get(*i)) {
                Some(name) => write!(f, "x.{name}"),
                None => write!(f, "x[{}]", i + 1),
            },
            Expr::Literal(v) => write_literal(f, *v),
            Expr::Const(_) => write!(f, "const"),
            Expr::Unary(UnaryOp::Neg, a) => {
                write!(f, "(-")?;
                a.write(f, names)?;
                write!(f, ")")
            }
            Expr::Unary(op, a) => {
                write!(f, "{}(", op.name())?;
                a.write(f, names)?;
                write!(f, ")")
            }
            Expr::Binary(op, a, b) => {
                write!(f, "(")?;
                a.write(f, names)?;
                write!(f, " {} ", op.symbol())?;
                b.write(f, names)?;
                write!(f, ")")
            }
        }
    }
}

fn write_literal(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if v.is_finite() && v.fract() == 0.0 && v.abs() < 1e15 {
        write!(f, "{}", v as i64)
    } else {
        write!(f, "{v:?}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, None)
    }
}

struct Named<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

impl fmt::Display for Named<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.write(f, Some(self.names))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("expression parse error at offset {offset}: {message} in `{input}`")]
pub struct ExprParseError {
    pub offset: usize,
    pub message: String,
    pub input: String,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Feature(usize),
    Named(String),
    Op(char),
    LParen,
    RParen,
}

/// Parse infix text into an [`Expr`].
///
/// Accepts `x[i]` (1-based) and, when `names` is non-empty, `x.name`
/// feature references. Whitespace is ignored everywhere, including inside
/// `x[ i ]`.
pub fn parse_expression(input: &str, names: &[String]) -> Result<Expr, ExprParseError> {
    let toks = lex(input)?;
    let mut p = Parser {
        toks,
        pos: 0,
        names,
        input,
        consts: 0,
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.error("trailing input"));
    }
    Ok(e)
}

fn lex(input: &str) -> Result<Vec<(Tok, usize)>, ExprParseError> {
    let err = |offset: usize, message: &str| ExprParseError {
        offset,
        message: message.to_string(),
        input: input.to_string(),
    };
    let bytes = input.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit()) {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let v: f64 = input[start..i].parse().map_err(|_| err(start, "bad number"))?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &input[start..i];
            if word == "x" {
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_whitespace() {
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b'[' {
                    let close = input[j..]
                        .find(']')
                        .map(|k| j + k)
                        .ok_or_else(|| err(j, "unclosed feature index"))?;
                    let idx: usize = input[j + 1..close]
                        .trim()
                        .parse()
                        .map_err(|_| err(j + 1, "feature index must be a positive integer"))?;
                    if idx == 0 {
                        return Err(err(j + 1, "feature indices are 1-based"));
                    }
                    out.push((Tok::Feature(idx - 1), start));
                    i = close + 1;
                    continue;
                }
                if j < bytes.len() && bytes[j] == b'.' {
                    let ns = j + 1;
                    let mut k = ns;
                    while k < bytes.len() && (bytes[k].is_ascii_alphanumeric() || bytes[k] == b'_') {
                        k += 1;
                    }
                    if k == ns {
                        return Err(err(ns, "expected a column name after `x.`"));
                    }
                    out.push((Tok::Named(input[ns..k].to_string()), start));
                    i = k;
                    continue;
                }
            }
            out.push((Tok::Ident(word.to_string()), start));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => return Err(err(i, "unexpected character")),
            };
            out.push((tok, i));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    names: &'a [String],
    input: &'a str,
    consts: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ExprParseError {
        let offset = self
            .toks
            .get(self.pos)
            .map(|t| t.1)
            .unwrap_or(self.input.len());
        ExprParseError {
            offset,
            message: message.to_string(),
            input: self.input.to_string(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Expr, ExprParseError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinaryOp::Add } else { BinaryOp::Sub };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinaryOp::Mul } else { BinaryOp::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprParseError> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                if let Some(Tok::Num(v)) = self.peek() {
                    let v = *v;
                    self.pos += 1;
                    return Ok(Expr::Literal(-v));
                }
                Ok(Expr::unary(UnaryOp::Neg, self.unary()?))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, ExprParseError> {
        let at = self.pos;
        match self.next() {
            Some(Tok::Num(v)) => Ok(Expr::Literal(v)),
            Some(Tok::Feature(i)) => Ok(Expr::Feature(i)),
            Some(Tok::Named(name)) => match self.names.iter().position(|n| *n == name) {
                Some(i) => Ok(Expr::Feature(i)),
                None => {
                    self.pos = at;
                    Err(self.error(&format!("unknown column `{name}`")))
                }
            },
            Some(Tok::LParen) => {
                let e = self.expr()?;
                match self.next() {
                    Some(Tok::RParen) => Ok(e),
                    _ => {
                        self.pos -= 1;
                        Err(self.error("expected `)`"))
                    }
                }
            }
            Some(Tok::Ident(word)) if word == "const" => {
                let k = self.consts;
                self.consts += 1;
                Ok(Expr::Const(k))
            }
            Some(Tok::Ident(word)) => {
                let op = UnaryOp::from_name(&word).ok_or_else(|| {
                    self.pos = at;
                    self.error(&format!("unknown function `{word}`"))
                })?;
                match self.next() {
                    Some(Tok::LParen) => {}
                    _ => {
                        self.pos -= 1;
                        return Err(self.error("expected `(` after function name"));
                    }
                }
                let arg = self.expr()?;
                match self.next() {
                    Some(Tok::RParen) => Ok(Expr::unary(op, arg)),
                    _ => {
                        self.pos -= 1;
                        Err(self.error("expected `)`"))
                    }
                }
            }
            _ => {
                self.pos = at;
                Err(self.error("expected an operand"))
            }
        }
    }
}
