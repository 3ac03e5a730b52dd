//! Dimensional audit of expression trees.
//!
//! Walks an expression bottom-up and checks that additions and
//! subtractions combine equal dimensions and that transcendental functions
//! only see dimensionless arguments. `const` leaves are wildcards: they may
//! carry any dimension.

use std::fmt;

use thiserror::Error;

use super::{BinaryOp, Expr, UnaryOp};

const BASES: [&str; 4] = ["m", "s", "kg", "K"];

/// Exponents over metre, second, kilogram and kelvin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Dimension(pub [i32; 4]);

impl Dimension {
    pub const NONE: Dimension = Dimension([0; 4]);

    pub fn is_dimensionless(&self) -> bool {
        *self == Self::NONE
    }

    fn combine(self, other: Dimension, sign: i32) -> Dimension {
        let mut out = self.0;
        for (o, b) in out.iter_mut().zip(other.0) {
            *o += sign * b;
        }
        Dimension(out)
    }

    /// Parse unit text such as `m`, `m/s`, `1/s`, `Hz`, `deg`, `m*s^-2`.
    pub fn parse(text: &str) -> Option<Dimension> {
        let text = text.trim();
        if text.is_empty() {
            return Some(Self::NONE);
        }
        let mut dim = Self::NONE;
        let mut sign = 1;
        let mut cur = String::new();
        let apply = |cur: &str, sign: i32, dim: &mut Dimension| -> Option<()> {
            let (base, pow) = match cur.split_once('^') {
                Some((b, p)) => (b, p.parse::<i32>().ok()?),
                None => (cur, 1),
            };
            let unit = match base {
                "1" | "deg" | "rad" | "" => Self::NONE,
                "Hz" => Dimension([0, -1, 0, 0]),
                b => {
                    let i = BASES.iter().position(|x| *x == b)?;
                    let mut d = [0; 4];
                    d[i] = 1;
                    Dimension(d)
                }
            };
            for _ in 0..pow.abs() {
                *dim = dim.combine(unit, sign * pow.signum());
            }
            Some(())
        };
        for c in text.chars() {
            match c {
                '*' | '/' => {
                    apply(&cur, sign, &mut dim)?;
                    cur.clear();
                    sign = if c == '/' { -1 } else { 1 };
                }
                c if c.is_whitespace() => {}
                c => cur.push(c),
            }
        }
        apply(&cur, sign, &mut dim)?;
        Some(dim)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_dimensionless() {
            return write!(f, "1");
        }
        let parts: Vec<String> = BASES
            .iter()
            .zip(self.0)
            .filter(|(_, e)| *e != 0)
            .map(|(b, e)| if e == 1 { b.to_string() } else { format!("{b}^{e}") })
            .collect();
        write!(f, "{}", parts.join("*"))
    }
}

/// Dimension of a subtree; `Free` when a constant absorbs the units.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dim {
    Known(Dimension),
    Free,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnitViolation {
    #[error("`{op}` combines {left} with {right} in {expr}")]
    Mismatch {
        op: char,
        left: Dimension,
        right: Dimension,
        expr: String,
    },
    #[error("{func} applied to a quantity in {dim} in {expr}")]
    DimensionedArgument {
        func: &'static str,
        dim: Dimension,
        expr: String,
    },
    #[error("feature x[{0}] has no unit")]
    UnknownFeature(usize),
}

/// Audit `e` against per-feature units.
pub fn audit_units(e: &Expr, feature_units: &[Dimension]) -> Result<Dim, UnitViolation> {
    match e {
        Expr::Feature(i) => feature_units
            .get(*i)
            .map(|d| Dim::Known(*d))
            .ok_or(UnitViolation::UnknownFeature(i + 1)),
        Expr::Literal(_) => Ok(Dim::Known(Dimension::NONE)),
        Expr::Const(_) => Ok(Dim::Free),
        Expr::Unary(op, a) => {
            let inner = audit_units(a, feature_units)?;
            match op {
                UnaryOp::Abs | UnaryOp::Neg => Ok(inner),
                UnaryOp::Sqrt => match inner {
                    Dim::Known(d) if d.0.iter().all(|x| x % 2 == 0) => {
                        Ok(Dim::Known(Dimension(d.0.map(|x| x / 2))))
                    }
                    Dim::Known(d) => Err(UnitViolation::DimensionedArgument {
                        func: "sqrt",
                        dim: d,
                        expr: e.to_string(),
                    }),
                    Dim::Free => Ok(Dim::Free),
                },
                _ => match inner {
                    Dim::Known(d) if !d.is_dimensionless() => Err(UnitViolation::DimensionedArgument {
                        func: op.name(),
                        dim: d,
                        expr: e.to_string(),
                    }),
                    _ => Ok(Dim::Known(Dimension::NONE)),
                },
            }
        }
        Expr::Binary(op, a, b) => {
            let l = audit_units(a, feature_units)?;
            let r = audit_units(b, feature_units)?;
            match op {
                BinaryOp::Add | BinaryOp::Sub => match (l, r) {
                    (Dim::Known(x), Dim::Known(y)) if x != y => Err(UnitViolation::Mismatch {
                        op: op.symbol(),
                        left: x,
                        right: y,
                        expr: e.to_string(),
                    }),
                    (Dim::Free, other) | (other, Dim::Free) => Ok(other),
                    (k, _) => Ok(k),
                },
                BinaryOp::Mul | BinaryOp::Div => match (l, r) {
                    (Dim::Known(x), Dim::Known(y)) => {
                        let s = if *op == BinaryOp::Mul { 1 } else { -1 };
                        Ok(Dim::Known(x.combine(y, s)))
                    }
                    _ => Ok(Dim::Free),
                },
            }
        }
    }
}
