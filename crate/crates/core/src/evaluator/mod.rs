//! Expression evaluation and scoring.

mod constants;
mod expr;
pub mod units;

pub use constants::{fit_constants, ConstantFitConfig};
pub use expr::{parse_expression, BinaryOp, Expr, ExprParseError, UnaryOp};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Test MSE below which a run counts as exact recovery.
pub const EXACT_RECOVERY_MSE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("column {column} has {got} rows, expected {expected}")]
    RaggedColumn {
        column: usize,
        got: usize,
        expected: usize,
    },
    #[error("{0} names given for {1} columns")]
    NameCount(usize, usize),
    #[error("non-finite input value in column {column}, row {row}")]
    NonFinite { column: usize, row: usize },
}

/// Column-major feature matrix with a target vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    target: Vec<f64>,
    split: Split,
}

impl Dataset {
    pub fn new(
        names: Vec<String>,
        columns: Vec<Vec<f64>>,
        target: Vec<f64>,
        split: Split,
    ) -> Result<Dataset, DatasetError> {
        if names.len() != columns.len() {
            return Err(DatasetError::NameCount(names.len(), columns.len()));
        }
        for (c, col) in columns.iter().enumerate() {
            if col.len() != target.len() {
                return Err(DatasetError::RaggedColumn {
                    column: c,
                    got: col.len(),
                    expected: target.len(),
                });
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(DatasetError::NonFinite { column: c, row });
            }
        }
        Ok(Dataset {
            names,
            columns,
            target,
            split,
        })
    }

    /// Columns named `x1..xn`.
    pub fn unnamed(columns: Vec<Vec<f64>>, target: Vec<f64>, split: Split) -> Result<Dataset, DatasetError> {
        let names = (1..=columns.len()).map(|i| format!("x{i}")).collect();
        Dataset::new(names, columns, target, split)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn rows(&self) -> usize {
        self.target.len()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[r]).collect()
    }
}

/// Evaluate over all rows. Domain errors show up as non-finite entries.
pub fn evaluate(e: &Expr, columns: &[Vec<f64>]) -> Vec<f64> {
    evaluate_with_constants(e, columns, &[])
}

/// Evaluate with explicit values for the `const` leaves; leaves without a
/// value evaluate to 1.0.
pub fn evaluate_with_constants(e: &Expr, columns: &[Vec<f64>], consts: &[f64]) -> Vec<f64> {
    let rows = columns.first().map_or(0, Vec::len);
    eval_node(e, columns, consts, rows)
}

fn eval_node(e: &Expr, columns: &[Vec<f64>], consts: &[f64], rows: usize) -> Vec<f64> {
    match e {
        Expr::Feature(i) => columns[*i].clone(),
        Expr::Literal(v) => vec![*v; rows],
        Expr::Const(k) => vec![consts.get(*k).copied().unwrap_or(1.0); rows],
        Expr::Unary(op, a) => {
            let mut v = eval_node(a, columns, consts, rows);
            for x in &mut v {
                *x = op.apply(*x);
            }
            v
        }
        Expr::Binary(op, a, b) => {
            let mut va = eval_node(a, columns, consts, rows);
            let vb = eval_node(b, columns, consts, rows);
            for (x, y) in va.iter_mut().zip(&vb) {
                *x = op.apply(*x, *y);
            }
            va
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("length mismatch: {0} targets vs {1} predictions")]
pub struct LengthMismatch(pub usize, pub usize);

/// Mean squared error. Non-finite predictions propagate.
pub fn mse(y: &[f64], y_hat: &[f64]) -> Result<f64, LengthMismatch> {
    if y.len() != y_hat.len() {
        return Err(LengthMismatch(y.len(), y_hat.len()));
    }
    if y.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(s / y.len() as f64)
}

/// Squash an error into `(0, 1]`.
pub fn reward_from_mse(mse: f64) -> f64 {
    if mse.is_finite() && mse >= 0.0 {
        1.0 / (1.0 + mse)
    } else {
        0.0
    }
}

/// Final-step reward of an episode: `1 / (1 + MSE)` for a complete
/// expression with finite predictions, 0 otherwise.
pub fn reward(e: Option<&Expr>, data: &Dataset) -> f64 {
    match e {
        Some(e) => {
            let y_hat = evaluate(e, data.columns());
            if y_hat.iter().any(|v| !v.is_finite()) {
                return 0.0;
            }
            reward_from_mse(mse(data.target(), &y_hat).expect("dataset is rectangular"))
        }
        None => 0.0,
    }
}

/// MSE of an expression on a dataset; infinite when any prediction is
/// non-finite.
pub fn expression_mse(e: &Expr, data: &Dataset) -> f64 {
    let y_hat = evaluate(e, data.columns());
    if y_hat.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let m = mse(data.target(), &y_hat).expect("dataset is rectangular");
    if m.is_finite() {
        m
    } else {
        f64::INFINITY
    }
}

/// Operator nodes plus feature-leaf occurrences. Literals and constants
/// are not counted.
pub fn complexity(e: &Expr) -> usize {
    match e {
        Expr::Feature(_) => 1,
        Expr::Literal(_) | Expr::Const(_) => 0,
        Expr::Unary(_, a) => 1 + complexity(a),
        Expr::Binary(_, a, b) => 1 + complexity(a) + complexity(b),
    }
}

pub fn exact_recovery(e: &Expr, test: &Dataset) -> bool {
    if test.is_empty() {
        return false;
    }
    expression_mse(e, test) < EXACT_RECOVERY_MSE
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r_squared(y: &[f64], y_hat: &[f64]) -> f64 {
    if y.is_empty() || y.len() != y_hat.len() {
        return f64::NAN;
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let ss_res: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    1.0 - ss_res / ss_tot
}
