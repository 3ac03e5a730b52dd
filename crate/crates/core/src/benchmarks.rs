//! Benchmark dataset generation and tabular data loading.

use std::fmt;
use std::fs;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use thiserror::Error;

use crate::evaluator::{evaluate, parse_expression, Dataset, DatasetError, Expr, Split};
use crate::trainer::stream_seed;

/// Column names of the airfoil self-noise file, in file order.
pub const AIRFOIL_COLUMNS: [&str; 6] = ["f", "alpha", "c", "U_infinity", "delta", "SSPL"];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown benchmark `{0}`")]
    Unknown(String),
    #[error("invalid sampling bounds [{a}, {b}]")]
    InvalidBounds { a: f64, b: f64 },
    #[error("sample count must be at least 1")]
    ZeroCount,
    #[error("grid step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("uniform samplers in one split must share a row count")]
    MixedCounts,
    #[error("a split mixes uniform and grid samplers")]
    MixedSamplers,
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("split fraction must lie in (0, 1], got {0}")]
    SplitFraction(f64),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Per-variable sampler.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sampler {
    /// `c` uniform draws on `[a, b]`.
    Uniform { a: f64, b: f64, c: usize },
    /// Evenly spaced points `a, a + step, ...` up to `b`.
    Grid { a: f64, b: f64, step: f64 },
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sampler::Uniform { a, b, c } => write!(f, "U[{a}, {b}, {c}]"),
            Sampler::Grid { a, b, step } => write!(f, "E[{a}, {b}, {step}]"),
        }
    }
}

const fn u(a: f64, b: f64, c: usize) -> Sampler {
    Sampler::Uniform { a, b, c }
}

const fn e(a: f64, b: f64, step: f64) -> Sampler {
    Sampler::Grid { a, b, step }
}

/// Ground truth, either as an expression or as a plain function when the
/// operator set cannot express it.
#[derive(Clone, Copy)]
pub enum Truth {
    Expression(&'static str),
    Function(fn(&[f64]) -> f64),
}

impl fmt::Debug for Truth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truth::Expression(s) => write!(f, "Expression({s:?})"),
            Truth::Function(_) => write!(f, "Function"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchmarkSpec {
    pub name: &'static str,
    /// Human-readable target function.
    pub formula: &'static str,
    pub nvar: usize,
    /// One sampler per variable, or a single sampler shared by all.
    pub train: &'static [Sampler],
    pub test: &'static [Sampler],
    pub truth: Truth,
    pub excluded_from_stats: bool,
}

impl BenchmarkSpec {
    fn samplers(&self, split: Split) -> Vec<Sampler> {
        let s = match split {
            Split::Train => self.train,
            Split::Test => self.test,
        };
        if s.len() == 1 {
            vec![s[0]; self.nvar]
        } else {
            s.to_vec()
        }
    }

    /// Rows the split will contain.
    pub fn row_count(&self, split: Split) -> Result<usize, BenchError> {
        let s = self.samplers(split);
        match s[0] {
            Sampler::Uniform { c, .. } => Ok(c),
            Sampler::Grid { .. } => s
                .iter()
                .map(|v| match v {
                    Sampler::Grid { a, b, step } => grid_count(*a, *b, *step),
                    Sampler::Uniform { .. } => Err(BenchError::MixedSamplers),
                })
                .product(),
        }
    }

    pub fn truth_expression(&self) -> Option<Expr> {
        match self.truth {
            Truth::Expression(s) => Some(parse_expression(s, &[]).expect("built-in ground truth parses")),
            Truth::Function(_) => None,
        }
    }
}

macro_rules! spec {
    ($name:expr, $formula:expr, $nvar:expr, $train:expr, $test:expr, $truth:expr) => {
        BenchmarkSpec {
            name: $name,
            formula: $formula,
            nvar: $nvar,
            train: $train,
            test: $test,
            truth: $truth,
            excluded_from_stats: false,
        }
    };
}

fn harmonic(v: &[f64]) -> f64 {
    let n = v[0].round() as i64;
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

fn asinh(v: &[f64]) -> f64 {
    v[0].asinh()
}

fn power(v: &[f64]) -> f64 {
    v[0].powf(v[1])
}

use Truth::{Expression as Ex, Function as Fun};

/// The 34 benchmark specifications.
pub static BENCHMARKS: [BenchmarkSpec; 34] = [
    spec!("N1", "x^3+x^2+x", 1, &[u(0.0, 2.0, 20)], &[u(0.0, 2.0, 20)],
        Ex("x[1]*x[1]*x[1] + x[1]*x[1] + x[1]")),
    spec!("N2", "x^4+x^3+x^2+x", 1, &[u(-1.0, 1.0, 20)], &[u(-1.0, 1.0, 20)],
        Ex("x[1]*x[1]*x[1]*x[1] + x[1]*x[1]*x[1] + x[1]*x[1] + x[1]")),
    spec!("N3", "x^5+x^4+x^3+x^2+x", 1, &[u(-1.0, 1.0, 20)], &[u(-1.0, 1.0, 20)],
        Ex("x[1]*x[1]*x[1]*x[1]*x[1] + x[1]*x[1]*x[1]*x[1] + x[1]*x[1]*x[1] + x[1]*x[1] + x[1]")),
    spec!("N4", "x^6+x^5+x^4+x^3+x^2+x", 1, &[u(-1.0, 1.0, 20)], &[u(-1.0, 1.0, 20)],
        Ex("x[1]*x[1]*x[1]*x[1]*x[1]*x[1] + x[1]*x[1]*x[1]*x[1]*x[1] + x[1]*x[1]*x[1]*x[1] + x[1]*x[1]*x[1] + x[1]*x[1] + x[1]")),
    spec!("N5", "sin(x^2)cos(x)-1", 1, &[u(-1.0, 1.0, 20)], &[u(-1.0, 1.0, 20)],
        Ex("sin(x[1]*x[1])*cos(x[1]) - 1")),
    spec!("N6", "sin(x)+sin(x+x^2)", 1, &[u(-1.0, 1.0, 20)], &[u(-1.0, 1.0, 20)],
        Ex("sin(x[1]) + sin(x[1] + x[1]*x[1])")),
    spec!("N7", "ln(x+1)+ln(x^2+1)", 1, &[u(0.0, 2.0, 20)], &[u(0.0, 2.0, 20)],
        Ex("log(x[1] + 1) + log(x[1]*x[1] + 1)")),
    spec!("N8", "sqrt(x)", 1, &[u(0.0, 4.0, 20)], &[u(0.0, 4.0, 20)], Ex("sqrt(x[1])")),
    spec!("N9", "sin(x)+sin(y)", 2, &[u(0.0, 2.0, 100)], &[u(0.0, 2.0, 100)], Ex("sin(x[1]) + sin(x[2])")),
    spec!("N10", "2sin(x)cos(y)", 2, &[u(0.0, 2.0, 100)], &[u(0.0, 2.0, 100)], Ex("2*sin(x[1])*cos(x[2])")),
    spec!("K1", "0.3x sin(2 pi x)", 1, &[e(-1.0, 1.0, 0.1)], &[e(-1.0, 1.0, 0.001)],
        Ex("0.3*x[1]*sin(6.283185307179586*x[1])")),
    spec!("K2", "0.3x sin(2 pi x)", 1, &[e(-2.0, 2.0, 0.1)], &[e(-2.0, 2.0, 0.001)],
        Ex("0.3*x[1]*sin(6.283185307179586*x[1])")),
    spec!("K3", "0.3x sin(2 pi x)", 1, &[e(-3.0, 3.0, 0.1)], &[e(-3.0, 3.0, 0.001)],
        Ex("0.3*x[1]*sin(6.283185307179586*x[1])")),
    spec!("K4", "x^3 e^-x cos(x) sin(x) (sin^2(x) cos(x) - 1)", 1, &[e(0.0, 10.0, 0.05)], &[e(0.05, 10.05, 0.05)],
        Ex("x[1]*x[1]*x[1]*exp(-x[1])*cos(x[1])*sin(x[1])*(sin(x[1])*sin(x[1])*cos(x[1]) - 1)")),
    BenchmarkSpec {
        name: "K5",
        formula: "30xz/((x-10)y^2)",
        nvar: 3,
        train: &[u(-1.0, 1.0, 1000), u(1.0, 2.0, 1000), u(-1.0, 1.0, 1000)],
        test: &[u(-1.0, 1.0, 10000), u(1.0, 2.0, 10000), u(-1.0, 1.0, 10000)],
        truth: Ex("30*x[1]*x[3]/((x[1] - 10)*x[2]*x[2])"),
        excluded_from_stats: true,
    },
    spec!("K6", "sum_{i=1}^{x} 1/i", 1, &[e(1.0, 50.0, 1.0)], &[e(1.0, 120.0, 1.0)], Fun(harmonic)),
    spec!("K7", "ln(x)", 1, &[e(1.0, 100.0, 1.0)], &[e(1.0, 100.0, 0.1)], Ex("log(x[1])")),
    spec!("K8", "sqrt(x)", 1, &[e(0.0, 100.0, 1.0)], &[e(0.0, 100.0, 0.1)], Ex("sqrt(x[1])")),
    spec!("K9", "arcsinh(x)", 1, &[e(0.0, 100.0, 1.0)], &[e(0.0, 100.0, 0.1)], Fun(asinh)),
    spec!("K10", "x^y", 2, &[u(0.0, 1.0, 100)], &[e(0.0, 1.0, 0.01)], Fun(power)),
    spec!("K11", "xy+sin((x-1)(y-1))", 2, &[u(-3.0, 3.0, 20)], &[e(0.0, 1.0, 0.01)],
        Ex("x[1]*x[2] + sin((x[1] - 1)*(x[2] - 1))")),
    spec!("K12", "x^4-x^3+y^2/2-y", 2, &[u(-3.0, 3.0, 20)], &[e(0.0, 1.0, 0.01)],
        Ex("x[1]*x[1]*x[1]*x[1] - x[1]*x[1]*x[1] + x[2]*x[2]/2 - x[2]")),
    spec!("K13", "6sin(x)cos(y)", 2, &[u(-3.0, 3.0, 20)], &[e(0.0, 1.0, 0.01)], Ex("6*sin(x[1])*cos(x[2])")),
    spec!("K14", "8/(2+x^2+y^2)", 2, &[u(-3.0, 3.0, 20)], &[e(0.0, 1.0, 0.01)], Ex("8/(2 + x[1]*x[1] + x[2]*x[2])")),
    spec!("K15", "x^3/5+y^3/2-y-x", 2, &[u(-3.0, 3.0, 20)], &[e(0.0, 1.0, 0.01)],
        Ex("x[1]*x[1]*x[1]/5 + x[2]*x[2]*x[2]/2 - x[2] - x[1]")),
    spec!("V1", "e^-(x-1)^2/(1.2+(y-2.5)^2)", 2, &[u(0.3, 4.0, 100)], &[e(-0.2, 4.2, 0.1)],
        Ex("exp(-((x[1] - 1)*(x[1] - 1)))/(1.2 + (x[2] - 2.5)*(x[2] - 2.5))")),
    spec!("V2", "e^-x x^3 cos(x) sin(x) (sin^2(x) cos(x) - 1)", 1, &[e(0.05, 10.0, 0.1)], &[e(-0.5, 10.5, 0.05)],
        Ex("exp(-x[1])*x[1]*x[1]*x[1]*cos(x[1])*sin(x[1])*(sin(x[1])*sin(x[1])*cos(x[1]) - 1)")),
    spec!("V3", "e^-x x^3 cos(x) sin(x) (sin^2(x) cos(x) - 1)(y-5)", 2,
        &[e(0.05, 10.0, 0.1), e(0.05, 10.05, 2.0)], &[e(0.05, 10.0, 0.1), e(-0.5, 10.5, 0.5)],
        Ex("exp(-x[1])*x[1]*x[1]*x[1]*cos(x[1])*sin(x[1])*(sin(x[1])*sin(x[1])*cos(x[1]) - 1)*(x[2] - 5)")),
    spec!("V4", "10/(5+sum_i (x_i-3)^2)", 5, &[u(0.05, 6.05, 1024)], &[u(-0.25, 6.35, 5000)],
        Ex("10/(5 + (x[1]-3)*(x[1]-3) + (x[2]-3)*(x[2]-3) + (x[3]-3)*(x[3]-3) + (x[4]-3)*(x[4]-3) + (x[5]-3)*(x[5]-3))")),
    spec!("V5", "30(x-1)(z-1)/(y^2(x-10))", 3,
        &[u(0.05, 2.0, 300), u(1.0, 2.0, 300), u(0.05, 2.0, 300)],
        &[e(-0.05, 2.1, 0.15), e(0.95, 2.05, 0.1), e(-0.05, 2.1, 0.15)],
        Ex("30*(x[1] - 1)*(x[3] - 1)/(x[2]*x[2]*(x[1] - 10))")),
    spec!("V6", "6sin(x)cos(y)", 2, &[u(0.1, 5.9, 30)], &[e(-0.05, 6.05, 0.02)], Ex("6*sin(x[1])*cos(x[2])")),
    spec!("V7", "(x-3)(y-3)+2sin((x-4)(y-4))", 2, &[u(0.05, 6.05, 300)], &[u(-0.25, 6.35, 1000)],
        Ex("(x[1] - 3)*(x[2] - 3) + 2*sin((x[1] - 4)*(x[2] - 4))")),
    spec!("V8", "((x-3)^4+(y-3)^3-(y-3))/((y-2)^4+10)", 2, &[u(0.05, 6.05, 50)], &[e(-0.25, 6.35, 0.2)],
        Ex("((x[1]-3)*(x[1]-3)*(x[1]-3)*(x[1]-3) + (x[2]-3)*(x[2]-3)*(x[2]-3) - (x[2]-3))/((x[2]-2)*(x[2]-2)*(x[2]-2)*(x[2]-2) + 10)")),
    spec!("P1", "1/(1+x^-4)+1/(1+y^-4)", 2, &[e(-5.0, 5.0, 0.4)], &[e(-5.0, 5.0, 0.4)],
        Ex("1/(1 + 1/(x[1]*x[1]*x[1]*x[1])) + 1/(1 + 1/(x[2]*x[2]*x[2]*x[2]))")),
];

pub fn benchmark_names() -> impl Iterator<Item = &'static str> {
    BENCHMARKS.iter().map(|b| b.name)
}

pub fn find_benchmark(name: &str) -> Result<&'static BenchmarkSpec, BenchError> {
    BENCHMARKS
        .iter()
        .find(|b| b.name.eq_ignore_ascii_case(name.trim()))
        .ok_or_else(|| BenchError::Unknown(name.to_string()))
}

/// `c` independent uniform draws on `[a, b]`.
pub fn uniform_sample(a: f64, b: f64, c: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, BenchError> {
    if !(a.is_finite() && b.is_finite() && a <= b) {
        return Err(BenchError::InvalidBounds { a, b });
    }
    if c == 0 {
        return Err(BenchError::ZeroCount);
    }
    let dist = Uniform::new_inclusive(a, b);
    Ok((0..c).map(|_| dist.sample(rng)).collect())
}

fn grid_count(a: f64, b: f64, step: f64) -> Result<usize, BenchError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(BenchError::NonPositiveStep(step));
    }
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(BenchError::InvalidBounds { a, b });
    }
    let ratio = (b - a) / step;
    let nearest = ratio.round();
    let intervals = if (ratio - nearest).abs() < 1e-9 { nearest } else { ratio.floor() };
    Ok(intervals as usize + 1)
}

/// `a, a + step, ...`, including `b` when `(b - a) / step` is integral.
pub fn grid_sample(a: f64, b: f64, step: f64) -> Result<Vec<f64>, BenchError> {
    let n = grid_count(a, b, step)?;
    Ok((0..n).map(|i| a + i as f64 * step).collect())
}

/// Columns for one split: joint uniform rows, or the cartesian product of
/// per-variable grids (last variable varying fastest).
fn sample_columns(samplers: &[Sampler], rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>, BenchError> {
    let all_uniform = samplers.iter().all(|s| matches!(s, Sampler::Uniform { .. }));
    let all_grid = samplers.iter().all(|s| matches!(s, Sampler::Grid { .. }));
    if all_uniform {
        let counts: Vec<usize> = samplers
            .iter()
            .map(|s| match s {
                Sampler::Uniform { c, .. } => *c,
                Sampler::Grid { .. } => unreachable!(),
            })
            .collect();
        if counts.windows(2).any(|w| w[0] != w[1]) {
            return Err(BenchError::MixedCounts);
        }
        let c = counts[0];
        if c == 0 {
            return Err(BenchError::ZeroCount);
        }
        let dists: Vec<Uniform<f64>> = samplers
            .iter()
            .map(|s| match *s {
                Sampler::Uniform { a, b, .. } if a.is_finite() && b.is_finite() && a <= b => Ok(Uniform::new_inclusive(a, b)),
                Sampler::Uniform { a, b, .. } => Err(BenchError::InvalidBounds { a, b }),
                Sampler::Grid { .. } => unreachable!(),
            })
            .collect::<Result<_, _>>()?;
        let mut cols = vec![Vec::with_capacity(c); samplers.len()];
        // Row by row, so each row is one joint draw.
        for _ in 0..c {
            for (col, d) in cols.iter_mut().zip(&dists) {
                col.push(d.sample(rng));
            }
        }
        Ok(cols)
    } else if all_grid {
        let axes: Vec<Vec<f64>> = samplers
            .iter()
            .map(|s| match *s {
                Sampler::Grid { a, b, step } => grid_sample(a, b, step),
                Sampler::Uniform { .. } => unreachable!(),
            })
            .collect::<Result<_, _>>()?;
        let total: usize = axes.iter().map(Vec::len).product();
        let mut cols = vec![Vec::with_capacity(total); axes.len()];
        for row in 0..total {
            let mut rem = row;
            for (k, axis) in axes.iter().enumerate().rev() {
                cols[k].push(axis[rem % axis.len()]);
                rem /= axis.len();
            }
        }
        Ok(cols)
    } else {
        Err(BenchError::MixedSamplers)
    }
}

/// A generated benchmark instance.
#[derive(Clone, Debug)]
pub struct GeneratedBenchmark {
    pub spec: &'static BenchmarkSpec,
    pub train: Dataset,
    pub test: Dataset,
    pub truth: Option<Expr>,
}

/// Build train and test sets for `name`. Each split draws from its own
/// random stream derived from `(benchmark, split, seed)`.
pub fn generate_benchmark(name: &str, seed: u64) -> Result<GeneratedBenchmark, BenchError> {
    let spec = find_benchmark(name)?;
    let index = BENCHMARKS.iter().position(|b| b.name == spec.name).expect("spec is in the table") as u64;
    let truth = spec.truth_expression();
    let make = |split: Split, tag: u64| -> Result<Dataset, BenchError> {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, index, tag));
        let cols = sample_columns(&spec.samplers(split), &mut rng)?;
        let y = match (&truth, spec.truth) {
            (Some(e), _) => evaluate(e, &cols),
            (None, Truth::Function(f)) => (0..cols[0].len())
                .map(|r| f(&cols.iter().map(|c| c[r]).collect::<Vec<_>>()))
                .collect(),
            (None, Truth::Expression(_)) => unreachable!(),
        };
        Ok(Dataset::unnamed(cols, y, split)?)
    };
    let train = make(Split::Train, 0)?;
    let test = make(Split::Test, 1)?;
    Ok(GeneratedBenchmark { spec, train, test, truth })
}

/// Read a table: a CSV with a header row, or a whitespace-separated file
/// such as the UCI airfoil file. Whitespace files may name their columns
/// in a leading `#` comment; six unnamed columns are taken to be the
/// airfoil layout, anything else is named `x1.. xn-1, y`.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), BenchError> {
    let text = fs::read_to_string(path)?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.contains(',') {
        read_csv_text(&text)
    } else {
        read_whitespace_text(&text)
    }
}

fn read_csv_text(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), BenchError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != names.len() {
            return Err(BenchError::MalformedRow {
                line,
                message: format!("{} fields, expected {}", rec.len(), names.len()),
            });
        }
        rows.push(parse_fields(rec.iter(), line)?);
    }
    Ok((names, rows))
}

fn read_whitespace_text(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), BenchError> {
    let mut names: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            if names.is_none() && rows.is_empty() {
                names = Some(header.split_whitespace().map(str::to_string).collect());
            }
            continue;
        }
        let row = parse_fields(line.split_whitespace(), i + 1)?;
        if let Some(w) = rows.first().map(Vec::len).or(names.as_ref().map(Vec::len)) {
            if row.len() != w {
                return Err(BenchError::MalformedRow {
                    line: i + 1,
                    message: format!("{} fields, expected {w}", row.len()),
                });
            }
        }
        rows.push(row);
    }
    let width = rows.first().map_or(0, Vec::len);
    let names = names.unwrap_or_else(|| {
        if width == AIRFOIL_COLUMNS.len() {
            AIRFOIL_COLUMNS.iter().map(|s| s.to_string()).collect()
        } else {
            (1..width).map(|i| format!("x{i}")).chain(std::iter::once("y".to_string())).collect()
        }
    });
    Ok((names, rows))
}

fn parse_fields<'a>(fields: impl Iterator<Item = &'a str>, line: usize) -> Result<Vec<f64>, BenchError> {
    fields
        .map(|f| {
            f.trim().parse::<f64>().map_err(|_| BenchError::MalformedRow {
                line,
                message: format!("`{f}` is not a number"),
            })
        })
        .collect()
}

/// Load a table, shuffle its rows with `seed` and split off the first
/// `floor(split_fraction * rows)` rows for training.
pub fn load_csv(path: &Path, target: &str, split_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), BenchError> {
    if !(split_fraction > 0.0 && split_fraction <= 1.0) {
        return Err(BenchError::SplitFraction(split_fraction));
    }
    let (names, rows) = read_table(path)?;
    let t = names
        .iter()
        .position(|n| n == target)
        .ok_or_else(|| BenchError::MissingColumn(target.to_string()))?;
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (split_fraction * rows.len() as f64 + 1e-9).floor() as usize;
    if n_train == rows.len() {
        warn!("split fraction {split_fraction} leaves the test set empty");
    }
    let features: Vec<String> = names.iter().enumerate().filter(|(i, _)| *i != t).map(|(_, n)| n.clone()).collect();
    let build = |idx: &[usize], split: Split| -> Result<Dataset, BenchError> {
        let mut cols = vec![Vec::with_capacity(idx.len()); features.len()];
        let mut y = Vec::with_capacity(idx.len());
        for &r in idx {
            let mut k = 0;
            for (c, v) in rows[r].iter().enumerate() {
                if c == t {
                    y.push(*v);
                } else {
                    cols[k].push(*v);
                    k += 1;
                }
            }
        }
        Ok(Dataset::new(features.clone(), cols, y, split)?)
    };
    Ok((build(&order[..n_train], Split::Train)?, build(&order[n_train..], Split::Test)?))
}

/// Write `x1,...,xn,y` rows in shortest round-trip decimal form.
pub fn write_dataset_csv<W: std::io::Write>(data: &Dataset, out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = (1..=data.width()).map(|i| format!("x{i}")).chain(std::iter::once("y".into())).collect();
    w.write_record(&header)?;
    for r in 0..data.rows() {
        let rec: Vec<String> = data
            .row(r)
            .iter()
            .chain(std::iter::once(&data.target()[r]))
            .map(|v| v.to_string())
            .collect();
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
