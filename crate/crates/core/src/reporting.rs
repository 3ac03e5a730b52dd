//! Aggregation of many runs into comparison tables and significance counts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::benchmarks::{find_benchmark, BENCHMARKS};
use crate::trainer::RunResult;

/// Runs whose MSE exceeds this are reported as failed and left out of
/// means and deviations.
pub const MSE_EXCLUSION_THRESHOLD: f64 = 1e10;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("duplicate row for benchmark {benchmark}, method {method}, seed {seed}")]
    DuplicateRow { benchmark: String, method: String, seed: u64 },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One run of one method on one benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub benchmark: String,
    pub method: String,
    pub seed: u64,
    pub test_mse: Option<f64>,
    pub recovered: bool,
    pub complexity: Option<usize>,
    pub r2: Option<f64>,
    pub wall_time_s: Option<f64>,
    #[serde(default)]
    pub failed: bool,
}

impl RunRow {
    pub fn from_result(benchmark: &str, method: &str, r: &RunResult, wall_time_s: Option<f64>) -> RunRow {
        RunRow {
            benchmark: benchmark.to_string(),
            method: method.to_string(),
            seed: r.seed,
            test_mse: r.best_test_mse,
            recovered: r.recovered,
            complexity: r.complexity,
            r2: r.test_r2,
            wall_time_s,
            failed: false,
        }
    }

    /// MSE usable for statistics, if any.
    fn valid_mse(&self) -> Option<f64> {
        self.test_mse
            .filter(|m| !self.failed && m.is_finite() && *m <= MSE_EXCLUSION_THRESHOLD)
    }
}

/// Rows keyed by `(benchmark, method, seed)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTable {
    rows: Vec<RunRow>,
}

impl RunTable {
    pub fn new(rows: Vec<RunRow>) -> Result<RunTable, ReportError> {
        let mut seen = BTreeSet::new();
        for r in &rows {
            if !seen.insert((r.benchmark.clone(), r.method.clone(), r.seed)) {
                return Err(ReportError::DuplicateRow {
                    benchmark: r.benchmark.clone(),
                    method: r.method.clone(),
                    seed: r.seed,
                });
            }
        }
        Ok(RunTable { rows })
    }

    pub fn rows(&self) -> &[RunRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Collect every run document under `dir` (recursively).
    ///
    /// A document is either a `RunResult` (its `dataset` names the
    /// benchmark and its ablation the method) or a failure record with
    /// `failed: true`. A sibling `<stem>.timing.json` supplies wall time.
    pub fn load_dir(dir: &Path) -> Result<RunTable, ReportError> {
        let mut files = Vec::new();
        collect_json(dir, &mut files)?;
        files.sort();
        let mut rows = Vec::new();
        for path in files {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
            if name.ends_with(".timing.json") || name == "report.json" {
                continue;
            }
            let text = fs::read_to_string(&path)?;
            let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| ReportError::Parse {
                path: path.clone(),
                message: e.to_string(),
            })?;
            if value.get("failed").and_then(|v| v.as_bool()) == Some(true) {
                let f: FailedRun = serde_json::from_value(value).map_err(|e| ReportError::Parse {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
                rows.push(RunRow {
                    benchmark: f.dataset,
                    method: f.method,
                    seed: f.seed,
                    test_mse: None,
                    recovered: false,
                    complexity: None,
                    r2: None,
                    wall_time_s: None,
                    failed: true,
                });
                continue;
            }
            if value.get("reward_curve").is_none() {
                continue;
            }
            let r: RunResult = serde_json::from_value(value).map_err(|e| ReportError::Parse {
                path: path.clone(),
                message: e.to_string(),
            })?;
            let timing = path.with_file_name(format!(
                "{}.timing.json",
                path.file_stem().and_then(|s| s.to_str()).unwrap_or("")
            ));
            let wall = fs::read_to_string(&timing)
                .ok()
                .and_then(|t| serde_json::from_str::<Timing>(&t).ok())
                .map(|t| t.wall_time_s);
            rows.push(RunRow::from_result(&r.dataset, r.ablation.name(), &r, wall));
        }
        RunTable::new(rows)
    }
}

fn collect_json(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), ReportError> {
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect_json(&p, out)?;
        } else if p.extension().is_some_and(|e| e == "json") {
            out.push(p);
        }
    }
    Ok(())
}

/// Record written in place of a `RunResult` when a run fails.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub failed: bool,
    pub dataset: String,
    pub method: String,
    pub seed: u64,
    pub error: String,
}

/// Wall-clock time of one run, kept apart from the reproducible result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_time_s: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdKind {
    /// Divide by `n`.
    #[default]
    Population,
    /// Divide by `n - 1`.
    Sample,
}

/// Statistics of one method on one benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub benchmark: String,
    pub method: String,
    pub mean_mse: Option<f64>,
    pub std_mse: Option<f64>,
    pub recovery_pct: f64,
    pub valid_runs: usize,
    pub excluded_runs: usize,
    pub total_runs: usize,
    pub mean_complexity: Option<f64>,
    pub mean_r2: Option<f64>,
    pub excluded_from_stats: bool,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn std_dev(v: &[f64], kind: StdKind) -> Option<f64> {
    let m = mean(v)?;
    let denom = match kind {
        StdKind::Population => v.len(),
        StdKind::Sample if v.len() > 1 => v.len() - 1,
        StdKind::Sample => return None,
    };
    Some((v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / denom as f64).sqrt())
}

/// Position of a benchmark in the canonical table, unknown names last.
fn benchmark_order(name: &str) -> (usize, String) {
    let i = BENCHMARKS.iter().position(|b| b.name == name).unwrap_or(usize::MAX);
    (i, name.to_string())
}

fn grouped(rows: &[RunRow]) -> BTreeMap<((usize, String), String), Vec<&RunRow>> {
    let mut g: BTreeMap<((usize, String), String), Vec<&RunRow>> = BTreeMap::new();
    for r in rows {
        g.entry((benchmark_order(&r.benchmark), r.method.clone())).or_default().push(r);
    }
    g
}

pub fn aggregate(rows: &[RunRow]) -> Vec<Summary> {
    aggregate_with(rows, StdKind::Population)
}

/// Per-(benchmark, method) means and deviations over valid runs. Runs with
/// non-finite MSE or MSE above 1e10 are excluded and counted.
pub fn aggregate_with(rows: &[RunRow], kind: StdKind) -> Vec<Summary> {
    grouped(rows)
        .into_iter()
        .map(|(((_, benchmark), method), runs)| {
            let mut valid: Vec<f64> = runs.iter().filter_map(|r| r.valid_mse()).collect();
            // Summation order must not depend on row order.
            valid.sort_by(f64::total_cmp);
            let recovered = runs.iter().filter(|r| r.recovered).count();
            let mut cplx: Vec<f64> = runs.iter().filter_map(|r| r.complexity.map(|c| c as f64)).collect();
            cplx.sort_by(f64::total_cmp);
            let mut r2: Vec<f64> = runs.iter().filter_map(|r| r.r2.filter(|v| v.is_finite())).collect();
            r2.sort_by(f64::total_cmp);
            Summary {
                excluded_from_stats: find_benchmark(&benchmark).is_ok_and(|b| b.excluded_from_stats),
                benchmark,
                method,
                mean_mse: mean(&valid),
                std_mse: std_dev(&valid, kind),
                recovery_pct: 100.0 * recovered as f64 / runs.len() as f64,
                valid_runs: valid.len(),
                excluded_runs: runs.len() - valid.len(),
                total_runs: runs.len(),
                mean_complexity: mean(&cplx),
                mean_r2: mean(&r2),
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// Pairs `(a_i, b_j)` with `a_i > b_j`, ties counting one half.
    pub u_a: f64,
    pub u_b: f64,
    pub z: f64,
    /// Two-sided, normal approximation with tie and continuity correction.
    pub p_value: f64,
}

/// Mann–Whitney U test from average ranks.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> MannWhitney {
    let (n1, n2) = (a.len(), b.len());
    let mut all: Vec<(f64, bool)> = a.iter().map(|&v| (v, true)).chain(b.iter().map(|&v| (v, false))).collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let n = all.len();
    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0.total_cmp(&all[i].0).is_eq() {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_a += avg * all[i..=j].iter().filter(|x| x.1).count() as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let (f1, f2, nf) = (n1 as f64, n2 as f64, n as f64);
    let u_a = rank_sum_a - f1 * (f1 + 1.0) / 2.0;
    let u_b = f1 * f2 - u_a;
    let mu = f1 * f2 / 2.0;
    let var = if n > 1 {
        f1 * f2 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)))
    } else {
        0.0
    };
    let (z, p) = if var > 0.0 {
        let z = ((u_a - mu).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (z, (2.0 * (1.0 - normal.cdf(z))).min(1.0))
    } else {
        (0.0, 1.0)
    };
    MannWhitney { u_a, u_b, z, p_value: p }
}

/// Better / equivalent / worse counts of one method.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSignificance {
    pub method: String,
    pub better: usize,
    pub equivalent: usize,
    pub worse: usize,
}

impl MethodSignificance {
    /// `+a /∼b /−c`.
    pub fn label(&self) -> String {
        format!("+{} /∼{} /−{}", self.better, self.equivalent, self.worse)
    }
}

/// Per-benchmark significance labels: the method with the lowest mean MSE
/// is compared to every other method. Methods whose difference from it
/// has `p >= alpha` are equivalent (`∼`, the best included); if none is,
/// the best gets `+`. All remaining methods get `−`. Benchmarks flagged
/// as excluded from statistics are skipped.
pub fn significance_summary(rows: &[RunRow], alpha: f64) -> Vec<MethodSignificance> {
    let methods: BTreeSet<String> = rows.iter().map(|r| r.method.clone()).collect();
    let mut out: BTreeMap<String, MethodSignificance> = methods
        .iter()
        .map(|m| {
            (
                m.clone(),
                MethodSignificance {
                    method: m.clone(),
                    ..Default::default()
                },
            )
        })
        .collect();
    if methods.len() < 2 {
        return out.into_values().collect();
    }
    let mut by_bench: BTreeMap<(usize, String), BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        // Failed or diverged runs rank below every valid run.
        let v = r.valid_mse().unwrap_or(f64::INFINITY);
        by_bench
            .entry(benchmark_order(&r.benchmark))
            .or_default()
            .entry(r.method.clone())
            .or_default()
            .push(v);
    }
    for ((_, bench), samples) in by_bench {
        if find_benchmark(&bench).is_ok_and(|b| b.excluded_from_stats) || samples.len() < 2 {
            continue;
        }
        let score = |v: &Vec<f64>| {
            let finite: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
            mean(&finite).unwrap_or(f64::INFINITY)
        };
        let best = samples
            .iter()
            .min_by(|x, y| score(x.1).total_cmp(&score(y.1)).then(x.0.cmp(y.0)))
            .map(|(m, _)| m.clone())
            .expect("at least two methods");
        let equivalent: Vec<&String> = samples
            .iter()
            .filter(|(m, v)| **m != best && mann_whitney_u(v, &samples[&best]).p_value >= alpha)
            .map(|(m, _)| m)
            .collect();
        for m in samples.keys() {
            let entry = out.get_mut(m).expect("method registered");
            if *m == best {
                if equivalent.is_empty() {
                    entry.better += 1;
                } else {
                    entry.equivalent += 1;
                }
            } else if equivalent.contains(&m) {
                entry.equivalent += 1;
            } else {
                entry.worse += 1;
            }
        }
    }
    out.into_values().collect()
}

/// Everything a report file contains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub summaries: Vec<Summary>,
    pub significance: Vec<MethodSignificance>,
}

pub fn build_report(table: &RunTable, alpha: f64) -> Report {
    Report {
        summaries: aggregate(table.rows()),
        significance: significance_summary(table.rows(), alpha),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn sci(v: Option<f64>) -> String {
    v.map_or_else(|| "−".to_string(), |x| format!("{x:.2e}"))
}

/// Render a report. Output is a pure function of the report.
pub fn render_report(report: &Report, format: ReportFormat) -> Result<String, ReportError> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "benchmark",
                "method",
                "mean_mse",
                "std_mse",
                "recovery_pct",
                "valid_runs",
                "excluded_runs",
                "total_runs",
                "mean_complexity",
                "mean_r2",
                "excluded_from_stats",
            ])?;
            for s in &report.summaries {
                w.write_record([
                    s.benchmark.clone(),
                    s.method.clone(),
                    opt(s.mean_mse),
                    opt(s.std_mse),
                    s.recovery_pct.to_string(),
                    s.valid_runs.to_string(),
                    s.excluded_runs.to_string(),
                    s.total_runs.to_string(),
                    opt(s.mean_complexity),
                    opt(s.mean_r2),
                    s.excluded_from_stats.to_string(),
                ])?;
            }
            let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Markdown => Ok(markdown(report)),
    }
}

fn markdown(report: &Report) -> String {
    let methods: Vec<String> = report
        .summaries
        .iter()
        .map(|s| s.method.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut benches: Vec<(usize, String)> = report.summaries.iter().map(|s| benchmark_order(&s.benchmark)).collect();
    benches.sort();
    benches.dedup();
    let cell = |b: &str, m: &str| report.summaries.iter().find(|s| s.benchmark == b && s.method == m);
    let show_extra = report.summaries.iter().any(|s| s.mean_complexity.is_some() || s.mean_r2.is_some());

    let mut out = String::new();
    out.push_str("## Test MSE (mean ± std over valid runs)\n\n| Benchmark |");
    for m in &methods {
        let _ = write!(out, " {m} |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(methods.len()));
    out.push('\n');
    for (_, b) in &benches {
        let _ = write!(out, "| {b} |");
        for m in &methods {
            let text = match cell(b, m) {
                Some(s) => match (s.mean_mse, s.std_mse) {
                    (Some(mu), Some(sd)) => format!("{mu:.2e} (±{sd:.1e})"),
                    _ => "−".into(),
                },
                None => String::new(),
            };
            let _ = write!(out, " {text} |");
        }
        out.push('\n');
    }
    if !report.significance.is_empty() {
        out.push_str("| U test |");
        for m in &methods {
            let label = report
                .significance
                .iter()
                .find(|s| &s.method == m)
                .map_or_else(String::new, MethodSignificance::label);
            let _ = write!(out, " {label} |");
        }
        out.push('\n');
    }

    out.push_str("\n## Exact recovery (%)\n\n| Benchmark |");
    for m in &methods {
        let _ = write!(out, " {m} |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(methods.len()));
    out.push('\n');
    for (_, b) in &benches {
        let _ = write!(out, "| {b} |");
        for m in &methods {
            let text = cell(b, m).map_or_else(String::new, |s| format!("{:.0}", s.recovery_pct));
            let _ = write!(out, " {text} |");
        }
        out.push('\n');
    }

    if show_extra {
        out.push_str("\n## Per-run detail\n\n| Benchmark | Method | MSE | C | R² | valid/total |\n|---|---|---|---|---|---|\n");
        for s in &report.summaries {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {}/{} |",
                s.benchmark,
                s.method,
                sci(s.mean_mse),
                s.mean_complexity.map_or_else(|| "−".into(), |c| format!("{c:.1}")),
                s.mean_r2.map_or_else(|| "−".into(), |r| format!("{r:.3}")),
                s.valid_runs,
                s.total_runs
            );
        }
    }
    out
}

/// Recovery percentages per benchmark and method, for plotting.
pub fn recovery_csv(report: &Report) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["benchmark", "method", "recovery_pct"])?;
    for s in &report.summaries {
        w.write_record([s.benchmark.as_str(), s.method.as_str(), &s.recovery_pct.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Write the report in `format` to `path`.
pub fn emit_report(report: &Report, format: ReportFormat, path: &Path) -> Result<(), ReportError> {
    fs::write(path, render_report(report, format)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn row(b: &str, m: &str, seed: u64, mse: f64) -> RunRow {
        RunRow {
            benchmark: b.into(),
            method: m.into(),
            seed,
            test_mse: Some(mse),
            recovered: mse < 1e-12,
            complexity: None,
            r2: None,
            wall_time_s: None,
            failed: false,
        }
    }

    /// Count pairs directly.
    fn pairwise_u(a: &[f64], b: &[f64]) -> f64 {
        let mut u = 0.0;
        for x in a {
            for y in b {
                if x > y {
                    u += 1.0;
                } else if x == y {
                    u += 0.5;
                }
            }
        }
        u
    }

    #[test]
    fn mann_whitney_examples() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]);
        assert_eq!(r.u_a, 0.0);
        assert_eq!(r.u_b, 4.0);
        let s = [1.0, 2.0, 2.0, 5.0];
        let r = mann_whitney_u(&s, &s);
        assert_eq!(r.u_a, 8.0);
        assert_eq!(r.u_b, 8.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn mann_whitney_matches_pairwise_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let n = rng.gen_range(1..=8);
            let m = rng.gen_range(1..=8);
            // Small integer support forces ties.
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64).collect();
            let b: Vec<f64> = (0..m).map(|_| rng.gen_range(0..6) as f64).collect();
            let r = mann_whitney_u(&a, &b);
            assert_eq!(r.u_a, pairwise_u(&a, &b), "{a:?} {b:?}");
            assert_eq!(r.u_a + r.u_b, (n * m) as f64);
            assert!((0.0..=1.0).contains(&r.p_value));
        }
    }

    #[test]
    fn p_value_against_reference() {
        // 10 vs 10 with complete separation: U = 0, sigma^2 = 175,
        // z = (50 - 0.5) / sqrt(175) = 3.7418, p = 1.827e-4.
        let a: Vec<f64> = (0..10).map(f64::from).collect();
        let b: Vec<f64> = (10..20).map(f64::from).collect();
        let r = mann_whitney_u(&a, &b);
        assert!((r.z - 49.5 / 175f64.sqrt()).abs() < 1e-12);
        assert!((r.p_value - 1.827e-4).abs() < 1e-6, "{}", r.p_value);
    }

    #[test]
    fn aggregate_examples() {
        let rows: Vec<RunRow> = (0..30).map(|s| row("N1", "ours", s, 0.0)).collect();
        let s = &aggregate(&rows)[0];
        assert_eq!((s.mean_mse, s.std_mse, s.recovery_pct), (Some(0.0), Some(0.0), 100.0));

        let s = &aggregate(&[row("N2", "m", 0, 1.0), row("N2", "m", 1, 3.0)])[0];
        assert_eq!((s.mean_mse, s.std_mse), (Some(2.0), Some(1.0)));
        let s = &aggregate_with(&[row("N2", "m", 0, 1.0), row("N2", "m", 1, 3.0)], StdKind::Sample)[0];
        assert_eq!(s.std_mse, Some(2f64.sqrt()));

        let s = &aggregate(&[row("N2", "m", 0, 1.0), row("N2", "m", 1, 1e12), row("N2", "m", 2, f64::NAN)])[0];
        assert_eq!((s.valid_runs, s.excluded_runs, s.total_runs), (1, 2, 3));
        let s = &aggregate(&[row("N2", "m", 0, 1e10)])[0];
        assert_eq!(s.valid_runs, 1);
    }

    #[test]
    fn aggregate_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut rows: Vec<RunRow> = (0..20)
            .map(|s| row(if s % 2 == 0 { "N1" } else { "K2" }, "m", s, rng.gen_range(0.0..10.0)))
            .collect();
        let a = aggregate(&rows);
        rows.reverse();
        rows.swap(3, 11);
        assert_eq!(a, aggregate(&rows));
    }

    #[test]
    fn significance_rules() {
        assert_eq!(
            significance_summary(&[row("N1", "a", 0, 1.0)], 0.05),
            vec![MethodSignificance {
                method: "a".into(),
                ..Default::default()
            }]
        );
        let mut rows = Vec::new();
        for bench in ["N1", "N2", "K5"] {
            for s in 0..10 {
                rows.push(row(bench, "a", s, 0.001 * s as f64));
                rows.push(row(bench, "b", s, 1.0 + s as f64));
                rows.push(row(bench, "c", s, 1.05 + s as f64));
            }
        }
        let sig = significance_summary(&rows, 0.05);
        assert_eq!(sig[0].label(), "+2 /∼0 /−0");
        assert_eq!(sig[1].label(), "+0 /∼0 /−2");
        assert_eq!(sig[2].label(), "+0 /∼0 /−2");

        // Two indistinguishable leaders are both equivalent.
        let rows: Vec<RunRow> = (0..10)
            .flat_map(|s| [row("N1", "a", s, s as f64), row("N1", "b", s, s as f64 + 0.01), row("N1", "c", s, 100.0 + s as f64)])
            .collect();
        let sig = significance_summary(&rows, 0.05);
        assert_eq!(sig.iter().map(|s| s.label()).collect::<Vec<_>>(), ["+0 /∼1 /−0", "+0 /∼1 /−0", "+0 /∼0 /−1"]);
    }

    #[test]
    fn reports_render_deterministically() {
        let empty = build_report(&RunTable::default(), 0.05);
        let csv = render_report(&empty, ReportFormat::Csv).unwrap();
        assert!(csv.starts_with("benchmark,method"));
        assert!(render_report(&empty, ReportFormat::Markdown).unwrap().contains("| Benchmark |"));

        let rows: Vec<RunRow> = (0..5)
            .flat_map(|s| [row("N1", "a", s, 0.0), row("N1", "b", s, 0.5 + s as f64)])
            .collect();
        let rep = build_report(&RunTable::new(rows).unwrap(), 0.05);
        let md = render_report(&rep, ReportFormat::Markdown).unwrap();
        assert_eq!(md, render_report(&rep, ReportFormat::Markdown).unwrap());
        assert!(md.contains("| N1 | 0.00e0 (±0.0e0) |"));
        assert!(md.contains("| U test | +1 /∼0 /−0 | +0 /∼0 /−1 |"));
        let json = render_report(&rep, ReportFormat::Json).unwrap();
        let back: Report = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rep);
        assert!(recovery_csv(&rep).unwrap().contains("N1,a,100"));
    }

    #[test]
    fn duplicate_rows_rejected() {
        assert!(RunTable::new(vec![row("N1", "a", 0, 1.0), row("N1", "a", 0, 2.0)]).is_err());
    }
}
