//! `ggsr`: validate grammars, generate benchmarks, train, and report.

mod config;

use std::fs;
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use ggsr_core::benchmarks::{benchmark_names, write_dataset_csv};
use ggsr_core::grammar::Severity;
use ggsr_core::reporting::{build_report, emit_report, recovery_csv, render_report, FailedRun, ReportFormat, Timing};
use ggsr_core::trainer::{run_ablation, stream_seed, TrainError};
use ggsr_core::{generate_benchmark, Ablation, Grammar, ParseOptions, RunResult, RunTable};
use rayon::prelude::*;

use config::{grammar_text, rooted, RunConfig};

#[derive(Parser)]
#[command(name = "ggsr", version, about = "Grammar-guided symbolic regression")]
struct Cli {
    /// Worker threads (overrides run.workers).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a grammar file for structural problems.
    Validate {
        grammar: String,
        /// Column count for `1...nvar` productions.
        #[arg(long, default_value_t = 1)]
        nvar: usize,
    },
    /// Write benchmark train/test CSV files.
    GenBench {
        /// Benchmark names; all when omitted.
        names: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "benchmarks")]
        out: PathBuf,
    },
    /// Train one run from a config file.
    Train(RunArgs),
    /// Train with components of the method switched off.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// Ablations to run (`all` for every one).
        #[arg(long = "ablation", value_delimiter = ',', default_value = "all")]
        ablations: Vec<String>,
    },
    /// Run a benchmark suite over many seeds.
    Experiment {
        #[command(flatten)]
        run: RunArgs,
        /// Benchmarks; the config's dataset when omitted.
        #[arg(long, value_delimiter = ',')]
        suite: Vec<String>,
        /// Run indices, as a list (`1,2,5`) or range (`1-10`).
        #[arg(long, default_value = "1-10")]
        seeds: String,
        /// Methods: `baseline` and ablation names.
        #[arg(long, value_delimiter = ',', default_value = "baseline")]
        methods: Vec<String>,
    },
    /// Aggregate a results directory into tables.
    Report {
        results: PathBuf,
        #[arg(long, default_value = "report")]
        out: PathBuf,
        /// `markdown`, `json`, `csv` or `all`.
        #[arg(long, default_value = "all")]
        format: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// `section.key=value`, repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides run.output).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dry_run: bool,
}

/// An error carrying its process exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn fail(code: u8) -> impl FnOnce(anyhow::Error) -> Failure {
    move |error| Failure { code, error }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<TrainError>() {
            Some(TrainError::NonFinite { .. }) => 3,
            _ => 1,
        };
        Failure { code, error }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let workers = cli.workers;
    match cli.command {
        Command::Validate { grammar, nvar } => validate(&grammar, nvar),
        Command::GenBench { names, seed, out } => gen_bench(&names, seed, &rooted(&out)).map_err(fail(2)),
        Command::Train(args) => {
            let cfg = load_config(&args, workers)?;
            if args.dry_run {
                print!("{}", cfg.to_toml());
                return Ok(());
            }
            let out = out_dir(&cfg, &args);
            with_pool(cfg.run.workers, || train(&cfg, &out, Ablation::None))?;
            Ok(())
        }
        Command::Ablate { run, ablations } => {
            let cfg = load_config(&run, workers)?;
            let which = parse_ablations(&ablations).map_err(fail(2))?;
            let out = out_dir(&cfg, &run);
            with_pool(cfg.run.workers, || {
                which.iter().try_for_each(|&a| train(&cfg, &out, a).map(|_| ()))
            })
        }
        Command::Experiment {
            run,
            suite,
            seeds,
            methods,
        } => {
            let cfg = load_config(&run, workers)?;
            let seeds = parse_seeds(&seeds).map_err(fail(2))?;
            let methods = parse_ablations(&methods).map_err(fail(2))?;
            for b in &suite {
                ggsr_core::benchmarks::find_benchmark(b).map_err(|e| fail(2)(e.into()))?;
            }
            let out = out_dir(&cfg, &run);
            with_pool(cfg.run.workers, || experiment(&cfg, &out, &suite, &seeds, &methods))
        }
        Command::Report {
            results,
            out,
            format,
            alpha,
        } => report(&results, &rooted(&out), &format, alpha),
    }
}

fn load_config(args: &RunArgs, workers: Option<usize>) -> Result<RunConfig, Failure> {
    let mut overrides = args.overrides.clone();
    if let Some(s) = args.seed {
        overrides.push(format!("trainer.seed={s}"));
    }
    if let Some(w) = workers {
        overrides.push(format!("run.workers={w}"));
    }
    RunConfig::load(&args.config, &overrides).map_err(fail(2))
}

fn out_dir(cfg: &RunConfig, args: &RunArgs) -> PathBuf {
    args.output.as_deref().map_or_else(|| cfg.output_dir(), rooted)
}

fn with_pool<T>(workers: usize, f: impl FnOnce() -> Result<T, Failure> + Send) -> Result<T, Failure>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| fail(2)(anyhow!("building worker pool: {e}")))?;
    pool.install(f)
}

fn validate(path: &str, nvar: usize) -> Result<(), Failure> {
    let text = grammar_text(path).map_err(fail(2))?;
    let g = match Grammar::parse_unchecked(&text, &ParseOptions::with_nvar(nvar)) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: {e}");
            return Err(fail(1)(anyhow!("{path}: grammar is invalid")));
        }
    };
    let diags = g.validate();
    for d in &diags {
        eprintln!("{d}");
    }
    let errors = diags.iter().filter(|d| d.severity == Severity::Error).count();
    if errors > 0 {
        return Err(fail(1)(anyhow!("{path}: {errors} error(s)")));
    }
    println!(
        "{path}: ok ({} nonterminals, {} actions, {} warning(s))",
        g.nonterminal_count(),
        g.action_count(),
        diags.len()
    );
    Ok(())
}

fn gen_bench(names: &[String], seed: u64, out: &Path) -> Result<()> {
    let names: Vec<String> = if names.is_empty() {
        benchmark_names().map(str::to_string).collect()
    } else {
        names.to_vec()
    };
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for name in &names {
        let b = generate_benchmark(name, seed)?;
        for (split, data) in [("train", &b.train), ("test", &b.test)] {
            let path = out.join(format!("{}_{split}.csv", b.spec.name));
            let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_dataset_csv(data, std::io::BufWriter::new(file))?;
        }
        println!("{}: {} train rows, {} test rows", b.spec.name, b.train.rows(), b.test.rows());
    }
    Ok(())
}

fn parse_ablations(names: &[String]) -> Result<Vec<Ablation>> {
    if names.iter().any(|n| n == "all") {
        return Ok(Ablation::ALL.to_vec());
    }
    names.iter().map(|n| n.parse::<Ablation>().map_err(anyhow::Error::from)).collect()
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
                if a > b {
                    return Err(anyhow!("empty seed range `{part}`"));
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse()?),
        }
    }
    if out.is_empty() {
        return Err(anyhow!("no seeds given"));
    }
    Ok(out)
}

fn file_stem(cfg: &RunConfig, which: Ablation) -> String {
    match which {
        Ablation::None => format!("{}_seed{}", cfg.dataset_name(), cfg.trainer.seed),
        a => format!("{}_{}_seed{}", cfg.dataset_name(), a.name(), cfg.trainer.seed),
    }
}

/// Train once and write `<stem>.json`, `.ledger.jsonl`, `.timing.json`
/// and `.config.toml` under `dir`.
fn run_to_files(cfg: &RunConfig, dir: &Path, stem: &str, which: Ablation) -> Result<RunResult> {
    let data = cfg.load_run()?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join(format!("{stem}.config.toml")), cfg.to_toml())?;
    let mut ledger = std::io::BufWriter::new(fs::File::create(dir.join(format!("{stem}.ledger.jsonl")))?);
    let start = Instant::now();
    let mut r = run_ablation(&cfg.trainer, which, &data.grammar, &data.train, Some(&data.test), Some(&mut ledger))?;
    let wall_time_s = start.elapsed().as_secs_f64();
    ledger.flush()?;
    r.dataset = data.name;
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&r)? + "\n")?;
    fs::write(
        dir.join(format!("{stem}.timing.json")),
        serde_json::to_string(&Timing { wall_time_s })? + "\n",
    )?;
    Ok(r)
}

fn train(cfg: &RunConfig, out: &Path, which: Ablation) -> Result<RunResult, Failure> {
    let stem = file_stem(cfg, which);
    let r = run_to_files(cfg, out, &stem, which)?;
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6e}"));
    println!(
        "[{}] best: {}\n[{}] test MSE: {}  recovered: {}",
        which.name(),
        r.best_expression.as_deref().unwrap_or("<none>"),
        which.name(),
        fmt(r.best_test_mse),
        r.recovered
    );
    println!("wrote {}", out.join(format!("{stem}.json")).display());
    Ok(r)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

fn experiment(
    base: &RunConfig,
    out: &Path,
    suite: &[String],
    seeds: &[u64],
    methods: &[Ablation],
) -> Result<(), Failure> {
    let benches: Vec<Option<String>> = if suite.is_empty() {
        vec![None]
    } else {
        suite.iter().cloned().map(Some).collect()
    };
    let mut jobs = Vec::new();
    for b in &benches {
        for &s in seeds {
            for &m in methods {
                jobs.push((b.clone(), s, m));
            }
        }
    }
    let failures: usize = jobs
        .par_iter()
        .map(|(bench, run, method)| {
            let mut cfg = base.clone();
            if let Some(b) = bench {
                cfg.run.benchmark = Some(b.clone());
                cfg.run.csv = None;
            }
            let name = cfg.dataset_name();
            // Independent substream per (base seed, benchmark, run index);
            // kept below 2^63 so it survives a TOML echo.
            let seed = stream_seed(base.trainer.seed, fnv1a(&name), *run) >> 1;
            cfg.trainer.seed = seed;
            cfg.run.data_seed = Some(seed);
            let dir = out.join(&name).join(method.name());
            let stem = format!("run{run}");
            let outcome = catch_unwind(AssertUnwindSafe(|| run_to_files(&cfg, &dir, &stem, *method)))
                .unwrap_or_else(|p| {
                    let msg = p
                        .downcast_ref::<String>()
                        .cloned()
                        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_else(|| "panic".into());
                    Err(anyhow!("run panicked: {msg}"))
                });
            match outcome {
                Ok(r) => {
                    log::info!(
                        "{name}/{}/run{run}: {} (test MSE {:?})",
                        method.name(),
                        r.best_expression.as_deref().unwrap_or("<none>"),
                        r.best_test_mse
                    );
                    0
                }
                Err(e) => {
                    log::error!("{name}/{}/run{run} failed: {e:#}", method.name());
                    let rec = FailedRun {
                        failed: true,
                        dataset: name,
                        method: method.name().to_string(),
                        seed,
                        error: format!("{e:#}"),
                    };
                    let _ = fs::create_dir_all(&dir);
                    let _ = fs::write(
                        dir.join(format!("{stem}.json")),
                        serde_json::to_string_pretty(&rec).expect("record serializes") + "\n",
                    );
                    1
                }
            }
        })
        .sum();
    println!(
        "{} runs, {} failed; results in {}",
        jobs.len(),
        failures,
        out.display()
    );
    Ok(())
}

fn report(results: &Path, out: &Path, format: &str, alpha: f64) -> Result<(), Failure> {
    if !results.is_dir() {
        return Err(fail(2)(anyhow!("{} is not a directory", results.display())));
    }
    let formats: Vec<ReportFormat> = if format == "all" {
        vec![ReportFormat::Markdown, ReportFormat::Json, ReportFormat::Csv]
    } else {
        vec![format.parse().map_err(|e: String| fail(2)(anyhow!(e)))?]
    };
    let table = RunTable::load_dir(results).map_err(|e| fail(2)(e.into()))?;
    if table.is_empty() {
        log::warn!("no run results under {}", results.display());
    }
    let rep = build_report(&table, alpha);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for f in formats {
        let path = out.join(format!("report.{}", f.extension()));
        emit_report(&rep, f, &path).map_err(anyhow::Error::from)?;
        println!("wrote {}", path.display());
    }
    fs::write(out.join("recovery.csv"), recovery_csv(&rep).map_err(anyhow::Error::from)?)
        .context("writing recovery.csv")?;
    print!("{}", render_report(&rep, ReportFormat::Markdown).map_err(anyhow::Error::from)?);
    Ok(())
}
