//! Run configuration files and `--override` handling.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ggsr_core::benchmarks::load_csv;
use ggsr_core::{builtin, generate_benchmark, Dataset, Grammar, ParseOptions, TrainConfig};
use serde::{Deserialize, Serialize};

/// Environment variable that roots every relative output directory.
pub const OUTPUT_ROOT_ENV: &str = "GGSR_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    #[serde(default)]
    pub trainer: TrainConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// `nguyen`, `airfoil`, `toy` or a path to a grammar file.
    pub grammar: String,
    /// Benchmark name such as `N1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<String>,
    /// Data file, used when no benchmark is named.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default = "default_target")]
    pub target: String,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    /// Seed for data generation or splitting; the trainer seed if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_target() -> String {
    "y".into()
}
fn default_fraction() -> f64 {
    0.8
}
fn default_output() -> PathBuf {
    PathBuf::from("runs")
}
fn default_workers() -> usize {
    1
}

/// Data ready for training.
pub struct LoadedRun {
    pub name: String,
    pub grammar: Grammar,
    pub train: Dataset,
    pub test: Dataset,
}

impl RunConfig {
    /// Read `path`, apply `key=value` overrides, and validate.
    pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut value: toml::Value = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let mut cfg: RunConfig = value.try_into().with_context(|| format!("in {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if builtin_grammar(&self.run.grammar).is_none() {
            let p = Path::new(&self.run.grammar);
            if p.is_relative() {
                self.run.grammar = base.join(p).to_string_lossy().into_owned();
            }
        }
        if let Some(csv) = &self.run.csv {
            if csv.is_relative() {
                self.run.csv = Some(base.join(csv));
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.trainer.validate()?;
        match (&self.run.benchmark, &self.run.csv) {
            (Some(_), Some(_)) => bail!("run.benchmark and run.csv are mutually exclusive"),
            (None, None) => bail!("one of run.benchmark or run.csv is required"),
            (Some(b), None) => {
                ggsr_core::benchmarks::find_benchmark(b)?;
            }
            (None, Some(p)) => {
                if !p.is_file() {
                    bail!("data file {} does not exist", p.display());
                }
            }
        }
        if builtin_grammar(&self.run.grammar).is_none() && !Path::new(&self.run.grammar).is_file() {
            bail!("grammar file {} does not exist", self.run.grammar);
        }
        if self.run.workers == 0 {
            bail!("run.workers must be at least 1");
        }
        Ok(())
    }

    /// Output directory, rooted at `$GGSR_OUTPUT_ROOT` when relative.
    pub fn output_dir(&self) -> PathBuf {
        rooted(&self.run.output)
    }

    pub fn data_seed(&self) -> u64 {
        self.run.data_seed.unwrap_or(self.trainer.seed)
    }

    /// Short name for output files.
    pub fn dataset_name(&self) -> String {
        match (&self.run.benchmark, &self.run.csv) {
            (Some(b), _) => b.clone(),
            (None, Some(p)) => p.file_stem().map_or("data".into(), |s| s.to_string_lossy().into_owned()),
            (None, None) => "data".into(),
        }
    }

    /// Build data and grammar.
    pub fn load_run(&self) -> Result<LoadedRun> {
        let (train, test) = match (&self.run.benchmark, &self.run.csv) {
            (Some(b), _) => {
                let g = generate_benchmark(b, self.data_seed())?;
                (g.train, g.test)
            }
            (None, Some(p)) => load_csv(p, &self.run.target, self.run.train_fraction, self.data_seed())?,
            (None, None) => bail!("no dataset configured"),
        };
        let grammar = load_grammar(&self.run.grammar, train.width())?;
        Ok(LoadedRun {
            name: self.dataset_name(),
            grammar,
            train,
            test,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

pub fn rooted(p: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if p.is_relative() => PathBuf::from(root).join(p),
        _ => p.to_path_buf(),
    }
}

pub fn builtin_grammar(name: &str) -> Option<&'static str> {
    match name {
        "nguyen" => Some(builtin::NGUYEN),
        "airfoil" => Some(builtin::AIRFOIL),
        "toy" => Some(builtin::TOY),
        _ => None,
    }
}

pub fn grammar_text(name: &str) -> Result<String> {
    match builtin_grammar(name) {
        Some(t) => Ok(t.to_string()),
        None => std::fs::read_to_string(name).with_context(|| format!("reading grammar {name}")),
    }
}

pub fn load_grammar(name: &str, nvar: usize) -> Result<Grammar> {
    let text = grammar_text(name)?;
    let g = Grammar::parse(&text, &ParseOptions::with_nvar(nvar)).map_err(|e| anyhow!("grammar {name}: {e}"))?;
    for w in g.warnings() {
        log::warn!("grammar {name}: {w}");
    }
    Ok(g)
}

/// Set `a.b.c=value` in a TOML tree. The value is read as a TOML literal
/// and falls back to a plain string.
pub fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{spec}` is not of the form key=value"))?;
    let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override key `{key}` is malformed");
    }
    let mut node = root;
    for p in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| anyhow!("override key `{key}` walks through a non-table"))?;
        node = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    node.as_table_mut()
        .ok_or_else(|| anyhow!("override key `{key}` walks through a non-table"))?
        .insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}
