//! Experiment suites: JSON configs, CSV rows and per-experiment artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{CommandFactory, Parser};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::commands::{execute, fmt_f64, Cli, Globals, Stats};

/// The shipped default suite.
pub const DEFAULT_SUITE: &str = include_str!("../suites/default.json");

pub const CSV_HEADER: &str =
    "experiment,n,m,M,width,depth,term_count,sup_error,eps,budget_flag,runtime_ms,seed";

const VERBS: &[&str] = &[
    "fit-univariate",
    "build-shallow",
    "build-lcs",
    "build-functional",
    "build-deep-narrow",
    "kst-features",
    "build-ostrand",
    "eval",
    "verify",
];

/// Inputs that name files which must exist when the experiment runs.
const FILE_INPUTS: &[&str] = &["net", "points", "target-file"];

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SuiteError {
    #[error("config error at `{field}`: {message}")]
    ConfigParse { field: String, message: String },
    #[error("unknown verb `{verb}` at `{field}`")]
    UnknownVerb { field: String, verb: String },
    #[error("missing input `{path}` at `{field}`")]
    MissingInput { field: String, path: String },
}

fn config_error(field: impl Into<String>, message: impl Into<String>) -> SuiteError {
    SuiteError::ConfigParse {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub command: String,
    /// Option values keyed by long flag name; `true` is a bare flag, arrays
    /// give several values.
    pub inputs: Map<String, Value>,
    pub eps: Option<f64>,
    pub seed: u64,
    /// Grid density per axis, passed as `--samples`.
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteConfig {
    pub experiments: Vec<ExperimentConfig>,
}

impl SuiteConfig {
    /// Parses and validates a suite document; errors name the offending field.
    pub fn parse(text: &str) -> std::result::Result<Self, SuiteError> {
        let root: Value = serde_json::from_str(text).map_err(|e| config_error("<document>", e.to_string()))?;
        let obj = root.as_object().ok_or_else(|| config_error("<document>", "expected an object"))?;
        if let Some(key) = obj.keys().find(|k| *k != "experiments") {
            return Err(config_error(key.clone(), "unknown field"));
        }
        let list = obj
            .get("experiments")
            .ok_or_else(|| config_error("experiments", "missing"))?
            .as_array()
            .ok_or_else(|| config_error("experiments", "expected an array"))?;
        let experiments = list
            .iter()
            .enumerate()
            .map(|(i, v)| parse_experiment(i, v))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        for (i, e) in experiments.iter().enumerate() {
            if experiments[..i].iter().any(|p| p.name == e.name) {
                return Err(config_error(format!("experiments[{i}].name"), format!("duplicate name `{}`", e.name)));
            }
        }
        Ok(Self { experiments })
    }
}

fn parse_experiment(i: usize, v: &Value) -> std::result::Result<ExperimentConfig, SuiteError> {
    let at = |k: &str| format!("experiments[{i}].{k}");
    let obj = v.as_object().ok_or_else(|| config_error(format!("experiments[{i}]"), "expected an object"))?;
    for key in obj.keys() {
        if !["name", "command", "inputs", "eps", "seed", "grid"].contains(&key.as_str()) {
            return Err(config_error(at(key), "unknown field"));
        }
    }
    let name = obj
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| config_error(at("name"), "expected a string"))?
        .to_string();
    let safe = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
        && name != "."
        && name != "..";
    if !safe {
        return Err(config_error(at("name"), format!("`{name}` is not a valid directory name")));
    }
    let command = obj
        .get("command")
        .and_then(Value::as_str)
        .ok_or_else(|| config_error(at("command"), "expected a string"))?
        .to_string();
    if !VERBS.contains(&command.as_str()) {
        return Err(SuiteError::UnknownVerb {
            field: at("command"),
            verb: command,
        });
    }
    let eps = match obj.get("eps") {
        None | Some(Value::Null) => None,
        Some(e) => match e.as_f64() {
            Some(x) if x > 0.0 => Some(x),
            _ => return Err(config_error(at("eps"), "expected a positive number")),
        },
    };
    let seed = match obj.get("seed") {
        None => 0,
        Some(s) => s
            .as_u64()
            .ok_or_else(|| config_error(at("seed"), "expected a non-negative integer"))?,
    };
    let grid = match obj.get("grid") {
        None => None,
        Some(g) => Some(
            g.as_u64()
                .filter(|&n| n >= 1)
                .ok_or_else(|| config_error(at("grid"), "expected a positive integer"))? as usize,
        ),
    };
    let inputs = match obj.get("inputs") {
        None => Map::new(),
        Some(Value::Object(m)) => m.clone(),
        Some(_) => return Err(config_error(at("inputs"), "expected an object")),
    };
    let known = verb_flags(&command);
    if eps.is_some() && !known.iter().any(|f| f == "eps") {
        return Err(config_error(at("eps"), format!("`{command}` takes no tolerance")));
    }
    for (key, value) in &inputs {
        let field = format!("experiments[{i}].inputs.{key}");
        if key == "eps" || !known.contains(key) {
            return Err(config_error(field, format!("not an option of `{command}`")));
        }
        if !scalar_values(value).iter().all(Option::is_some) {
            return Err(config_error(field, "values must be strings, numbers or booleans"));
        }
    }
    Ok(ExperimentConfig {
        name,
        command,
        inputs,
        eps,
        seed,
        grid,
    })
}

fn verb_flags(verb: &str) -> Vec<String> {
    Cli::command()
        .find_subcommand(verb)
        .map(|c| {
            c.get_arguments()
                .filter(|a| !a.is_global_set())
                .filter_map(|a| a.get_long().map(str::to_string))
                .collect()
        })
        .unwrap_or_default()
}

/// Flattens an input value into option values; `None` entries are invalid.
fn scalar_values(v: &Value) -> Vec<Option<String>> {
    let one = |v: &Value| match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    };
    match v {
        Value::Array(items) => items.iter().map(one).collect(),
        Value::Bool(_) => Vec::new(),
        other => vec![one(other)],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub experiment: String,
    pub stats: Stats,
    pub runtime_ms: f64,
    pub seed: u64,
}

impl SuiteRow {
    pub fn to_csv(&self) -> String {
        let s = &self.stats;
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        [
            self.experiment.clone(),
            s.n.to_string(),
            s.m.to_string(),
            s.big_m.map(|v| v.to_string()).unwrap_or_default(),
            s.width.to_string(),
            s.depth.to_string(),
            s.term_count.to_string(),
            opt(s.sup_error),
            opt(s.eps),
            s.budget_flag.to_string(),
            format!("{:.3}", self.runtime_ms),
            self.seed.to_string(),
        ]
        .join(",")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
    /// `(experiment, message)` for every experiment that errored.
    pub errors: Vec<(String, String)>,
}

impl SuiteReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.to_csv());
            out.push('\n');
        }
        out
    }

    pub fn is_success(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Per-experiment artifact directory.
pub fn experiment_dir(out_dir: &Path, name: &str) -> PathBuf {
    out_dir.join(name)
}

/// Translates one experiment into a command line; `{out}` in string inputs
/// is replaced by the suite output directory.
pub fn experiment_argv(e: &ExperimentConfig, out_dir: &Path, default_samples: usize) -> Vec<String> {
    let root = out_dir.display().to_string();
    let mut argv = vec![
        "tfnn".to_string(),
        "--seed".to_string(),
        e.seed.to_string(),
        "--samples".to_string(),
        e.grid.unwrap_or(default_samples).to_string(),
        "--out-dir".to_string(),
        experiment_dir(out_dir, &e.name).display().to_string(),
        e.command.clone(),
    ];
    if let Some(eps) = e.eps {
        argv.push("--eps".to_string());
        argv.push(eps.to_string());
    }
    for (key, value) in &e.inputs {
        match value {
            Value::Bool(false) => continue,
            Value::Bool(true) => argv.push(format!("--{key}")),
            _ => {
                argv.push(format!("--{key}"));
                for v in scalar_values(value).into_iter().flatten() {
                    argv.push(v.replace("{out}", &root));
                }
            }
        }
    }
    argv
}

fn check_inputs(i: usize, e: &ExperimentConfig, out_dir: &Path) -> std::result::Result<(), SuiteError> {
    let root = out_dir.display().to_string();
    for (key, value) in &e.inputs {
        let paths: Vec<String> = match (key.as_str(), value) {
            (k, Value::String(s)) if FILE_INPUTS.contains(&k) => vec![s.clone()],
            ("target", Value::String(s)) => s.strip_prefix("file:").map(str::to_string).into_iter().collect(),
            _ => Vec::new(),
        };
        for p in paths {
            let p = p.replace("{out}", &root);
            if !Path::new(&p).exists() {
                return Err(SuiteError::MissingInput {
                    field: format!("experiments[{i}].inputs.{key}"),
                    path: p,
                });
            }
        }
    }
    Ok(())
}

/// Runs one experiment and writes its artifacts into its directory.
fn run_experiment(i: usize, e: &ExperimentConfig, out_dir: &Path, default_samples: usize) -> Result<SuiteRow> {
    check_inputs(i, e, out_dir)?;
    let argv = experiment_argv(e, out_dir, default_samples);
    let cli = Cli::try_parse_from(&argv)
        .map_err(|err| config_error(format!("experiments[{i}].inputs"), err.to_string().trim().to_string()))?;
    let globals = Globals {
        seed: cli.seed,
        samples: cli.samples,
        out_dir: cli.out_dir.clone(),
    };
    let start = Instant::now();
    let outcome = execute(&cli.command, &globals)?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;

    let dir = &globals.out_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let put = |name: &str, text: &str| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    };
    if let Some((name, text)) = &outcome.artifact {
        put(name, text)?;
    }
    if let Some(net) = &outcome.network {
        put("net.json", &net.to_json())?;
    }
    if let Some(report) = &outcome.report {
        put("report.json", &report.to_json())?;
    }
    if let Some(set) = &outcome.set {
        put("set.txt", &set.to_text())?;
    }
    Ok(SuiteRow {
        experiment: e.name.clone(),
        stats: outcome.stats,
        runtime_ms,
        seed: e.seed,
    })
}

/// Executes the experiments in order, writing artifacts under
/// `out_dir/<name>/` and the CSV to `csv_path`. Experiments that error are
/// recorded and skipped; budget flags are not errors.
pub fn run_suite_config(config: &SuiteConfig, out_dir: &Path, default_samples: usize, csv_path: &Path) -> Result<SuiteReport> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut report = SuiteReport::default();
    for (i, e) in config.experiments.iter().enumerate() {
        match run_experiment(i, e, out_dir, default_samples) {
            Ok(row) => report.rows.push(row),
            Err(err) => report.errors.push((e.name.clone(), format!("{err:#}"))),
        }
    }
    std::fs::write(csv_path, report.to_csv()).with_context(|| format!("writing {}", csv_path.display()))?;
    Ok(report)
}

/// Parses `config_file` (the shipped default suite when `None`) and runs it.
pub fn run_suite(config_file: Option<&Path>, out_dir: &Path, default_samples: usize, csv_path: &Path) -> Result<SuiteReport> {
    let text = match config_file {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => DEFAULT_SUITE.to_string(),
    };
    let config = SuiteConfig::parse(&text)?;
    run_suite_config(&config, out_dir, default_samples, csv_path)
}
