//! Flat `key = value` experiment files.
//!
//! Keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `name` | label used for output files |
//! | `problem` | `quadratic` or `logistic` |
//! | `d`, `n`, `o`, `problem_seed`, `noise` | quadratic size, workers, inner terms, seed, shift scale |
//! | `data` | LibSVM path, or `surrogate:a1a[:seed]` |
//! | `l2`, `layout`, `shard_seed` | logistic penalty, `shared`/`distributed`, shard seed |
//! | `reg` | `none`, `l1:w` or `squared_l2:w` |
//! | `method`, `tau`, `workers`, `blocks`, `stepsize`, `batch`, `rho_hat`, `delays`, `lyapunov` | per-run settings, comma lists |
//! | `rounds`, `seeds`, `seed`, `x0` | run length, seed count, first seed, `zeros` or a constant |
//!
//! Per-run lists are broadcast: a single value applies to every run, other
//! lists must have as many entries as the longest one. Keys starting with
//! `derived.` are informational and ignored on read.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::methods::{parse_number, MethodConfig, MethodKind, StepsizeRule};
use crate::problems::{Problem, StochasticSpec};
use crate::prox::Regularizer;
use crate::simulator::DelaySchedule;

use super::{a1a_surrogate, parse_libsvm, SparseDataset};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("key `{key}`: bad value `{value}`: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("key `{key}` lists {len} values but the runs need {expected}")]
    ListLength {
        key: &'static str,
        len: usize,
        expected: usize,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File(PathBuf),
    A1aSurrogate { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataLayout {
    /// One data set seen by every worker.
    Shared,
    /// Rows split evenly across the workers.
    Distributed,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Quadratic {
        d: usize,
        n: usize,
        o: usize,
        seed: u64,
        noise: f64,
    },
    Logistic {
        source: DataSource,
        l2: f64,
        layout: DataLayout,
        shard_seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartPoint {
    Zeros,
    Constant(f64),
}

impl StartPoint {
    pub fn vector(&self, d: usize) -> Vec<f64> {
        match *self {
            Self::Zeros => vec![0.0; d],
            Self::Constant(v) => vec![v; d],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: ProblemSpec,
    pub reg: Regularizer,
    pub methods: Vec<MethodConfig>,
    pub rounds: u64,
    pub seeds: usize,
    pub base_seed: u64,
    pub x0: StartPoint,
}

pub const DEFAULT_L2: f64 = 0.00025;

const KEYS: &[&str] = &[
    "name", "problem", "d", "n", "o", "problem_seed", "noise", "data", "l2", "layout", "shard_seed",
    "reg", "method", "tau", "workers", "blocks", "stepsize", "batch", "rho_hat", "delays", "lyapunov",
    "rounds", "seeds", "seed", "x0",
];

pub fn read_experiment_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_experiment_config(&text)
}

struct Entries(Vec<(String, String)>);

impl Entries {
    fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn bad(key: &str, value: &str, reason: impl ToString) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn parse_as<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| bad(key, value, e))
}

fn scalar<T: std::str::FromStr>(e: &Entries, key: &str, default: T) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    e.get(key).map_or(Ok(default), |v| parse_as(key, v))
}

fn optional_number(key: &str, v: &str) -> Result<Option<f64>, ConfigError> {
    if v.trim() == "none" {
        return Ok(None);
    }
    parse_number(v).map(Some).ok_or_else(|| bad(key, v, "not a number"))
}

pub fn parse_experiment_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            text: raw.to_string(),
        })?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if k.starts_with("derived.") {
            continue;
        }
        if !KEYS.contains(&k.as_str()) {
            return Err(ConfigError::UnknownKey { line: i + 1, key: k });
        }
        if entries.iter().any(|(e, _): &(String, String)| *e == k) {
            return Err(ConfigError::DuplicateKey { line: i + 1, key: k });
        }
        entries.push((k, v));
    }
    let e = Entries(entries);

    let methods_raw = e.get("method").ok_or(ConfigError::MissingKey("method"))?;
    let kinds: Vec<MethodKind> = methods_raw
        .split(',')
        .map(|s| parse_as("method", s))
        .collect::<Result<_, _>>()?;
    let runs = [
        "tau", "workers", "blocks", "stepsize", "batch", "rho_hat", "delays", "lyapunov",
    ]
    .iter()
    .filter_map(|k| e.get(k).map(|v| v.split(',').count()))
    .chain([kinds.len()])
    .max()
    .unwrap_or(1);
    let list = |key: &'static str| -> Result<Option<Vec<String>>, ConfigError> {
        let Some(v) = e.get(key) else { return Ok(None) };
        let items: Vec<String> = v.split(',').map(|s| s.trim().to_string()).collect();
        match items.len() {
            1 => Ok(Some(vec![items[0].clone(); runs])),
            l if l == runs => Ok(Some(items)),
            l => Err(ConfigError::ListLength {
                key,
                len: l,
                expected: runs,
            }),
        }
    };
    let kinds = match kinds.len() {
        1 => vec![kinds[0]; runs],
        l if l == runs => kinds,
        l => {
            return Err(ConfigError::ListLength {
                key: "method",
                len: l,
                expected: runs,
            })
        }
    };

    let mut methods: Vec<MethodConfig> = kinds.into_iter().map(MethodConfig::new).collect();
    if let Some(v) = list("tau")? {
        for (m, s) in methods.iter_mut().zip(&v) {
            m.tau = parse_number(s).ok_or_else(|| bad("tau", s, "not a number"))?;
        }
    }
    if let Some(v) = list("workers")? {
        for (m, s) in methods.iter_mut().zip(&v) {
            m.n_workers = parse_as("workers", s)?;
        }
    }
    if let Some(v) = list("blocks")? {
        for (m, s) in methods.iter_mut().zip(&v) {
            m.blocks = parse_as("blocks", s)?;
        }
    }
    if let Some(v) = list("stepsize")? {
        for (m, s) in methods.iter_mut().zip(&v) {
            m.stepsize = parse_as::<StepsizeRule>("stepsize", s)?;
        }
    }
    if let Some(v) = list("batch")? {
        for (m, s) in methods.iter_mut().zip(&v) {
            m.stochastic = if s == "none" {
                None
            } else {
                Some(StochasticSpec {
                    batch: parse_as("batch", s)?,
                })
            };
        }
    }
    if let Some(v) = list("rho_hat")? {
        for (m, s) in methods.iter_mut().zip(&v) {
            m.rho_hat = optional_number("rho_hat", s)?;
        }
    }
    if let Some(v) = list("delays")? {
        for (m, s) in methods.iter_mut().zip(&v) {
            m.delays = parse_as::<DelaySchedule>("delays", s)?;
        }
    }
    if let Some(v) = list("lyapunov")? {
        for (m, s) in methods.iter_mut().zip(&v) {
            m.record_lyapunov = parse_as("lyapunov", s)?;
        }
    }

    let problem_kind = e.get("problem").ok_or(ConfigError::MissingKey("problem"))?;
    let problem = match problem_kind {
        "quadratic" | "quad" => ProblemSpec::Quadratic {
            d: e.get("d").map_or(Err(ConfigError::MissingKey("d")), |v| parse_as("d", v))?,
            n: e.get("n").map_or(Err(ConfigError::MissingKey("n")), |v| parse_as("n", v))?,
            o: scalar(&e, "o", 10)?,
            seed: scalar(&e, "problem_seed", 0)?,
            noise: scalar(&e, "noise", 0.0)?,
        },
        "logistic" => {
            let data = e.get("data").ok_or(ConfigError::MissingKey("data"))?;
            let source = if let Some(rest) = data.strip_prefix("surrogate:a1a") {
                let seed = match rest.strip_prefix(':') {
                    Some(s) => parse_as("data", s)?,
                    None if rest.is_empty() => 0,
                    None => return Err(bad("data", data, "expected surrogate:a1a[:seed]")),
                };
                DataSource::A1aSurrogate { seed }
            } else {
                DataSource::File(PathBuf::from(data))
            };
            let layout = match e.get("layout").unwrap_or("distributed") {
                "shared" => DataLayout::Shared,
                "distributed" => DataLayout::Distributed,
                other => return Err(bad("layout", other, "expected shared or distributed")),
            };
            ProblemSpec::Logistic {
                source,
                l2: scalar(&e, "l2", DEFAULT_L2)?,
                layout,
                shard_seed: scalar(&e, "shard_seed", 0)?,
            }
        }
        other => return Err(bad("problem", other, "expected quadratic or logistic")),
    };

    let reg = match e.get("reg") {
        None | Some("none") | Some("zero") => Regularizer::Zero,
        Some(v) => {
            let (kind, w) = v.split_once(':').ok_or_else(|| bad("reg", v, "expected kind:weight"))?;
            let w: f64 = parse_as("reg", w)?;
            Regularizer::new(kind.trim(), w).map_err(|err| bad("reg", v, err))?
        }
    };
    let x0 = match e.get("x0") {
        None | Some("zeros") => StartPoint::Zeros,
        Some(v) => StartPoint::Constant(parse_as("x0", v)?),
    };
    let rounds: u64 = scalar(&e, "rounds", 1000)?;
    if rounds == 0 {
        return Err(bad("rounds", "0", "must be at least 1"));
    }
    let seeds: usize = scalar(&e, "seeds", 1)?;
    if seeds == 0 {
        return Err(bad("seeds", "0", "must be at least 1"));
    }
    Ok(ExperimentConfig {
        name: e.get("name").unwrap_or("experiment").to_string(),
        problem,
        reg,
        methods,
        rounds,
        seeds,
        base_seed: scalar(&e, "seed", 0)?,
        x0,
    })
}

fn join<I: IntoIterator<Item = String>>(it: I) -> String {
    it.into_iter().collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Canonical text that parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        match &self.problem {
            ProblemSpec::Quadratic { d, n, o, seed, noise } => {
                let _ = writeln!(s, "problem = quadratic");
                let _ = writeln!(s, "d = {d}\nn = {n}\no = {o}\nproblem_seed = {seed}\nnoise = {noise:?}");
            }
            ProblemSpec::Logistic {
                source,
                l2,
                layout,
                shard_seed,
            } => {
                let _ = writeln!(s, "problem = logistic");
                match source {
                    DataSource::File(p) => {
                        let _ = writeln!(s, "data = {}", p.display());
                    }
                    DataSource::A1aSurrogate { seed } => {
                        let _ = writeln!(s, "data = surrogate:a1a:{seed}");
                    }
                }
                let layout = match layout {
                    DataLayout::Shared => "shared",
                    DataLayout::Distributed => "distributed",
                };
                let _ = writeln!(s, "l2 = {l2:?}\nlayout = {layout}\nshard_seed = {shard_seed}");
            }
        }
        let reg = match self.reg {
            Regularizer::Zero => "none".to_string(),
            r => format!("{}:{:?}", r.kind_name(), r.weight()),
        };
        let _ = writeln!(s, "reg = {reg}");
        let m = &self.methods;
        let _ = writeln!(s, "method = {}", join(m.iter().map(|c| c.kind.to_string())));
        let _ = writeln!(s, "tau = {}", join(m.iter().map(|c| format!("{:?}", c.tau))));
        let _ = writeln!(s, "workers = {}", join(m.iter().map(|c| c.n_workers.to_string())));
        let _ = writeln!(s, "blocks = {}", join(m.iter().map(|c| c.blocks.to_string())));
        let _ = writeln!(s, "stepsize = {}", join(m.iter().map(|c| c.stepsize.to_string())));
        let _ = writeln!(
            s,
            "batch = {}",
            join(m.iter().map(|c| c.stochastic.map_or("none".into(), |b| b.batch.to_string())))
        );
        let _ = writeln!(
            s,
            "rho_hat = {}",
            join(m.iter().map(|c| c.rho_hat.map_or("none".into(), |r| format!("{r:?}"))))
        );
        let _ = writeln!(s, "delays = {}", join(m.iter().map(|c| c.delays.to_string())));
        let _ = writeln!(s, "lyapunov = {}", join(m.iter().map(|c| c.record_lyapunov.to_string())));
        let x0 = match self.x0 {
            StartPoint::Zeros => "zeros".to_string(),
            StartPoint::Constant(v) => format!("{v:?}"),
        };
        let _ = writeln!(
            s,
            "rounds = {}\nseeds = {}\nseed = {}\nx0 = {x0}",
            self.rounds, self.seeds, self.base_seed
        );
        s
    }

    /// Loads the data set of a logistic plan (rows normalised).
    pub fn load_dataset(&self) -> crate::Result<Option<SparseDataset>> {
        let ProblemSpec::Logistic { source, .. } = &self.problem else {
            return Ok(None);
        };
        let ds = match source {
            DataSource::A1aSurrogate { seed } => a1a_surrogate(*seed),
            DataSource::File(p) => {
                let f = std::fs::File::open(p)?;
                parse_libsvm(std::io::BufReader::new(f))?.normalize_rows()?
            }
        };
        Ok(Some(ds))
    }

    /// Problem instance seen by `cfg`; distributed logistic plans shard the
    /// rows across `cfg.n_workers` workers.
    pub fn problem_for(&self, cfg: &MethodConfig, ds: Option<&SparseDataset>) -> crate::Result<Problem<f64>> {
        let p = match &self.problem {
            ProblemSpec::Quadratic { d, n, o, seed, noise } => {
                Problem::quadratic_synthesize_noisy(*d, *n, *o, *seed, *noise)?
            }
            ProblemSpec::Logistic {
                l2,
                layout,
                shard_seed,
                ..
            } => {
                let ds = ds.ok_or_else(|| crate::Error::InvalidParameter("logistic plan needs its data set".into()))?;
                let shared = *layout == DataLayout::Shared || cfg.kind.uses_shared_data();
                if shared {
                    Problem::logreg_build(ds, *l2)?
                } else {
                    Problem::logreg_distributed(ds, cfg.n_workers.max(1), *shard_seed, *l2)?
                }
            }
        };
        if self.reg.is_zero() {
            Ok(p)
        } else {
            p.with_regularizer(self.reg)
        }
    }
}
