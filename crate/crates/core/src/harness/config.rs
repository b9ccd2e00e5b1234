use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, ScalingFamily, MIN_TRUNCATION};
use crate::mlf::MlQuery;

pub const MAX_PATHS: u64 = 10_000_000;
pub const MAX_GRID: u64 = 1 << 20;
pub const MAX_HORIZON: f64 = 1e6;
pub const MAX_WORKERS: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Limit,
    Convergence,
    RenewalCheck,
    IdentityCheck,
    MlEval,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Simulate,
        ExperimentKind::Limit,
        ExperimentKind::Convergence,
        ExperimentKind::RenewalCheck,
        ExperimentKind::IdentityCheck,
        ExperimentKind::MlEval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Limit => "limit",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::RenewalCheck => "renewal-check",
            ExperimentKind::IdentityCheck => "identity-check",
            ExperimentKind::MlEval => "ml-eval",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
            format!("experiment must be one of {}, got {s:?}", names.join(", "))
        })
    }
}

/// A validated experiment configuration.
///
/// The on-disk form is a flat JSON object with the keys `experiment`,
/// `alpha`, `lambda_rate`, `nu_star`, `T_list`, `n_paths`, `n_grid`,
/// `seed_base`, `output_dir` and `worker_count`. Only `experiment` is
/// required.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub alpha: f64,
    pub lambda_rate: f64,
    pub nu_star: f64,
    #[serde(rename = "T_list")]
    pub t_list: Vec<f64>,
    pub n_paths: usize,
    pub n_grid: usize,
    pub seed_base: u64,
    pub output_dir: PathBuf,
    pub worker_count: usize,
}

impl ExperimentConfig {
    /// Defaults for every optional key.
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            alpha: 0.75,
            lambda_rate: 1.0,
            nu_star: 1.0,
            t_list: vec![1000.0],
            n_paths: 1000,
            n_grid: 2000,
            seed_base: 0,
            output_dir: PathBuf::from("out"),
            worker_count: 1,
        }
    }

    /// Checks every range and returns all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.alpha > 0.5 && self.alpha < 1.0) {
            errs.push(format!("alpha must lie in (0.5, 1), got {}", self.alpha));
        }
        if !(self.lambda_rate > 0.0 && self.lambda_rate.is_finite()) {
            errs.push(format!("lambda_rate must be a positive number, got {}", self.lambda_rate));
        }
        if !(self.nu_star > 0.0 && self.nu_star.is_finite()) {
            errs.push(format!("nu_star must be a positive number, got {}", self.nu_star));
        }
        if self.t_list.is_empty() {
            errs.push("T_list must contain at least one horizon".into());
        }
        let mut seen = Vec::new();
        for &t in &self.t_list {
            if !(t >= MIN_TRUNCATION as f64 && t <= MAX_HORIZON) {
                errs.push(format!("T_list entry {t} must lie in [{MIN_TRUNCATION}, {MAX_HORIZON:e}]"));
            } else if seen.contains(&t) {
                errs.push(format!("T_list entry {t} is repeated"));
            }
            seen.push(t);
        }
        if !(1..=MAX_PATHS).contains(&(self.n_paths as u64)) {
            errs.push(format!("n_paths must lie in [1, {MAX_PATHS}], got {}", self.n_paths));
        }
        if !(crate::limit_sim::MIN_GRID as u64..=MAX_GRID).contains(&(self.n_grid as u64)) {
            errs.push(format!(
                "n_grid must lie in [{}, {MAX_GRID}], got {}",
                crate::limit_sim::MIN_GRID,
                self.n_grid
            ));
        }
        if !(1..=MAX_WORKERS).contains(&(self.worker_count as u64)) {
            errs.push(format!("worker_count must lie in [1, {MAX_WORKERS}], got {}", self.worker_count));
        }
        if self.output_dir.as_os_str().is_empty() {
            errs.push("output_dir must not be empty".into());
        }
        // Horizons must admit a_T in (0, 1) for the kernel at hand.
        if errs.is_empty() {
            let delta = Kernel::power_law(self.alpha, MIN_TRUNCATION)?.delta();
            for &t in &self.t_list {
                if let Err(e) = ScalingFamily::new(self.alpha, delta, t, self.lambda_rate, self.nu_star) {
                    errs.push(format!("T_list entry {t}: {e}"));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Largest horizon, in steps.
    pub fn max_steps(&self) -> usize {
        self.t_list.iter().fold(0.0f64, |m, &t| m.max(t)).floor() as usize
    }
}

const KEYS: [&str; 10] = [
    "experiment",
    "alpha",
    "lambda_rate",
    "nu_star",
    "T_list",
    "n_paths",
    "n_grid",
    "seed_base",
    "output_dir",
    "worker_count",
];

/// Parses and validates a flat JSON configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(vec![format!("malformed JSON: {e}")]))?;
    let Value::Object(map) = value else {
        return Err(Error::Config(vec!["configuration must be a JSON object".into()]));
    };
    from_map(&map, None)
}

/// Like [`parse_config`], with the experiment kind fixed by the caller. A
/// conflicting `experiment` key is an error.
pub fn parse_config_for(text: &str, kind: ExperimentKind) -> Result<ExperimentConfig> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(vec![format!("malformed JSON: {e}")]))?;
    let Value::Object(map) = value else {
        return Err(Error::Config(vec!["configuration must be a JSON object".into()]));
    };
    from_map(&map, Some(kind))
}

fn from_map(map: &Map<String, Value>, fixed: Option<ExperimentKind>) -> Result<ExperimentConfig> {
    let mut errs = Vec::new();
    for key in map.keys() {
        if !KEYS.contains(&key.as_str()) {
            errs.push(format!("unknown key {key:?}"));
        }
    }
    let kind = match (map.get("experiment"), fixed) {
        (None, Some(k)) => Some(k),
        (None, None) => {
            errs.push("missing key \"experiment\"".into());
            None
        }
        (Some(Value::String(s)), fixed) => match s.parse::<ExperimentKind>() {
            Ok(k) if fixed.is_some_and(|f| f != k) => {
                errs.push(format!("experiment {k} conflicts with the requested {}", fixed.unwrap()));
                fixed
            }
            Ok(k) => Some(k),
            Err(e) => {
                errs.push(e);
                fixed
            }
        },
        (Some(_), fixed) => {
            errs.push("experiment must be a string".into());
            fixed
        }
    };
    let mut cfg = ExperimentConfig::new(kind.unwrap_or(ExperimentKind::Simulate));

    let num = |key: &str, errs: &mut Vec<String>| -> Option<f64> {
        let v = map.get(key)?;
        match v.as_f64() {
            Some(x) => Some(x),
            None => {
                errs.push(format!("{key} must be a number"));
                None
            }
        }
    };
    let int = |key: &str, errs: &mut Vec<String>| -> Option<u64> {
        let v = map.get(key)?;
        match v.as_u64() {
            Some(x) => Some(x),
            None => {
                errs.push(format!("{key} must be a non-negative integer"));
                None
            }
        }
    };
    if let Some(x) = num("alpha", &mut errs) {
        cfg.alpha = x;
    }
    if let Some(x) = num("lambda_rate", &mut errs) {
        cfg.lambda_rate = x;
    }
    if let Some(x) = num("nu_star", &mut errs) {
        cfg.nu_star = x;
    }
    if let Some(v) = map.get("T_list") {
        match v.as_array().map(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>()) {
            Some(Some(ts)) => cfg.t_list = ts,
            _ => errs.push("T_list must be an array of numbers".into()),
        }
    }
    if let Some(x) = int("n_paths", &mut errs) {
        cfg.n_paths = usize::try_from(x).unwrap_or(usize::MAX);
    }
    if let Some(x) = int("n_grid", &mut errs) {
        cfg.n_grid = usize::try_from(x).unwrap_or(usize::MAX);
    }
    if let Some(x) = int("seed_base", &mut errs) {
        cfg.seed_base = x;
    }
    if let Some(x) = int("worker_count", &mut errs) {
        cfg.worker_count = usize::try_from(x).unwrap_or(usize::MAX);
    }
    if let Some(v) = map.get("output_dir") {
        match v.as_str() {
            Some(s) => cfg.output_dir = PathBuf::from(s),
            None => errs.push("output_dir must be a string".into()),
        }
    }
    // Range checks run even when there are type errors, so the caller sees
    // every problem at once.
    if let Err(Error::Config(more)) = cfg.validate() {
        errs.extend(more);
    }
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errs))
    }
}

/// Parses `alpha beta z` triples, one per line, separated by whitespace or
/// commas. Blank lines and lines starting with `#` are skipped.
pub fn parse_ml_triples(text: &str) -> Result<Vec<MlQuery>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected 3 fields (alpha beta z), found {}", fields.len()),
            });
        }
        let mut v = [0.0; 3];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("{f:?} is not a number"),
            })?;
        }
        out.push(MlQuery {
            alpha: v[0],
            beta: v[1],
            z: v[2],
        });
    }
    Ok(out)
}
