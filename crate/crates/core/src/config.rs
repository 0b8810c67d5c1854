//! Suite configuration files.
//!
//! The format is line oriented. Blank lines and lines starting with `#` are
//! ignored. Top-level `key = value` lines set suite options (`seed`,
//! `format`, `output`); each `[experiment.<name>]` header opens one
//! two-sensor experiment whose keys are:
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `rho` | 0 | correlation between the two sensors |
//! | `sigma1`, `sigma2` | required | standard deviations |
//! | `mu1`, `mu2` | 0 | means |
//! | `attack_type` | required | `A`, `B` or `C` |
//! | `am` | required | attack magnitude |
//! | `sigma_a` | | type B only, required there |
//! | `um` | | type C only, required there |
//! | `targets` | 1 | comma-separated 1-based sensor list |
//! | `sensor_under_test` | 1 | 1-based |
//! | `trials` | 100000 | Monte Carlo runs |
//! | `attack_prior` | 0.5 | probability a trial is attacked |
//! | `threshold_mode` | `exact-sort` | or `grid` |
//! | `grid_lo`, `grid_hi`, `grid_steps` | | grid mode only, all required there |

use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::attack::{AttackKind, AttackSpec};
use crate::coalition::Coalition;
use crate::gaussian::GaussianModel;
use crate::harness::{ExperimentConfig, ThresholdMode, DEFAULT_ATTACK_PRIOR};

pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("experiment `{experiment}`: field `{field}`: {message}")]
    Validation {
        experiment: String,
        field: String,
        message: String,
    },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    fn invalid(experiment: &str, field: &str, message: impl Into<String>) -> Self {
        ConfigError::Validation {
            experiment: experiment.to_owned(),
            field: field.to_owned(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Markdown,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            other => Err(format!("unknown output format {other:?}")),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Markdown => "markdown",
        })
    }
}

/// Parameters of one two-sensor experiment, as written in a config file.
/// Sensor indices are 1-based here.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentParams {
    pub rho: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub attack_type: AttackKind,
    pub am: f64,
    pub sigma_a: Option<f64>,
    pub um: Option<f64>,
    pub targets: Vec<usize>,
    pub sensor_under_test: usize,
    pub trials: u64,
    pub attack_prior: f64,
    pub threshold_mode: ThresholdMode,
}

impl ExperimentParams {
    /// Defaults for everything but the required keys.
    pub fn new(sigma1: f64, sigma2: f64, attack_type: AttackKind, am: f64) -> Self {
        Self {
            rho: 0.0,
            sigma1,
            sigma2,
            mu1: 0.0,
            mu2: 0.0,
            attack_type,
            am,
            sigma_a: None,
            um: None,
            targets: vec![1],
            sensor_under_test: 1,
            trials: DEFAULT_TRIALS,
            attack_prior: DEFAULT_ATTACK_PRIOR,
            threshold_mode: ThresholdMode::ExactSort,
        }
    }

    /// Builds the harness config, checking every constraint.
    pub fn to_experiment(&self, name: &str, seed: u64) -> Result<ExperimentConfig, ConfigError> {
        let err = |field: &str, msg: &str| ConfigError::invalid(name, field, msg);
        if !(self.rho.is_finite() && self.rho.abs() < 1.0) {
            return Err(err("rho", "correlation out of range"));
        }
        for (field, s) in [("sigma1", self.sigma1), ("sigma2", self.sigma2)] {
            if !(s.is_finite() && s > 0.0) {
                return Err(err(field, "standard deviation must be positive"));
            }
        }
        for (field, m) in [("mu1", self.mu1), ("mu2", self.mu2)] {
            if !m.is_finite() {
                return Err(err(field, "mean must be finite"));
            }
        }
        if self.trials == 0 {
            return Err(err("trials", "must be at least 1"));
        }
        if !(self.attack_prior > 0.0 && self.attack_prior < 1.0) {
            return Err(err("attack_prior", "must lie strictly between 0 and 1"));
        }
        if !(1..=2).contains(&self.sensor_under_test) {
            return Err(err("sensor_under_test", "must be 1 or 2"));
        }
        if self.targets.is_empty() || self.targets.iter().any(|t| !(1..=2).contains(t)) {
            return Err(err("targets", "must list sensors 1 and/or 2"));
        }
        match (self.attack_type, self.sigma_a, self.um) {
            (AttackKind::B, None, _) => return Err(err("sigma_a", "required for attack_type B")),
            (AttackKind::C, _, None) => return Err(err("um", "required for attack_type C")),
            (AttackKind::A | AttackKind::C, Some(_), _) => {
                return Err(err("sigma_a", "only allowed for attack_type B"))
            }
            (AttackKind::A | AttackKind::B, _, Some(_)) => {
                return Err(err("um", "only allowed for attack_type C"))
            }
            _ => {}
        }
        if let ThresholdMode::Grid { lo, hi, steps } = self.threshold_mode {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(err("grid_lo", "grid needs finite grid_lo < grid_hi"));
            }
            if steps < 2 {
                return Err(err("grid_steps", "must be at least 2"));
            }
        }

        let model =
            GaussianModel::bivariate(self.mu1, self.mu2, self.sigma1, self.sigma2, self.rho)
                .map_err(|e| err("rho", &e.to_string()))?;
        let targets = Coalition::from_indices(self.targets.iter().map(|t| t - 1), 2)
            .map_err(|e| err("targets", &e.to_string()))?;
        let attack = AttackSpec::new(self.attack_type, self.am, self.sigma_a, self.um, targets)
            .map_err(|e| {
                let field = match self.attack_type {
                    AttackKind::B => "sigma_a",
                    AttackKind::C => "um",
                    AttackKind::A => "am",
                };
                err(
                    if self.am.is_finite() { field } else { "am" },
                    &e.to_string(),
                )
            })?;
        let config = ExperimentConfig {
            model,
            attack,
            sensor_under_test: self.sensor_under_test - 1,
            trials: self.trials,
            attack_prior: self.attack_prior,
            seed,
            threshold_mode: self.threshold_mode,
        };
        config
            .validate()
            .map_err(|e| err("experiment", &e.to_string()))?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedExperiment {
    pub name: String,
    pub params: ExperimentParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub format: OutputFormat,
    pub output: Option<PathBuf>,
    pub experiments: Vec<NamedExperiment>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            format: OutputFormat::Csv,
            output: None,
            experiments: Vec::new(),
        }
    }
}

impl SuiteConfig {
    /// Checks name uniqueness and every experiment's constraints.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut seen = HashSet::new();
        for e in &self.experiments {
            if !seen.insert(e.name.as_str()) {
                return Err(ConfigError::invalid(
                    &e.name,
                    "name",
                    "duplicate experiment name",
                ));
            }
            e.params.to_experiment(&e.name, self.seed)?;
        }
        Ok(())
    }

    /// Serializes to the config format. Parsing the result gives back an
    /// equal `SuiteConfig`.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "format = {}", self.format);
        if let Some(out) = &self.output {
            let _ = writeln!(s, "output = {}", out.display());
        }
        for e in &self.experiments {
            let p = &e.params;
            let _ = writeln!(s, "\n[experiment.{}]", e.name);
            let _ = writeln!(s, "rho = {:?}", p.rho);
            let _ = writeln!(s, "sigma1 = {:?}", p.sigma1);
            let _ = writeln!(s, "sigma2 = {:?}", p.sigma2);
            let _ = writeln!(s, "mu1 = {:?}", p.mu1);
            let _ = writeln!(s, "mu2 = {:?}", p.mu2);
            let _ = writeln!(s, "attack_type = {}", p.attack_type);
            let _ = writeln!(s, "am = {:?}", p.am);
            if let Some(v) = p.sigma_a {
                let _ = writeln!(s, "sigma_a = {v:?}");
            }
            if let Some(v) = p.um {
                let _ = writeln!(s, "um = {v:?}");
            }
            let targets: Vec<String> = p.targets.iter().map(|t| t.to_string()).collect();
            let _ = writeln!(s, "targets = {}", targets.join(","));
            let _ = writeln!(s, "sensor_under_test = {}", p.sensor_under_test);
            let _ = writeln!(s, "trials = {}", p.trials);
            let _ = writeln!(s, "attack_prior = {:?}", p.attack_prior);
            match p.threshold_mode {
                ThresholdMode::ExactSort => {
                    let _ = writeln!(s, "threshold_mode = exact-sort");
                }
                ThresholdMode::Grid { lo, hi, steps } => {
                    let _ = writeln!(s, "threshold_mode = grid");
                    let _ = writeln!(s, "grid_lo = {lo:?}");
                    let _ = writeln!(s, "grid_hi = {hi:?}");
                    let _ = writeln!(s, "grid_steps = {steps}");
                }
            }
        }
        s
    }
}

pub fn parse_config(path: &Path) -> Result<SuiteConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_config_str(&text)
}

/// Keys collected for one experiment section, with their line numbers.
#[derive(Default)]
struct Section {
    name: String,
    line: usize,
    entries: Vec<(String, String, usize)>,
}

pub fn parse_config_str(text: &str) -> Result<SuiteConfig, ConfigError> {
    let mut suite = SuiteConfig::default();
    let mut sections: Vec<Section> = Vec::new();
    let mut top_seen = HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| ConfigError::Parse {
            line: line_no,
            message,
        };
        if let Some(header) = line.strip_prefix('[') {
            let inner = header
                .strip_suffix(']')
                .ok_or_else(|| parse_err("unterminated section header".into()))?
                .trim();
            let name = inner.strip_prefix("experiment.").ok_or_else(|| {
                parse_err(format!(
                    "unknown section [{inner}], expected [experiment.<name>]"
                ))
            })?;
            if name.is_empty()
                || !name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(parse_err(format!(
                    "experiment name {name:?} must be nonempty and use only letters, digits, '_' or '-'"
                )));
            }
            sections.push(Section {
                name: name.to_owned(),
                line: line_no,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected `key = value`, got {line:?}")))?;
        let (key, value) = (key.trim(), strip_comment(value).trim());
        if key.is_empty() {
            return Err(parse_err("missing key".into()));
        }
        if value.is_empty() {
            return Err(parse_err(format!("missing value for `{key}`")));
        }
        match sections.last_mut() {
            Some(section) => {
                if section.entries.iter().any(|(k, _, _)| k == key) {
                    return Err(parse_err(format!("duplicate key `{key}`")));
                }
                section
                    .entries
                    .push((key.to_owned(), value.to_owned(), line_no));
            }
            None => {
                if !top_seen.insert(key.to_owned()) {
                    return Err(parse_err(format!("duplicate key `{key}`")));
                }
                match key {
                    "seed" => {
                        suite.seed = value.parse().map_err(|_| {
                            parse_err(format!("seed {value:?} is not an unsigned integer"))
                        })?
                    }
                    "format" => suite.format = value.parse().map_err(parse_err)?,
                    "output" => suite.output = Some(PathBuf::from(value)),
                    other => return Err(parse_err(format!("unknown top-level key `{other}`"))),
                }
            }
        }
    }

    let mut names = HashSet::new();
    for section in sections {
        if !names.insert(section.name.clone()) {
            return Err(ConfigError::Parse {
                line: section.line,
                message: format!("duplicate experiment name `{}`", section.name),
            });
        }
        let params = section_params(&section)?;
        params.to_experiment(&section.name, suite.seed)?;
        suite.experiments.push(NamedExperiment {
            name: section.name,
            params,
        });
    }
    Ok(suite)
}

fn strip_comment(value: &str) -> &str {
    value.split_once(" #").map_or(value, |(v, _)| v)
}

fn section_params(section: &Section) -> Result<ExperimentParams, ConfigError> {
    let name = section.name.as_str();
    let get = |key: &str| section.entries.iter().find(|(k, _, _)| k == key);
    let missing = |key: &str| ConfigError::invalid(name, key, "missing required key");

    fn num<T: FromStr>(entry: &(String, String, usize), what: &str) -> Result<T, ConfigError> {
        entry.1.parse().map_err(|_| ConfigError::Parse {
            line: entry.2,
            message: format!("`{}`: {:?} is not {what}", entry.0, entry.1),
        })
    }
    let real = |key: &str| get(key).map(|e| num::<f64>(e, "a number")).transpose();
    let uint = |key: &str| {
        get(key)
            .map(|e| num::<u64>(e, "an unsigned integer"))
            .transpose()
    };

    const KNOWN: &[&str] = &[
        "rho",
        "sigma1",
        "sigma2",
        "mu1",
        "mu2",
        "attack_type",
        "am",
        "sigma_a",
        "um",
        "targets",
        "sensor_under_test",
        "trials",
        "attack_prior",
        "threshold_mode",
        "grid_lo",
        "grid_hi",
        "grid_steps",
    ];
    if let Some((key, _, line)) = section
        .entries
        .iter()
        .find(|(k, _, _)| !KNOWN.contains(&k.as_str()))
    {
        return Err(ConfigError::Parse {
            line: *line,
            message: format!("unknown key `{key}`"),
        });
    }

    // Syntax errors are reported by line before any missing-key errors.
    for entry in &section.entries {
        match entry.0.as_str() {
            "sensor_under_test" | "trials" | "grid_steps" => {
                num::<u64>(entry, "an unsigned integer")?;
            }
            "attack_type" | "targets" | "threshold_mode" => {}
            _ => {
                num::<f64>(entry, "a number")?;
            }
        }
    }

    let attack_entry = get("attack_type").ok_or_else(|| missing("attack_type"))?;
    let attack_type: AttackKind = attack_entry.1.parse().map_err(|_| ConfigError::Parse {
        line: attack_entry.2,
        message: format!("attack_type {:?} must be A, B or C", attack_entry.1),
    })?;
    let sigma1 = real("sigma1")?.ok_or_else(|| missing("sigma1"))?;
    let sigma2 = real("sigma2")?.ok_or_else(|| missing("sigma2"))?;
    let am = real("am")?.ok_or_else(|| missing("am"))?;
    let mut p = ExperimentParams::new(sigma1, sigma2, attack_type, am);

    if let Some(v) = real("rho")? {
        p.rho = v;
    }
    if let Some(v) = real("mu1")? {
        p.mu1 = v;
    }
    if let Some(v) = real("mu2")? {
        p.mu2 = v;
    }
    p.sigma_a = real("sigma_a")?;
    p.um = real("um")?;
    if let Some(e) = get("targets") {
        p.targets =
            e.1.split(',')
                .map(|t| {
                    t.trim().parse::<usize>().map_err(|_| ConfigError::Parse {
                        line: e.2,
                        message: format!("targets: {t:?} is not a sensor number"),
                    })
                })
                .collect::<Result<_, _>>()?;
    }
    if let Some(v) = uint("sensor_under_test")? {
        p.sensor_under_test = v as usize;
    }
    if let Some(v) = uint("trials")? {
        p.trials = v;
    }
    if let Some(v) = real("attack_prior")? {
        p.attack_prior = v;
    }

    let grid_keys = ["grid_lo", "grid_hi", "grid_steps"];
    let mode = get("threshold_mode").map(|e| (e.1.as_str(), e.2));
    p.threshold_mode = match mode {
        None | Some(("exact-sort", _)) => {
            if let Some(k) = grid_keys.iter().find(|k| get(k).is_some()) {
                return Err(ConfigError::invalid(
                    name,
                    k,
                    "only allowed with threshold_mode = grid",
                ));
            }
            ThresholdMode::ExactSort
        }
        Some(("grid", _)) => ThresholdMode::Grid {
            lo: real("grid_lo")?.ok_or_else(|| missing("grid_lo"))?,
            hi: real("grid_hi")?.ok_or_else(|| missing("grid_hi"))?,
            steps: uint("grid_steps")?.ok_or_else(|| missing("grid_steps"))? as usize,
        },
        Some((other, line)) => {
            return Err(ConfigError::Parse {
                line,
                message: format!("threshold_mode {other:?} must be exact-sort or grid"),
            })
        }
    };
    Ok(p)
}

/// Twelve experiments: sigma in {1, 1.5, 2} for each of four attacks on
/// independent sensors.
pub fn table1_preset(trials: u64, seed: u64) -> SuiteConfig {
    type Attack = (&'static str, AttackKind, f64, Option<f64>, Option<f64>);
    let attacks: [Attack; 4] = [
        ("a", AttackKind::A, 10.0, None, None),
        ("b01", AttackKind::B, 10.0, Some(0.1), None),
        ("b1", AttackKind::B, 10.0, Some(1.0), None),
        ("c", AttackKind::C, 9.95, None, Some(0.1)),
    ];
    let mut experiments = Vec::new();
    for (tag, kind, am, sigma_a, um) in attacks {
        for (stag, sigma) in [("1", 1.0), ("1.5", 1.5), ("2", 2.0)] {
            let mut p = ExperimentParams::new(sigma, sigma, kind, am);
            p.sigma_a = sigma_a;
            p.um = um;
            p.trials = trials;
            experiments.push(NamedExperiment {
                name: format!("t1_{tag}_s{}", stag.replace('.', "_")),
                params: p,
            });
        }
    }
    SuiteConfig {
        seed,
        experiments,
        ..SuiteConfig::default()
    }
}

/// Six experiments: correlated sensors with sigma = 2, type-A attack of
/// magnitude 1.
pub fn table2_preset(trials: u64, seed: u64) -> SuiteConfig {
    let experiments = [0.2, -0.2, 0.5, -0.5, 0.8, -0.8]
        .into_iter()
        .map(|rho: f64| {
            let mut p = ExperimentParams::new(2.0, 2.0, AttackKind::A, 1.0);
            p.rho = rho;
            p.trials = trials;
            let sign = if rho < 0.0 { "m" } else { "p" };
            NamedExperiment {
                name: format!("t2_rho_{sign}{}", (rho.abs() * 10.0).round() as u32),
                params: p,
            }
        })
        .collect();
    SuiteConfig {
        seed,
        experiments,
        ..SuiteConfig::default()
    }
}
