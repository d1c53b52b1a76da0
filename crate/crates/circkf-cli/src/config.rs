//! Flat `key = value` configuration files with `[section]` headers.
//!
//! Zero-dependency format: `#` starts a comment, blank lines are ignored,
//! unknown sections or keys are rejected with the list of valid keys.
//! Values resolve with precedence: command-line flag > config file >
//! documented default.

use std::collections::BTreeMap;
use std::fmt;

use circkf::circular_filters::GaussAdfVariant;
use circkf::experiments::{BeliefInit, ExperimentConfig, FilterSpec, ModelSpec};
use circkf::models::{AlphaMode, CircularModelParams, LinearModelParams};

#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self { line: Some(line), message: message.into() }
    }

    pub fn plain(message: impl Into<String>) -> Self {
        Self { line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config line {line}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

const MODEL_KEYS: &[&str] = &[
    "kind", "kappa_phi", "kappa_u", "kappa_z", "dt", "obs_stride", "a", "c", "sigma_x2",
    "sigma_u2",
];
const EXPERIMENT_KEYS: &[&str] =
    &["runs", "T", "seed", "filters", "init", "alpha_mode", "frozen_state", "trace_runs"];
const OUTPUT_KEYS: &[&str] = &["dir", "plots"];

/// Raw parsed file: `section -> key -> (line, value)`.
#[derive(Debug, Default, Clone)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, (usize, String)>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut out = Self::default();
        let mut section = String::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = match raw_line.split_once('#') {
                Some((before, _)) => before.trim(),
                None => raw_line.trim(),
            };
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::at(lineno, "unterminated section header"))?
                    .trim()
                    .to_string();
                let valid = match name.as_str() {
                    "model" => MODEL_KEYS,
                    "experiment" => EXPERIMENT_KEYS,
                    "output" => OUTPUT_KEYS,
                    other => {
                        return Err(ConfigError::at(
                            lineno,
                            format!(
                                "unknown section '{other}'; valid sections: model, experiment, output"
                            ),
                        ))
                    }
                };
                let _ = valid;
                section = name;
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::at(lineno, format!("expected 'key = value', got '{line}'"))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if section.is_empty() {
                return Err(ConfigError::at(lineno, "key outside any [section]"));
            }
            let valid = match section.as_str() {
                "model" => MODEL_KEYS,
                "experiment" => EXPERIMENT_KEYS,
                "output" => OUTPUT_KEYS,
                _ => unreachable!("section validated above"),
            };
            if !valid.contains(&key.as_str()) {
                return Err(ConfigError::at(
                    lineno,
                    format!(
                        "unknown key '{key}' in [{section}]; valid keys: {}",
                        valid.join(", ")
                    ),
                ));
            }
            out.sections.entry(section.clone()).or_default().insert(key, (lineno, value));
        }
        Ok(out)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section).and_then(|s| s.get(key)).map(|(_, v)| v.as_str())
    }

    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        self.sections.get(section).and_then(|s| s.get(key)).map(|(l, _)| *l)
    }
}

fn parse_value<T: std::str::FromStr>(
    raw: &RawConfig,
    section: &str,
    key: &str,
    value: &str,
) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError {
        line: raw.line_of(section, key),
        message: format!("bad value for {section}.{key} = '{value}': {e}"),
    })
}

pub fn parse_filters(text: &str) -> Result<Vec<FilterSpec>, ConfigError> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let spec = match part {
            "circkf" => FilterSpec::CircKf,
            "vm" | "vm_increment" => FilterSpec::VmIncrement,
            "gauss_adf" | "gauss_adf:derived" => FilterSpec::GaussAdf(GaussAdfVariant::Derived),
            "gauss_adf:verbatim" => FilterSpec::GaussAdf(GaussAdfVariant::Verbatim),
            "gkbf" => FilterSpec::Gkbf,
            other => {
                if let Some(rest) = other.strip_prefix("pf:") {
                    let n: usize = rest.parse().map_err(|_| {
                        ConfigError::plain(format!("bad particle count in '{other}'"))
                    })?;
                    FilterSpec::Pf { n }
                } else if let Some(rest) = other.strip_prefix("gvm:") {
                    let mut it = rest.split(':');
                    let order: usize = it
                        .next()
                        .unwrap_or_default()
                        .parse()
                        .map_err(|_| ConfigError::plain(format!("bad gvm order in '{other}'")))?;
                    let quad = match it.next() {
                        Some(q) => q.parse().map_err(|_| {
                            ConfigError::plain(format!("bad gvm quadrature in '{other}'"))
                        })?,
                        None => circkf::expfam::DEFAULT_QUAD_POINTS,
                    };
                    if order == 0 || order > 4 {
                        return Err(ConfigError::plain("gvm order must be in 1..=4"));
                    }
                    FilterSpec::Gvm { order, quad_points: quad }
                } else {
                    return Err(ConfigError::plain(format!(
                        "unknown filter '{other}'; valid: circkf, vm_increment, gauss_adf[:verbatim], gkbf, gvm:K[:QUAD], pf:N"
                    )));
                }
            }
        };
        out.push(spec);
    }
    if out.is_empty() {
        return Err(ConfigError::plain("no filters given"));
    }
    Ok(out)
}

pub fn parse_init(text: &str) -> Result<BeliefInit, ConfigError> {
    if text == "uniform" {
        return Ok(BeliefInit::Uniform);
    }
    if let Some(k) = text.strip_prefix("calibrated:") {
        let kappa0: f64 = k
            .parse()
            .map_err(|_| ConfigError::plain(format!("bad kappa0 in init '{text}'")))?;
        return Ok(BeliefInit::Calibrated { kappa0 });
    }
    if let Some(k) = text.strip_prefix("at_truth:") {
        let kappa0: f64 = k
            .parse()
            .map_err(|_| ConfigError::plain(format!("bad kappa0 in init '{text}'")))?;
        return Ok(BeliefInit::AtTruth { kappa0 });
    }
    Err(ConfigError::plain(format!(
        "unknown init '{text}'; valid: calibrated:<kappa0>, at_truth:<kappa0>, uniform"
    )))
}

pub fn parse_alpha_mode(text: &str) -> Result<AlphaMode, ConfigError> {
    match text {
        "ideal" => Ok(AlphaMode::Ideal),
        "sqrt" => Ok(AlphaMode::Sqrt),
        "sqrt-unscaled" => Ok(AlphaMode::SqrtUnscaled),
        "linear" => Ok(AlphaMode::Linear),
        other => Err(ConfigError::plain(format!(
            "unknown alpha mode '{other}'; valid: ideal, sqrt, sqrt-unscaled, linear"
        ))),
    }
}

/// Command-line overrides applied on top of the file values.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub runs: Option<usize>,
    pub t_end: Option<f64>,
    pub seed: Option<u64>,
    pub filters: Option<String>,
    pub init: Option<String>,
    pub alpha_mode: Option<String>,
    pub kappa_phi: Option<f64>,
    pub kappa_u: Option<f64>,
    pub kappa_z: Option<f64>,
    pub dt: Option<f64>,
    pub obs_stride: Option<usize>,
    pub trace_runs: Option<usize>,
}

/// Documented defaults (used when neither flag nor file sets a key).
pub mod defaults {
    pub const KAPPA_PHI: f64 = 1.0;
    pub const KAPPA_U: f64 = 10.0;
    pub const DT: f64 = 0.01;
    pub const OBS_STRIDE: usize = 1;
    pub const RUNS: usize = 100;
    pub const T_END: f64 = 10.0;
    pub const SEED: u64 = 1;
    pub const FILTERS: &str = "circkf";
    pub const INIT: &str = "calibrated:2.0";
    pub const ALPHA_MODE: &str = "ideal";
}

/// Resolves the experiment configuration from file plus overrides.
pub fn resolve_experiment(
    raw: &RawConfig,
    over: &Overrides,
) -> Result<ExperimentConfig, ConfigError> {
    let kind = raw.get("model", "kind").unwrap_or("circular");
    let get_f64 = |section: &str, key: &str, flag: Option<f64>, default: f64| -> Result<f64, ConfigError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match raw.get(section, key) {
            Some(text) => parse_value(raw, section, key, text),
            None => Ok(default),
        }
    };

    let model = match kind {
        "circular" => {
            let kappa_phi =
                get_f64("model", "kappa_phi", over.kappa_phi, defaults::KAPPA_PHI)?;
            let kappa_u = get_f64("model", "kappa_u", over.kappa_u, defaults::KAPPA_U)?;
            let kappa_z = match (over.kappa_z, raw.get("model", "kappa_z")) {
                (Some(v), _) => Some(v),
                (None, Some(text)) => Some(parse_value(raw, "model", "kappa_z", text)?),
                (None, None) => None,
            };
            let dt = get_f64("model", "dt", over.dt, defaults::DT)?;
            let obs_stride = match (over.obs_stride, raw.get("model", "obs_stride")) {
                (Some(v), _) => v,
                (None, Some(text)) => parse_value(raw, "model", "obs_stride", text)?,
                (None, None) => defaults::OBS_STRIDE,
            };
            ModelSpec::Circular(
                CircularModelParams::new(kappa_phi, kappa_u, kappa_z, dt, obs_stride)
                    .map_err(|e| ConfigError::plain(format!("invalid circular model: {e}")))?,
            )
        }
        "linear" => {
            let a = get_f64("model", "a", None, -1.0)?;
            let c = get_f64("model", "c", None, 1.0)?;
            let sigma_x2 = get_f64("model", "sigma_x2", None, 1.0)?;
            let sigma_u2 = get_f64("model", "sigma_u2", None, 1.0)?;
            let dt = get_f64("model", "dt", over.dt, defaults::DT)?;
            ModelSpec::Linear(
                LinearModelParams::new(a, c, sigma_x2, sigma_u2, dt)
                    .map_err(|e| ConfigError::plain(format!("invalid linear model: {e}")))?,
            )
        }
        other => {
            return Err(ConfigError {
                line: raw.line_of("model", "kind"),
                message: format!("unknown model kind '{other}'; valid: circular, linear"),
            })
        }
    };

    let runs = match (over.runs, raw.get("experiment", "runs")) {
        (Some(v), _) => v,
        (None, Some(text)) => parse_value(raw, "experiment", "runs", text)?,
        (None, None) => defaults::RUNS,
    };
    let t_end = get_f64("experiment", "T", over.t_end, defaults::T_END)?;
    let seed = match (over.seed, raw.get("experiment", "seed")) {
        (Some(v), _) => v,
        (None, Some(text)) => parse_value(raw, "experiment", "seed", text)?,
        (None, None) => defaults::SEED,
    };
    let filters_text = over
        .filters
        .clone()
        .or_else(|| raw.get("experiment", "filters").map(str::to_string))
        .unwrap_or_else(|| defaults::FILTERS.to_string());
    let filters = parse_filters(&filters_text)?;
    let init_text = over
        .init
        .clone()
        .or_else(|| raw.get("experiment", "init").map(str::to_string))
        .unwrap_or_else(|| defaults::INIT.to_string());
    let init = parse_init(&init_text)?;
    let mode_text = over
        .alpha_mode
        .clone()
        .or_else(|| raw.get("experiment", "alpha_mode").map(str::to_string))
        .unwrap_or_else(|| defaults::ALPHA_MODE.to_string());
    let alpha_mode = parse_alpha_mode(&mode_text)?;
    let frozen_state = match raw.get("experiment", "frozen_state") {
        Some(text) => parse_value(raw, "experiment", "frozen_state", text)?,
        None => false,
    };
    let trace_runs = match (over.trace_runs, raw.get("experiment", "trace_runs")) {
        (Some(v), _) => v,
        (None, Some(text)) => parse_value(raw, "experiment", "trace_runs", text)?,
        (None, None) => 0,
    };

    Ok(ExperimentConfig {
        model,
        filters,
        runs,
        t_end,
        seed,
        init,
        alpha_mode,
        frozen_state,
        trace_runs,
    })
}

/// The fully resolved config as header key/values for output files.
pub fn echo_config(cfg: &ExperimentConfig) -> Vec<(&'static str, String)> {
    let mut kvs: Vec<(&'static str, String)> = Vec::new();
    match &cfg.model {
        ModelSpec::Circular(p) => {
            kvs.push(("kind", "circular".into()));
            kvs.push(("kappa_phi", p.kappa_phi().to_string()));
            kvs.push(("kappa_u", p.kappa_u().to_string()));
            if let Some(kz) = p.kappa_z() {
                kvs.push(("kappa_z", kz.to_string()));
            }
            kvs.push(("dt", p.dt().to_string()));
            kvs.push(("obs_stride", p.obs_stride().to_string()));
        }
        ModelSpec::Linear(p) => {
            kvs.push(("kind", "linear".into()));
            kvs.push(("a", p.a.to_string()));
            kvs.push(("c", p.c.to_string()));
            kvs.push(("sigma_x2", p.sigma_x2.to_string()));
            kvs.push(("sigma_u2", p.sigma_u2.to_string()));
            kvs.push(("dt", p.dt.to_string()));
        }
    }
    kvs.push((
        "filters",
        cfg.filters.iter().map(|f| f.name()).collect::<Vec<_>>().join(","),
    ));
    kvs.push(("runs", cfg.runs.to_string()));
    kvs.push(("T", cfg.t_end.to_string()));
    kvs.push(("seed", cfg.seed.to_string()));
    kvs.push((
        "init",
        match cfg.init {
            BeliefInit::Calibrated { kappa0 } => format!("calibrated:{kappa0}"),
            BeliefInit::AtTruth { kappa0 } => format!("at_truth:{kappa0}"),
            BeliefInit::Uniform => "uniform".into(),
        },
    ));
    kvs.push(("alpha_mode", cfg.alpha_mode.name().into()));
    kvs.push(("frozen_state", cfg.frozen_state.to_string()));
    kvs.push(("trace_runs", cfg.trace_runs.to_string()));
    kvs
}
