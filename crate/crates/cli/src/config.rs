//! Run configuration: a TOML file with one table per concern.
//!
//! ```toml
//! [model]
//! beta = 0.5
//! rho = -0.3
//! nu = 1.0
//! x0 = 1.0
//! y0 = 0.2
//!
//! [payoff]
//! kind = "put"        # put | call | mass-zero-put | identity
//! strike = 1.0
//!
//! [discretization]
//! l_x = 6
//! l_y = 6
//! mu = "auto"         # or a number in the admissible range
//! # r_x, r_y default to the pricing domain of the engine
//!
//! [time]
//! horizon = 10.0
//! theta = 0.5
//! steps = 200
//! ```
//!
//! Every table and key is optional; omitted values fall back to the
//! `paper-exp1` preset. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sabr_fem::{DiscretizationSpec, Payoff, SabrParams, ThetaConfig, WeightExponent};

#[derive(Debug)]
pub enum ConfigError {
    Io { path: PathBuf, source: std::io::Error },
    Parse { line: usize, message: String },
    Invalid { key: String, reason: String },
    UnknownPreset(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, source } => write!(f, "cannot read {}: {source}", path.display()),
            ConfigError::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            ConfigError::Invalid { key, reason } => write!(f, "invalid value for `{key}`: {reason}"),
            ConfigError::UnknownPreset(name) => {
                write!(f, "unknown preset `{name}` (expected one of {})", PRESETS.join(", "))
            }
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), reason: reason.into() }
}

/// Re-labels an engine error with the config key it came from.
fn from_engine(section: &str, err: sabr_fem::Error) -> ConfigError {
    match err {
        sabr_fem::Error::Validation { field, reason } => invalid(&format!("{section}.{field}"), reason),
        sabr_fem::Error::IllPosed { product } => {
            invalid(&format!("{section}.rho"), format!("|rho| * nu^2 = {product} must be < 2"))
        }
        other => invalid(section, other.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub beta: f64,
    pub rho: f64,
    pub nu: f64,
    pub x0: f64,
    pub y0: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { beta: 0.2, rho: 0.0, nu: 1.0, x0: 1.0, y0: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayoffKind {
    Put,
    Call,
    MassZeroPut,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PayoffSection {
    pub kind: PayoffKind,
    pub strike: f64,
    /// Width of the mass-at-zero put.
    pub eps: f64,
}

impl Default for PayoffSection {
    fn default() -> Self {
        Self { kind: PayoffKind::Put, strike: 1.0, eps: 0.125 }
    }
}

/// `"auto"` or an explicit weight exponent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum MuSetting {
    #[default]
    Auto,
    Value(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MuRepr {
    Number(f64),
    Text(String),
}

impl Serialize for MuSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            MuSetting::Auto => MuRepr::Text("auto".into()).serialize(s),
            MuSetting::Value(v) => MuRepr::Number(v).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for MuSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match MuRepr::deserialize(d)? {
            MuRepr::Number(v) => Ok(MuSetting::Value(v)),
            MuRepr::Text(t) if t == "auto" => Ok(MuSetting::Auto),
            MuRepr::Text(t) => Err(serde::de::Error::custom(format!("mu must be a number or \"auto\", got \"{t}\""))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizationSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_y: Option<f64>,
    pub l_x: u32,
    pub l_y: u32,
    pub mu: MuSetting,
}

impl Default for DiscretizationSection {
    fn default() -> Self {
        Self { r_x: None, r_y: None, l_x: 6, l_y: 6, mu: MuSetting::Auto }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub horizon: f64,
    pub theta: f64,
    pub steps: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self { horizon: 25.0, theta: 0.5, steps: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { n_paths: 50_000, n_steps: 1000, seed: 1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvergeMode {
    Spatial,
    Temporal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeSection {
    pub mode: ConvergeMode,
    /// Refinement levels for the spatial study.
    pub levels: Vec<u32>,
    /// Step counts for the temporal study.
    pub steps: Vec<usize>,
}

impl Default for ConvergeSection {
    fn default() -> Self {
        Self { mode: ConvergeMode::Spatial, levels: vec![2, 3, 4, 5], steps: vec![16, 32, 64, 128] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MassZeroSection {
    pub eps: Vec<f64>,
}

impl Default for MassZeroSection {
    fn default() -> Self {
        Self { eps: vec![0.5, 0.25, 0.125] }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub payoff: PayoffSection,
    pub discretization: DiscretizationSection,
    pub time: TimeSection,
    pub oracle: OracleSection,
    pub output: OutputSection,
    pub converge: ConvergeSection,
    pub masszero: MassZeroSection,
}

pub const PRESETS: [&str; 3] = ["paper-exp1", "paper-exp2", "paper-exp3"];

/// Named configurations for the three published experiments.
pub fn preset(name: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    match name {
        "paper-exp1" => {}
        "paper-exp2" => {
            cfg.model = ModelSection { beta: 0.5, rho: -0.3, ..cfg.model };
            cfg.time.horizon = 10.0;
        }
        "paper-exp3" => {
            cfg.time.horizon = 10.0;
            cfg.payoff.kind = PayoffKind::MassZeroPut;
            cfg.discretization.l_x = 7;
        }
        other => return Err(ConfigError::UnknownPreset(other.to_string())),
    }
    Ok(cfg)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn params(&self) -> Result<SabrParams, ConfigError> {
        let m = self.model;
        SabrParams::new(m.beta, m.rho, m.nu, m.x0, m.y0).map_err(|e| from_engine("model", e))
    }

    pub fn mu(&self) -> Result<WeightExponent, ConfigError> {
        let beta = self.model.beta;
        match self.discretization.mu {
            MuSetting::Auto => WeightExponent::auto(beta),
            MuSetting::Value(mu) => WeightExponent::new(mu, beta),
        }
        .map_err(|e| from_engine("discretization", e))
    }

    pub fn payoff(&self) -> Result<Payoff, ConfigError> {
        let p = self.payoff;
        let payoff = match p.kind {
            PayoffKind::Put => Payoff::Put { strike: p.strike },
            PayoffKind::Call => Payoff::Call { strike: p.strike },
            PayoffKind::MassZeroPut => Payoff::MassZeroPut { eps: p.eps },
            PayoffKind::Identity => Payoff::Identity,
        };
        payoff.validate().map_err(|e| from_engine("payoff", e))?;
        Ok(payoff)
    }

    pub fn theta(&self) -> Result<ThetaConfig, ConfigError> {
        let t = self.time;
        ThetaConfig::new(t.theta, t.horizon, t.steps).map_err(|e| from_engine("time", e))
    }

    /// Engine discretization for `scale` (largest payoff feature).
    pub fn spec_for(&self, scale: f64) -> Result<DiscretizationSpec, ConfigError> {
        let params = self.params()?;
        let d = self.discretization;
        let mut spec = DiscretizationSpec::for_pricing(&params, self.time.horizon, scale, d.l_x, d.l_y)
            .map_err(|e| from_engine("discretization", e))?;
        spec.mu = self.mu()?;
        if let Some(r) = d.r_x {
            spec.r_x = r;
        }
        if let Some(r) = d.r_y {
            spec.r_y = r;
        }
        spec.check_interior(&params).map_err(|e| invalid("discretization.r_x", e.to_string()))?;
        Ok(spec)
    }

    pub fn spec(&self) -> Result<DiscretizationSpec, ConfigError> {
        self.spec_for(self.payoff()?.scale())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params()?;
        self.mu()?;
        self.payoff()?;
        self.theta()?;
        let d = self.discretization;
        for (key, r) in [("discretization.r_x", d.r_x), ("discretization.r_y", d.r_y)] {
            if let Some(r) = r {
                if !(r > 0.0 && r.is_finite()) {
                    return Err(invalid(key, format!("{r} must be positive")));
                }
            }
        }
        for (key, l) in [("discretization.l_x", d.l_x), ("discretization.l_y", d.l_y)] {
            if l > 14 {
                return Err(invalid(key, format!("level {l} exceeds the supported maximum 14")));
            }
        }
        self.spec()?;
        let o = self.oracle;
        if o.n_paths < 2 || o.n_steps == 0 {
            return Err(invalid("oracle.n_paths", "need at least 2 paths and 1 step"));
        }
        let c = &self.converge;
        if c.levels.len() < 3 || c.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("converge.levels", "need at least 3 strictly increasing levels"));
        }
        if c.steps.len() < 3 || c.steps.windows(2).any(|w| w[1] <= w[0]) || c.steps[0] == 0 {
            return Err(invalid("converge.steps", "need at least 3 strictly increasing positive step counts"));
        }
        let eps = &self.masszero.eps;
        if eps.is_empty() || eps.windows(2).any(|w| w[1] >= w[0]) || eps.iter().any(|e| !(*e > 0.0)) {
            return Err(invalid("masszero.eps", "need a nonempty, strictly decreasing list of positive widths"));
        }
        Ok(())
    }
}
