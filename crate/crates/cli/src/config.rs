//! Experiment configuration: line-oriented `section.key = value` text.
//!
//! Keys are case-sensitive, `#` starts a comment, blank lines are ignored.
//! Every check runs at load time so that a bad file fails before any
//! computation starts; errors name the offending key.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;
use zakai_chaos::chaos_propagator::default_substeps;
use zakai_chaos::hermite_space::default_nodes_per_axis;
use zakai_chaos::models::CubicSensor;
use zakai_chaos::{BuiltinModel, SpatialBasis};

/// Largest propagator table the driver agrees to build.
pub const MAX_TABLE_BLOCKS: u64 = 200_000;

#[derive(Debug, Error, PartialEq)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    K,
    BigN,
    SmallN,
    Delta,
}

impl SweepAxis {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "K" => Some(Self::K),
            "N" => Some(Self::BigN),
            "n" => Some(Self::SmallN),
            "delta" => Some(Self::Delta),
            _ => None,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Self::K => "K",
            Self::BigN => "N",
            Self::SmallN => "n",
            Self::Delta => "delta",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleKind {
    Kalman,
    Galerkin,
}

/// Discretization as written in the file. Unset keys get defaults that
/// depend on the other values, filled in by
/// [`ExperimentConfig::discretization`].
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizationKeys {
    pub k: usize,
    pub big_n: u32,
    pub n: u32,
    pub delta: f64,
    pub horizon: f64,
    pub dt_sim: Option<f64>,
    pub dt_obs: Option<f64>,
    pub substeps: Option<usize>,
    pub quadrature_m: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Discretization {
    pub k: usize,
    pub big_n: u32,
    pub n: u32,
    pub delta: f64,
    pub horizon: f64,
    pub dt_sim: f64,
    pub dt_obs: f64,
    pub substeps: usize,
    pub quadrature_m: usize,
}

impl Discretization {
    /// Observation samples per window.
    pub fn samples_per_window(&self) -> usize {
        (self.delta / self.dt_obs).round() as usize
    }

    /// Simulation steps per observation sample.
    pub fn steps_per_sample(&self) -> usize {
        (self.dt_obs / self.dt_sim).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunKeys {
    pub seed: u64,
    pub paths: usize,
    pub out: PathBuf,
    pub sweep: Option<(SweepAxis, Vec<f64>)>,
    pub oracle: OracleKind,
    pub oracle_k: Option<usize>,
}

/// Constants of the error bounds. They are model dependent and not
/// computable from the discretization, so they are reported only when the
/// user supplies them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BudgetKeys {
    pub c: f64,
    pub eps_b: f64,
    pub nu: Option<f64>,
    pub w: f64,
    pub c_rho: Option<f64>,
    pub c_nu_t: Option<f64>,
    pub c_nu_t_w: Option<f64>,
    pub c_f: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: BuiltinModel,
    pub discretization: DiscretizationKeys,
    pub run: RunKeys,
    pub budget: Option<BudgetKeys>,
}

struct Entries {
    map: BTreeMap<String, String>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let where_ = format!("line {}", i + 1);
            let (key, value) =
                line.split_once('=').ok_or_else(|| ConfigError::new(&where_, "expected `section.key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let Some((section, name)) = key.split_once('.') else {
                return Err(ConfigError::new(&where_, format!("key `{key}` has no section")));
            };
            if !matches!(section, "model" | "discretization" | "run" | "budget") {
                return Err(ConfigError::new(key, format!("unknown section `{section}`")));
            }
            if name.is_empty() || value.is_empty() {
                return Err(ConfigError::new(&where_, "empty key or value"));
            }
            if map.insert(key.to_string(), value.to_string()).is_some() {
                return Err(ConfigError::new(key, "set more than once"));
            }
        }
        Ok(Self { map })
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn get<V: FromStr>(&mut self, key: &str, what: &str) -> Result<Option<V>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(s) => s.parse().map(Some).map_err(|_| ConfigError::new(key, format!("expected {what}, got `{s}`"))),
        }
    }

    fn real(&mut self, key: &str) -> Result<Option<f64>> {
        let v = self.get::<f64>(key, "a number")?;
        match v {
            Some(x) if !x.is_finite() => Err(ConfigError::new(key, format!("must be finite, got {x}"))),
            _ => Ok(v),
        }
    }

    fn positive(&mut self, key: &str) -> Result<Option<f64>> {
        let v = self.real(key)?;
        match v {
            Some(x) if x <= 0.0 => Err(ConfigError::new(key, format!("must be positive, got {x}"))),
            _ => Ok(v),
        }
    }

    fn nonnegative(&mut self, key: &str) -> Result<Option<f64>> {
        let v = self.real(key)?;
        match v {
            Some(x) if x < 0.0 => Err(ConfigError::new(key, format!("must be nonnegative, got {x}"))),
            _ => Ok(v),
        }
    }

    fn has_section(&self, section: &str) -> bool {
        let prefix = format!("{section}.");
        self.map.keys().any(|k| k.starts_with(&prefix))
    }

    fn finish(self, model: &str) -> Result<()> {
        match self.map.into_keys().next() {
            None => Ok(()),
            Some(key) if key.starts_with("model.") => {
                Err(ConfigError::new(&key, format!("not a parameter of model `{model}`")))
            }
            Some(key) => Err(ConfigError::new(&key, "unknown key")),
        }
    }
}

fn required<V>(v: Option<V>, key: &str) -> Result<V> {
    v.ok_or_else(|| ConfigError::new(key, "required"))
}

fn parse_model(e: &mut Entries) -> Result<BuiltinModel> {
    let name = required(e.raw("model.name"), "model.name")?;
    let model = BuiltinModel::by_name(&name).ok_or_else(|| {
        ConfigError::new("model.name", format!("unknown model `{name}` (ou-linear, correlated-ou, cubic-sensor)"))
    })?;
    Ok(match model {
        BuiltinModel::OuLinear(mut m) | BuiltinModel::CorrelatedOu(mut m) => {
            m.a = e.real("model.a")?.unwrap_or(m.a);
            m.sigma = e.nonnegative("model.sigma")?.unwrap_or(m.sigma);
            m.rho = e.real("model.rho")?.unwrap_or(m.rho);
            m.h = e.real("model.h")?.unwrap_or(m.h);
            m.m0 = e.real("model.m0")?.unwrap_or(m.m0);
            m.p0 = e.positive("model.p0")?.unwrap_or(m.p0);
            if matches!(model, BuiltinModel::OuLinear(_)) {
                if m.rho != 0.0 {
                    return Err(ConfigError::new("model.rho", "ou-linear has no correlation; use correlated-ou"));
                }
                BuiltinModel::OuLinear(m)
            } else {
                BuiltinModel::CorrelatedOu(m)
            }
        }
        BuiltinModel::CubicSensor(m) => BuiltinModel::CubicSensor(CubicSensor {
            a: e.real("model.a")?.unwrap_or(m.a),
            sigma: e.nonnegative("model.sigma")?.unwrap_or(m.sigma),
            epsilon: e.positive("model.epsilon")?.unwrap_or(m.epsilon),
            saturation: e.positive("model.saturation")?.unwrap_or(m.saturation),
            m0: e.real("model.m0")?.unwrap_or(m.m0),
            p0: e.positive("model.p0")?.unwrap_or(m.p0),
        }),
    })
}

fn parse_discretization(e: &mut Entries) -> Result<DiscretizationKeys> {
    let k: usize = required(e.get("discretization.K", "a positive integer")?, "discretization.K")?;
    let big_n: u32 = required(e.get("discretization.N", "a nonnegative integer")?, "discretization.N")?;
    let n: u32 = required(e.get("discretization.n", "a positive integer")?, "discretization.n")?;
    let delta = required(e.positive("discretization.delta")?, "discretization.delta")?;
    let horizon = required(e.positive("discretization.T")?, "discretization.T")?;
    Ok(DiscretizationKeys {
        k,
        big_n,
        n,
        delta,
        horizon,
        dt_sim: e.positive("discretization.dt_sim")?,
        dt_obs: e.positive("discretization.dt_obs")?,
        substeps: e.get("discretization.substeps", "a positive integer")?,
        quadrature_m: e.get("discretization.quadrature_m", "a positive integer")?,
    })
}

fn parse_run(e: &mut Entries, model: &BuiltinModel) -> Result<RunKeys> {
    let seed = e.get("run.seed", "an unsigned integer")?.unwrap_or(0);
    let paths: usize = e.get("run.paths", "a positive integer")?.unwrap_or(1);
    if paths == 0 {
        return Err(ConfigError::new("run.paths", "must be at least 1"));
    }
    let out = PathBuf::from(e.raw("run.out").unwrap_or_else(|| "out".into()));
    let axis = match e.raw("run.sweep_axis") {
        None => None,
        Some(s) => Some(SweepAxis::parse(&s).ok_or_else(|| {
            ConfigError::new("run.sweep_axis", format!("expected one of K, N, n, delta, got `{s}`"))
        })?),
    };
    let values = match e.raw("run.sweep_values") {
        None => None,
        Some(s) => {
            let parsed: std::result::Result<Vec<f64>, _> = s.split(',').map(|v| v.trim().parse::<f64>()).collect();
            Some(parsed.map_err(|_| ConfigError::new("run.sweep_values", format!("expected a comma list of numbers, got `{s}`")))?)
        }
    };
    let sweep = match (axis, values) {
        (None, None) => None,
        (Some(_), None) => return Err(ConfigError::new("run.sweep_values", "required when run.sweep_axis is set")),
        (None, Some(_)) => return Err(ConfigError::new("run.sweep_axis", "required when run.sweep_values is set")),
        (Some(axis), Some(values)) => Some((axis, values)),
    };
    let oracle = match e.raw("run.oracle").as_deref() {
        None if model.linear().is_some() => OracleKind::Kalman,
        None | Some("galerkin") => OracleKind::Galerkin,
        Some("kalman") if model.linear().is_some() => OracleKind::Kalman,
        Some("kalman") => {
            return Err(ConfigError::new("run.oracle", format!("kalman needs a linear model, not `{}`", model.name())));
        }
        Some(other) => return Err(ConfigError::new("run.oracle", format!("expected kalman or galerkin, got `{other}`"))),
    };
    let oracle_k = e.get("run.oracle_K", "a positive integer")?;
    Ok(RunKeys { seed, paths, out, sweep, oracle, oracle_k })
}

fn parse_budget(e: &mut Entries) -> Result<Option<BudgetKeys>> {
    if !e.has_section("budget") {
        return Ok(None);
    }
    Ok(Some(BudgetKeys {
        c: required(e.nonnegative("budget.c")?, "budget.c")?,
        eps_b: e.nonnegative("budget.eps_b")?.unwrap_or(0.0),
        nu: e.nonnegative("budget.nu")?,
        w: e.nonnegative("budget.w")?.unwrap_or(0.0),
        c_rho: e.nonnegative("budget.c_rho")?,
        c_nu_t: e.nonnegative("budget.c_nu_t")?,
        c_nu_t_w: e.nonnegative("budget.c_nu_t_w")?,
        c_f: e.nonnegative("budget.c_f")?,
    }))
}

/// Exact integer ratio `num / den`, if there is one.
fn ratio(num: f64, den: f64) -> Option<usize> {
    let q = num / den;
    let r = q.round();
    (r >= 1.0 && (q - r).abs() <= 1e-9 * q).then_some(r as usize)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut e = Entries::parse(text)?;
        let model = parse_model(&mut e)?;
        let discretization = parse_discretization(&mut e)?;
        let run = parse_run(&mut e, &model)?;
        let budget = parse_budget(&mut e)?;
        e.finish(model.name())?;
        let config = Self { model, discretization, run, budget };
        config.discretization()?;
        if let Some((axis, values)) = &config.run.sweep {
            if values.is_empty() {
                return Err(ConfigError::new("run.sweep_values", "empty list"));
            }
            for (i, &v) in values.iter().enumerate() {
                config.with_axis(*axis, v).map_err(|err| ConfigError {
                    field: format!("run.sweep_values[{i}]"),
                    message: format!("{axis}={v} gives {}: {}", err.field, err.message),
                })?;
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|err| ConfigError::new("--config", format!("cannot read {}: {err}", path.display())))?;
        Self::parse(&text)
    }

    /// The same experiment with one discretization knob replaced, validated.
    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let mut next = self.clone();
        let d = &mut next.discretization;
        let key = format!("discretization.{}", axis.key());
        let integer = || -> Result<u64> {
            if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as u64)
            } else {
                Err(ConfigError::new(&key, format!("expected a nonnegative integer, got {value}")))
            }
        };
        match axis {
            SweepAxis::K => d.k = integer()? as usize,
            SweepAxis::BigN => d.big_n = integer()? as u32,
            SweepAxis::SmallN => d.n = integer()? as u32,
            SweepAxis::Delta => {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(ConfigError::new(&key, format!("must be positive, got {value}")));
                }
                d.delta = value;
            }
        }
        next.discretization()?;
        Ok(next)
    }

    /// Fills in the defaults and checks every constraint the discretization
    /// must meet downstream.
    pub fn discretization(&self) -> Result<Discretization> {
        let keys = &self.discretization;
        let DiscretizationKeys { k, big_n, n, delta, horizon, .. } = *keys;
        if k == 0 {
            return Err(ConfigError::new("discretization.K", "must be at least 1"));
        }
        if n == 0 {
            return Err(ConfigError::new("discretization.n", "must be at least 1"));
        }
        if big_n > 20 {
            return Err(ConfigError::new("discretization.N", format!("must be at most 20, got {big_n}")));
        }
        let blocks = (0..big_n).fold(1.0, |acc, i| acc * f64::from(n + big_n - i) / f64::from(i + 1));
        if blocks > MAX_TABLE_BLOCKS as f64 {
            return Err(ConfigError::new(
                "discretization.N",
                format!("N={big_n}, n={n} needs more than {MAX_TABLE_BLOCKS} propagator blocks"),
            ));
        }
        if !(delta > 0.0) {
            return Err(ConfigError::new("discretization.delta", "must be positive"));
        }
        if ratio(horizon, delta).is_none() {
            return Err(ConfigError::new(
                "discretization.T",
                format!("T={horizon} is not a whole number of windows of delta={delta}"),
            ));
        }
        let limit = delta / (8 * n) as f64;
        let dt_obs = keys.dt_obs.unwrap_or(limit);
        if dt_obs > limit * (1.0 + 1e-12) {
            return Err(ConfigError::new(
                "discretization.dt_obs",
                format!("{dt_obs} exceeds delta/(8n) = {limit}; the observation sampling is too coarse for n={n}"),
            ));
        }
        if ratio(delta, dt_obs).is_none() {
            return Err(ConfigError::new("discretization.dt_obs", format!("delta={delta} is not a multiple of {dt_obs}")));
        }
        let dt_sim = keys.dt_sim.unwrap_or(dt_obs);
        if dt_sim > dt_obs * (1.0 + 1e-12) || ratio(dt_obs, dt_sim).is_none() {
            return Err(ConfigError::new(
                "discretization.dt_sim",
                format!("must divide dt_obs={dt_obs} a whole number of times, got {dt_sim}"),
            ));
        }
        let substeps = keys.substeps.unwrap_or_else(|| default_substeps(n));
        if substeps == 0 {
            return Err(ConfigError::new("discretization.substeps", "must be at least 1"));
        }
        let quadrature_m = keys.quadrature_m.unwrap_or_else(|| default_nodes_per_axis(&SpatialBasis::new(1, k)));
        if quadrature_m < k {
            return Err(ConfigError::new(
                "discretization.quadrature_m",
                format!("needs at least K={k} nodes, got {quadrature_m}"),
            ));
        }
        if let Some(ok) = self.run.oracle_k {
            if ok < k {
                return Err(ConfigError::new("run.oracle_K", format!("must be at least K={k}, got {ok}")));
            }
        }
        if let Some(b) = &self.budget {
            if let Some(nu) = b.nu {
                if nu <= 2.0 {
                    return Err(ConfigError::new("budget.nu", format!("the bounds need nu > d + 1 = 2, got {nu}")));
                }
                for (key, v) in [("budget.c_rho", b.c_rho), ("budget.c_nu_t", b.c_nu_t)] {
                    required(v, key)?;
                }
            }
        }
        Ok(Discretization { k, big_n, n, delta, horizon, dt_sim, dt_obs, substeps, quadrature_m })
    }

    /// Size of the fine Galerkin oracle: `run.oracle_K`, or twice the
    /// largest K the experiment uses, so that a K sweep shares one oracle.
    pub fn oracle_k(&self) -> usize {
        let swept = match &self.run.sweep {
            Some((SweepAxis::K, values)) => values.iter().fold(0.0f64, |a, &v| a.max(v)) as usize,
            _ => 0,
        };
        self.run.oracle_k.unwrap_or(2 * self.discretization.k.max(swept))
    }
}
