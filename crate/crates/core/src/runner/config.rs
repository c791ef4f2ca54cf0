//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lagrangian::{OrderPolicy, DEFAULT_EPSILON};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Cl,
    Rk2,
    Rk4,
    Et,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cl" => Ok(Method::Cl),
            "rk2" => Ok(Method::Rk2),
            "rk4" => Ok(Method::Rk4),
            "et" => Ok(Method::Et),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Cl => "CL",
            Method::Rk2 => "RK2",
            Method::Rk4 => "RK4",
            Method::Et => "ET",
        })
    }
}

/// Initial vorticity.
#[derive(Clone, Debug, PartialEq)]
pub enum Initial {
    FourMode,
    Ab,
    Random {
        seed: u64,
    },
    /// Field file written by this program (grid samples).
    File(PathBuf),
}

/// Artifact families with a step cadence (0 disables).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Cadences {
    pub fields: usize,
    pub spectra: usize,
    pub norms: usize,
    pub conservation: usize,
    pub checkpoint: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    /// Truncation order policy for CL.
    pub cl_order: OrderPolicy,
    /// Taylor order for ET.
    pub et_order: usize,
    pub n: usize,
    pub epsilon: f64,
    /// Fixed step for RK/ET, step cap for CL.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub initial: Initial,
    /// Times at which vorticity fields are always written.
    pub output_times: Vec<f64>,
    pub cadences: Cadences,
    /// CL steps between radius fits.
    pub radius_cadence: usize,
    /// Depth of the stack used for radius fits.
    pub radius_depth: usize,
    /// Rejected-step retries, each halving dt.
    pub max_halvings: usize,
    /// Spectral checkpoint to resume from.
    pub restart: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: Method::Cl,
            cl_order: OrderPolicy::Fixed(8),
            et_order: 8,
            n: 256,
            epsilon: DEFAULT_EPSILON,
            dt: None,
            t_end: 1.0,
            initial: Initial::FourMode,
            output_times: Vec::new(),
            cadences: Cadences::default(),
            radius_cadence: 10,
            radius_depth: 40,
            max_halvings: 5,
            restart: None,
        }
    }
}

/// Fixed-step default for RK/ET: `dt ∝ 1/N`, equal to 0.01 at N = 256.
pub fn default_fixed_dt(n: usize) -> f64 {
    2.56 / n as f64
}

/// Default CL step cap before any radius estimate exists.
pub const DEFAULT_CL_DT_CAP: f64 = 1.0;

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{value}' for '{key}'")))
}

fn parse_times(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse::<f64>(key, s))
        .collect()
}

impl RunConfig {
    /// Reads `key = value` lines; `#` starts a comment.
    pub fn parse_text(text: &str) -> Result<BTreeMap<String, String>> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            map.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
        Ok(map)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_pairs(&Self::parse_text(&text)?)
    }

    /// Builds a validated configuration from key/value pairs over the defaults.
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seed = 0u64;
        let mut initial_kind = "four_mode".to_string();
        for (k, v) in pairs {
            let v = v.as_str();
            match k.as_str() {
                "method" => cfg.method = v.parse()?,
                "order" => {
                    if v.eq_ignore_ascii_case("auto") {
                        cfg.cl_order = OrderPolicy::preset("auto")?;
                    } else {
                        let s: usize = parse(k, v)?;
                        if s == 0 {
                            return Err(Error::Config("order must be >= 1".into()));
                        }
                        cfg.cl_order = OrderPolicy::Fixed(s);
                        cfg.et_order = s;
                    }
                }
                "n" => cfg.n = parse(k, v)?,
                "epsilon" => cfg.epsilon = parse(k, v)?,
                "dt" => cfg.dt = Some(parse(k, v)?),
                "t_end" => cfg.t_end = parse(k, v)?,
                "initial" => initial_kind = v.to_string(),
                "seed" => seed = parse(k, v)?,
                "output_times" => cfg.output_times = parse_times(k, v)?,
                "fields_cadence" => cfg.cadences.fields = parse(k, v)?,
                "spectra_cadence" => cfg.cadences.spectra = parse(k, v)?,
                "norms_cadence" => cfg.cadences.norms = parse(k, v)?,
                "conservation_cadence" => cfg.cadences.conservation = parse(k, v)?,
                "checkpoint_cadence" => cfg.cadences.checkpoint = parse(k, v)?,
                "radius_cadence" => cfg.radius_cadence = parse(k, v)?,
                "radius_depth" => cfg.radius_depth = parse(k, v)?,
                "max_halvings" => cfg.max_halvings = parse(k, v)?,
                "restart" => cfg.restart = Some(PathBuf::from(v)),
                other => return Err(Error::Config(format!("unknown key '{other}'"))),
            }
        }
        cfg.initial = match initial_kind.to_ascii_lowercase().as_str() {
            "four_mode" | "4mode" => Initial::FourMode,
            "ab" => Initial::Ab,
            "random" => Initial::Random { seed },
            _ => match initial_kind.split_once(':') {
                Some((kind, path)) if kind.eq_ignore_ascii_case("file") => {
                    Initial::File(PathBuf::from(path.trim()))
                }
                _ => {
                    return Err(Error::Config(format!(
                        "unknown initial condition '{initial_kind}'"
                    )))
                }
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 16 || self.n % 2 != 0 {
            return Err(Error::Config(format!(
                "n = {} must be even and >= 16",
                self.n
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::Config(
                "t_end must be finite and non-negative".into(),
            ));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::Config("dt must be positive".into()));
            }
        }
        if matches!(self.initial, Initial::Random { .. }) && self.n < 32 {
            return Err(Error::Config("random flow needs n >= 32".into()));
        }
        if self
            .output_times
            .iter()
            .any(|&t| !(t >= 0.0) || t > self.t_end)
        {
            return Err(Error::Config("output times must lie in [0, t_end]".into()));
        }
        if self.radius_cadence == 0 {
            return Err(Error::Config("radius_cadence must be >= 1".into()));
        }
        if self.et_order == 0 {
            return Err(Error::Config("ET order must be >= 1".into()));
        }
        Ok(())
    }

    /// Step for RK/ET, or the cap for CL.
    pub fn step_or_cap(&self) -> f64 {
        match (self.method, self.dt) {
            (_, Some(dt)) => dt,
            (Method::Cl, None) => DEFAULT_CL_DT_CAP,
            _ => default_fixed_dt(self.n),
        }
    }

    /// Flat text form accepted by [`RunConfig::parse_text`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("method", self.method.to_string());
        match self.method {
            Method::Et => push("order", self.et_order.to_string()),
            _ => match self.cl_order {
                OrderPolicy::Fixed(s) => push("order", s.to_string()),
                OrderPolicy::Auto { .. } => push("order", "auto".into()),
            },
        }
        push("n", self.n.to_string());
        push("epsilon", self.epsilon.to_string());
        if let Some(dt) = self.dt {
            push("dt", dt.to_string());
        }
        push("t_end", self.t_end.to_string());
        match &self.initial {
            Initial::FourMode => push("initial", "four_mode".into()),
            Initial::Ab => push("initial", "ab".into()),
            Initial::Random { seed } => {
                push("initial", "random".into());
                push("seed", seed.to_string());
            }
            Initial::File(p) => push("initial", format!("file:{}", p.display())),
        }
        if !self.output_times.is_empty() {
            let times: Vec<String> = self.output_times.iter().map(|t| t.to_string()).collect();
            push("output_times", times.join(","));
        }
        let c = self.cadences;
        push("fields_cadence", c.fields.to_string());
        push("spectra_cadence", c.spectra.to_string());
        push("norms_cadence", c.norms.to_string());
        push("conservation_cadence", c.conservation.to_string());
        push("checkpoint_cadence", c.checkpoint.to_string());
        push("radius_cadence", self.radius_cadence.to_string());
        push("radius_depth", self.radius_depth.to_string());
        push("max_halvings", self.max_halvings.to_string());
        if let Some(r) = &self.restart {
            push("restart", r.display().to_string());
        }
        out
    }
}
