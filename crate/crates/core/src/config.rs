//! JSON run configuration.
//!
//! ```json
//! {
//!   "n_standard": 50, "m": 3, "theta": 7, "steps": 180, "seed": 0,
//!   "eps_edge": 0.001, "eps_norm": 1e-12,
//!   "controllers": [
//!     {"type": "strategic", "count": 1, "rho": 2, "goal": [0, 0, 0]},
//!     {"type": "stubborn", "count": 1, "opinion": [0, 0, 0]},
//!     {"type": "popular", "count": 5, "rho": -10}
//!   ],
//!   "stability": {"tol": 1e-4, "window": 20, "stop_early": false},
//!   "output": {"dir": "out", "formats": ["csv", "dot", "json"]}
//! }
//! ```
//!
//! `eps_edge`, `eps_norm`, `stability` and `output` are optional. Unknown
//! keys are rejected.

use std::fmt;
use std::path::PathBuf;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::controllers::{Archetype, ControllerSpec};
use crate::engine::{SimConfig, StabilityCriterion};
use crate::matrix::NormEps;
use crate::network::EdgeParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("range violation at `{path}`: {message}")]
    Range { path: String, message: String },
}

impl ConfigError {
    pub fn path(&self) -> Option<&str> {
        match self {
            ConfigError::Syntax { .. } => None,
            ConfigError::Schema { path, .. } | ConfigError::Range { path, .. } => Some(path),
        }
    }
}

fn schema(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

fn range(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Range {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputFormat {
    Csv,
    Dot,
    Json,
}

impl OutputFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Dot => "dot",
            OutputFormat::Json => "json",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(OutputFormat::Csv),
            "dot" => Some(OutputFormat::Dot),
            "json" => Some(OutputFormat::Json),
            _ => None,
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Dot, OutputFormat::Json],
        }
    }
}

/// `count` identical controllers.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGroup {
    pub count: usize,
    pub spec: ControllerSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_standard: usize,
    pub m: usize,
    pub theta: u32,
    pub eps_edge: f64,
    pub eps_norm: f64,
    pub steps: usize,
    pub seed: u64,
    pub controllers: Vec<ControllerGroup>,
    pub stability: Option<StabilityCriterion>,
    pub output: OutputConfig,
}

impl RunConfig {
    /// Simulation parameters with controller groups expanded, one spec per
    /// controller agent.
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            n_standard: self.n_standard,
            m: self.m,
            controllers: self
                .controllers
                .iter()
                .flat_map(|g| std::iter::repeat_n(g.spec.clone(), g.count))
                .collect(),
            edge: EdgeParams {
                theta: self.theta,
                eps_edge: self.eps_edge,
            },
            eps_norm: self.eps_norm,
        }
    }

    pub fn to_json(&self) -> Value {
        let controllers: Vec<Value> = self
            .controllers
            .iter()
            .map(|g| match &g.spec {
                ControllerSpec::Stubborn { opinion } => {
                    json!({"type": "stubborn", "count": g.count, "opinion": opinion})
                }
                ControllerSpec::Popular { rho } => {
                    json!({"type": "popular", "count": g.count, "rho": rho})
                }
                ControllerSpec::Strategic { rho, goal } => {
                    json!({"type": "strategic", "count": g.count, "rho": rho, "goal": goal})
                }
            })
            .collect();
        let mut v = json!({
            "n_standard": self.n_standard,
            "m": self.m,
            "theta": self.theta,
            "eps_edge": self.eps_edge,
            "eps_norm": self.eps_norm,
            "steps": self.steps,
            "seed": self.seed,
            "controllers": controllers,
            "output": {
                "dir": self.output.dir.to_string_lossy(),
                "formats": self.output.formats.iter().map(|f| f.as_str()).collect::<Vec<_>>(),
            },
        });
        if let Some(s) = &self.stability {
            v["stability"] = json!({"tol": s.tol, "window": s.window, "stop_early": s.stop_early});
        }
        v
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("config serializes")
    }
}

const TOP_KEYS: &[&str] = &[
    "n_standard",
    "m",
    "theta",
    "eps_edge",
    "eps_norm",
    "steps",
    "seed",
    "controllers",
    "stability",
    "output",
];

/// Parses and fully validates a run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let root: Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let obj = as_object(&root, "$")?;
    reject_unknown(obj, TOP_KEYS, "")?;

    let n_standard = req_uint(obj, "n_standard", "n_standard")? as usize;
    if n_standard < 1 {
        return Err(range("n_standard", "must be >= 1"));
    }
    let m = req_uint(obj, "m", "m")? as usize;
    if m < 1 {
        return Err(range("m", "must be >= 1"));
    }
    let theta = req_uint(obj, "theta", "theta")?;
    if theta < 1 || theta > u64::from(u32::MAX) {
        return Err(range("theta", "must be a positive integer"));
    }
    let steps = req_uint(obj, "steps", "steps")? as usize;
    if steps < 1 {
        return Err(range("steps", "must be >= 1"));
    }
    let seed = req_uint(obj, "seed", "seed")?;

    let eps_edge = opt_f64(obj, "eps_edge", "eps_edge")?.unwrap_or(EdgeParams::DEFAULT_EPS_EDGE);
    if !(0.0..1.0).contains(&eps_edge) {
        return Err(range(
            "eps_edge",
            format!("must lie in [0, 1), got {eps_edge}"),
        ));
    }
    let eps_norm = opt_f64(obj, "eps_norm", "eps_norm")?.unwrap_or(NormEps::DEFAULT.get());
    if NormEps::new(eps_norm).is_err() {
        return Err(range(
            "eps_norm",
            format!("must lie in (0, 1e-6], got {eps_norm}"),
        ));
    }

    let list = obj
        .get("controllers")
        .ok_or_else(|| schema("controllers", "missing required key"))?
        .as_array()
        .ok_or_else(|| schema("controllers", "expected an array"))?;
    let controllers = list
        .iter()
        .enumerate()
        .map(|(i, c)| parse_controller(c, &format!("controllers[{i}]"), m))
        .collect::<Result<Vec<_>, _>>()?;

    let stability = match obj.get("stability") {
        None | Some(Value::Null) => None,
        Some(v) => Some(parse_stability(v)?),
    };
    let output = match obj.get("output") {
        None | Some(Value::Null) => OutputConfig::default(),
        Some(v) => parse_output(v)?,
    };

    Ok(RunConfig {
        n_standard,
        m,
        theta: theta as u32,
        eps_edge,
        eps_norm,
        steps,
        seed,
        controllers,
        stability,
        output,
    })
}

fn parse_controller(v: &Value, path: &str, m: usize) -> Result<ControllerGroup, ConfigError> {
    let obj = as_object(v, path)?;
    let ty = obj
        .get("type")
        .ok_or_else(|| schema(&format!("{path}.type"), "missing required key"))?
        .as_str()
        .ok_or_else(|| schema(&format!("{path}.type"), "expected a string"))?;
    let archetype =
        match ty {
            "stubborn" => Archetype::Stubborn,
            "popular" => Archetype::Popular,
            "strategic" => Archetype::Strategic,
            other => return Err(schema(
                &format!("{path}.type"),
                format!(
                    "unknown controller type `{other}` (expected stubborn, popular or strategic)"
                ),
            )),
        };
    let allowed: &[&str] = match archetype {
        Archetype::Stubborn => &["type", "count", "opinion"],
        Archetype::Popular => &["type", "count", "rho"],
        Archetype::Strategic => &["type", "count", "rho", "goal"],
    };
    reject_unknown(obj, allowed, path)?;

    let count = req_uint(obj, "count", &format!("{path}.count"))? as usize;
    if count < 1 {
        return Err(range(&format!("{path}.count"), "must be >= 1"));
    }
    let rho = |obj: &Map<String, Value>| -> Result<f64, ConfigError> {
        let p = format!("{path}.rho");
        let r = req_f64(obj, "rho", &p)?;
        if r.is_finite() {
            Ok(r)
        } else {
            Err(range(&p, "must be finite"))
        }
    };
    let spec = match archetype {
        Archetype::Stubborn => ControllerSpec::Stubborn {
            opinion: req_unit_vec(obj, "opinion", &format!("{path}.opinion"), m)?,
        },
        Archetype::Popular => ControllerSpec::Popular { rho: rho(obj)? },
        Archetype::Strategic => ControllerSpec::Strategic {
            rho: rho(obj)?,
            goal: req_unit_vec(obj, "goal", &format!("{path}.goal"), m)?,
        },
    };
    Ok(ControllerGroup { count, spec })
}

fn parse_stability(v: &Value) -> Result<StabilityCriterion, ConfigError> {
    let obj = as_object(v, "stability")?;
    reject_unknown(obj, &["tol", "window", "stop_early"], "stability")?;
    let defaults = StabilityCriterion::default();
    let tol = opt_f64(obj, "tol", "stability.tol")?.unwrap_or(defaults.tol);
    if !(tol.is_finite() && tol > 0.0) {
        return Err(range("stability.tol", "must be > 0"));
    }
    let window = match obj.get("window") {
        None => defaults.window,
        Some(_) => req_uint(obj, "window", "stability.window")? as usize,
    };
    if window < 1 {
        return Err(range("stability.window", "must be >= 1"));
    }
    let stop_early = match obj.get("stop_early") {
        None => false,
        Some(b) => b
            .as_bool()
            .ok_or_else(|| schema("stability.stop_early", "expected a boolean"))?,
    };
    Ok(StabilityCriterion {
        tol,
        window,
        stop_early,
    })
}

fn parse_output(v: &Value) -> Result<OutputConfig, ConfigError> {
    let obj = as_object(v, "output")?;
    reject_unknown(obj, &["dir", "formats"], "output")?;
    let mut out = OutputConfig::default();
    if let Some(dir) = obj.get("dir") {
        out.dir = PathBuf::from(
            dir.as_str()
                .ok_or_else(|| schema("output.dir", "expected a string"))?,
        );
    }
    if let Some(formats) = obj.get("formats") {
        let arr = formats
            .as_array()
            .ok_or_else(|| schema("output.formats", "expected an array"))?;
        out.formats = arr
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let p = format!("output.formats[{i}]");
                let s = f.as_str().ok_or_else(|| schema(&p, "expected a string"))?;
                OutputFormat::parse(s).ok_or_else(|| schema(&p, format!("unknown format `{s}`")))
            })
            .collect::<Result<_, _>>()?;
    }
    Ok(out)
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, ConfigError> {
    v.as_object()
        .ok_or_else(|| schema(path, "expected an object"))
}

fn reject_unknown(
    obj: &Map<String, Value>,
    allowed: &[&str],
    prefix: &str,
) -> Result<(), ConfigError> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            let path = if prefix.is_empty() {
                key.clone()
            } else {
                format!("{prefix}.{key}")
            };
            return Err(schema(&path, "unknown key"));
        }
    }
    Ok(())
}

fn req_uint(obj: &Map<String, Value>, key: &str, path: &str) -> Result<u64, ConfigError> {
    let v = obj
        .get(key)
        .ok_or_else(|| schema(path, "missing required key"))?;
    if let Some(u) = v.as_u64() {
        return Ok(u);
    }
    match v.as_f64() {
        Some(f) if f < 0.0 => Err(range(path, format!("must be non-negative, got {f}"))),
        Some(_) => Err(schema(path, "expected an integer")),
        None => Err(schema(path, "expected a number")),
    }
}

fn req_f64(obj: &Map<String, Value>, key: &str, path: &str) -> Result<f64, ConfigError> {
    opt_f64(obj, key, path)?.ok_or_else(|| schema(path, "missing required key"))
}

fn opt_f64(obj: &Map<String, Value>, key: &str, path: &str) -> Result<Option<f64>, ConfigError> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| schema(path, "expected a number")),
    }
}

fn req_unit_vec(
    obj: &Map<String, Value>,
    key: &str,
    path: &str,
    m: usize,
) -> Result<Vec<f64>, ConfigError> {
    let arr = obj
        .get(key)
        .ok_or_else(|| schema(path, "missing required key"))?
        .as_array()
        .ok_or_else(|| schema(path, "expected an array"))?;
    if arr.len() != m {
        return Err(schema(
            path,
            format!("expected {m} entries, got {}", arr.len()),
        ));
    }
    arr.iter()
        .enumerate()
        .map(|(i, v)| {
            let p = format!("{path}[{i}]");
            let f = v.as_f64().ok_or_else(|| schema(&p, "expected a number"))?;
            if (0.0..=1.0).contains(&f) {
                Ok(f)
            } else {
                Err(range(&p, format!("must lie in [0, 1], got {f}")))
            }
        })
        .collect()
}
