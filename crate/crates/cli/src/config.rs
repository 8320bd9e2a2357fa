//! Run configuration: JSON file, dotted-path overrides and defaults.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use dotsim_core::device::DeviceSpec;
use dotsim_core::{DeviceModel, NoiseModel, WkbBarrier};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: line {line}, column {column}: {msg}")]
    Parse { path: String, line: usize, column: usize, msg: String },
    #[error("--set {0}: expected key.path=value")]
    BadOverride(String),
    #[error("--set {key}: {msg}")]
    Override { key: String, msg: String },
    #[error("{0}")]
    Invalid(String),
}

fn d_seed() -> u64 {
    0
}
fn d_plunger() -> f64 {
    0.25
}
fn d_noise() -> NoiseModel {
    NoiseModel::one_over_f(0.3, 1.0).expect("default noise is valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Subcommand this file is meant for; checked when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default = "d_seed")]
    pub seed: u64,
    /// Omitted: the built-in reference device.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<DeviceSpec>,
    #[serde(default = "d_noise")]
    pub noise: NoiseModel,
    /// Noise amplitude on plunger gates relative to the others in the
    /// generalized insensitivity.
    #[serde(default = "d_plunger")]
    pub plunger_weight: f64,
    #[serde(default)]
    pub rabi: RabiConfig,
    #[serde(default)]
    pub chevron: ChevronConfig,
    #[serde(default)]
    pub fingerprint: FingerprintConfig,
    #[serde(default)]
    pub contour: ContourConfig,
    #[serde(default)]
    pub ivj: IvjConfig,
    #[serde(default)]
    pub calibrate: CalibrateConfig,
    #[serde(default)]
    pub fitwkb: FitWkbConfig,
    #[serde(default)]
    pub stability: StabilityConfig,
    #[serde(default)]
    pub twofreq: TwoFreqConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

/// Where on the (Δ, Ṽ) plane a trace is taken. `v_exchange` wins over
/// `j_target`, which is solved for along the exchange axis at `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bias {
    pub delta: f64,
    pub v_exchange: Option<f64>,
    pub j_target: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RabiConfig {
    pub delta: f64,
    pub v_exchange: Option<f64>,
    pub j_target: Option<f64>,
    pub t_max: f64,
    pub points: usize,
    pub noise: bool,
    pub mode: ModeName,
    pub samples: usize,
    pub hyperfine_1e: Option<f64>,
    pub contrast: f64,
    pub readout_shots: Option<u32>,
    pub fit: bool,
    pub highpass_cutoff: Option<f64>,
}

impl Default for RabiConfig {
    fn default() -> Self {
        Self {
            delta: 0.0,
            v_exchange: None,
            j_target: Some(0.16),
            t_max: 1000.0,
            points: 4001,
            noise: true,
            mode: ModeName::Analytic,
            samples: 2000,
            hyperfine_1e: None,
            contrast: 0.75,
            readout_shots: None,
            fit: true,
            highpass_cutoff: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChevronConfig {
    pub delta_min: f64,
    pub delta_max: f64,
    pub delta_points: usize,
    pub t_max: f64,
    pub points: usize,
    /// Exchange-axis bias; when absent, set by `j_target` at Δ = 0.
    pub v_exchange: Option<f64>,
    pub j_target: Option<f64>,
    pub noise: bool,
}

impl Default for ChevronConfig {
    fn default() -> Self {
        Self {
            delta_min: -18.0,
            delta_max: 18.0,
            delta_points: 73,
            t_max: 500.0,
            points: 501,
            v_exchange: None,
            j_target: Some(0.05),
            noise: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mixture {
    pub weight: f64,
    /// J₂ − J₁, GHz.
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FingerprintConfig {
    pub delta_min: f64,
    pub delta_max: f64,
    pub delta_points: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub v_points: usize,
    pub evolve_time: f64,
    pub noise: bool,
    pub two_freq: Option<Mixture>,
}

impl Default for FingerprintConfig {
    fn default() -> Self {
        Self {
            delta_min: -18.0,
            delta_max: 18.0,
            delta_points: 121,
            v_min: 300.0,
            v_max: 600.0,
            v_points: 151,
            evolve_time: 500.0,
            noise: true,
            two_freq: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContourConfig {
    pub j_target: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub delta_points: usize,
    pub perturbation: f64,
    pub mc_samples: usize,
    /// Plunger amplitude of the injected Monte-Carlo noise; absent means
    /// equal noise on every gate.
    pub injection_plunger_weight: Option<f64>,
    pub highpass_cutoff: Option<f64>,
}

impl Default for ContourConfig {
    fn default() -> Self {
        Self {
            j_target: 0.16,
            delta_min: -18.0,
            delta_max: 18.0,
            delta_points: 19,
            perturbation: 0.5,
            mc_samples: 2000,
            injection_plunger_weight: None,
            highpass_cutoff: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IvjConfig {
    pub v_min: f64,
    pub v_max: f64,
    pub points: usize,
}

impl Default for IvjConfig {
    fn default() -> Self {
        Self { v_min: 0.0, v_max: 700.0, points: 29 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateConfig {
    pub p_min: f64,
    pub p_max: f64,
    pub pixels: usize,
    pub v_x1: [f64; 2],
    pub evolve_time: f64,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        Self { p_min: -230.0, p_max: 230.0, pixels: 241, v_x1: [0.0, 100.0], evolve_time: 1000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitWkbConfig {
    /// Range of Ṽ along the exchange axis at Δ = 0, mV.
    pub v_min: f64,
    pub v_max: f64,
    pub points: usize,
    pub j_min: Option<f64>,
    pub init: WkbBarrier,
}

impl Default for FitWkbConfig {
    fn default() -> Self {
        Self { v_min: 300.0, v_max: 700.0, points: 41, j_min: None, init: WkbBarrier { t0: 4.0, a: 2.5, b: 0.04 } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    pub p_min: f64,
    pub p_max: f64,
    pub pixels: usize,
    pub v_x1: f64,
    pub evolve_time: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self { p_min: -230.0, p_max: 230.0, pixels: 241, v_x1: 0.0, evolve_time: 1000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoFreqConfig {
    pub delta: f64,
    pub v_exchange: Option<f64>,
    pub j_target: Option<f64>,
    pub weight: f64,
    pub offset: f64,
    pub t_max: f64,
    pub points: usize,
    pub noise: bool,
    pub n_peaks: usize,
}

impl Default for TwoFreqConfig {
    fn default() -> Self {
        Self {
            delta: 0.0,
            v_exchange: None,
            j_target: Some(0.05),
            weight: 0.5,
            offset: 0.01,
            t_max: 2000.0,
            points: 4001,
            noise: false,
            n_peaks: 2,
        }
    }
}

impl RabiConfig {
    pub fn bias(&self) -> Bias {
        Bias { delta: self.delta, v_exchange: self.v_exchange, j_target: self.j_target }
    }
}

impl TwoFreqConfig {
    pub fn bias(&self) -> Bias {
        Bias { delta: self.delta, v_exchange: self.v_exchange, j_target: self.j_target }
    }
}

impl RunConfig {
    pub fn device(&self) -> Result<DeviceModel, dotsim_core::Error> {
        match &self.device {
            Some(spec) => DeviceModel::from_spec(spec),
            None => Ok(DeviceModel::reference()),
        }
    }
}

fn parse_error(path: &str, e: serde_json::Error) -> ConfigError {
    ConfigError::Parse { path: path.to_string(), line: e.line(), column: e.column(), msg: e.to_string() }
}

/// Sets `root.a.b.c = value`, creating objects along the way. The value is
/// read as JSON when it parses, else as a string.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| ConfigError::BadOverride(spec.to_string()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::BadOverride(spec.to_string()));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = match cur {
            Value::Object(m) => m,
            _ => {
                return Err(ConfigError::Override {
                    key: key.to_string(),
                    msg: format!("`{}` is not an object", parts[..i].join(".")),
                })
            }
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("key has at least one part")
}

/// Reads and validates a configuration. `text` is `None` for the built-in
/// defaults.
pub fn load(path: Option<&str>, overrides: &[String]) -> Result<(RunConfig, Option<String>), ConfigError> {
    let (name, text) = match path {
        Some(p) => {
            let t = std::fs::read_to_string(p).map_err(|e| ConfigError::Io { path: p.to_string(), source: e })?;
            (p.to_string(), Some(t))
        }
        None => ("<defaults>".to_string(), None),
    };
    let mut value: Value = match &text {
        // Typed parse first so schema errors carry file positions.
        Some(t) => {
            serde_json::from_str::<RunConfig>(t).map_err(|e| parse_error(&name, e))?;
            serde_json::from_str(t).map_err(|e| parse_error(&name, e))?
        }
        None => Value::Object(Default::default()),
    };
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let cfg: RunConfig =
        serde_json::from_value(value).map_err(|e| ConfigError::Invalid(format!("after overrides: {e}")))?;
    cfg.noise.validate().map_err(|e| ConfigError::Invalid(format!("noise: {e}")))?;
    Ok((cfg, text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_create_and_replace() {
        let mut v = serde_json::json!({"noise": {"amplitude": 0.3}});
        apply_override(&mut v, "noise.amplitude=0.5").unwrap();
        apply_override(&mut v, "rabi.mode=monte_carlo").unwrap();
        assert_eq!(v["noise"]["amplitude"], 0.5);
        assert_eq!(v["rabi"]["mode"], "monte_carlo");
        assert!(apply_override(&mut v, "noise.amplitude.x=1").is_err());
        assert!(apply_override(&mut v, "novalue").is_err());
    }

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&s).unwrap(), c);
    }
}
