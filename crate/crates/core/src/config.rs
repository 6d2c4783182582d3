//! Experiment configuration: strict TOML in, canonical JSON out.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::disk::{ControlModel, DiskParams};
use crate::error::{Error, Result};
use crate::magnet::{GridSpec, RingSpec};
use crate::motor::{MotorMode, MotorParams, MotorRunSpec};
use crate::stats::EnsembleSpec;
use crate::top::{TopCase, TopExperiment, TopParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Disk,
    Control,
    Top,
    Motor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct TopConfig {
    pub case: Option<TopCase>,
    pub params: TopParams,
    pub run: TopExperiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct MotorConfig {
    pub mode: MotorMode,
    pub params: MotorParams,
    pub run: MotorRunSpec,
}

/// Landscape scan of `V_e = -kappa2 |B|^2` over the contact plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub ring: RingSpec,
    /// Height of the ball centre above the plane.
    pub ball_radius: f64,
    pub kappa2: f64,
    pub grid: GridSpec,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            ring: RingSpec {
                radius: 4.0,
                height: 2.0,
                count: 25,
                phi: 0.0,
                theta: 0.0,
                moment: 1.0,
            },
            ball_radius: 0.3,
            kappa2: 1.0,
            grid: GridSpec::square(6.0, 121),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Trajectories,
    Stats,
    Energy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub reports: Vec<ReportKind>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: PathBuf::from("out"),
            reports: vec![ReportKind::Trajectories],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    #[serde(default)]
    pub disk: Option<DiskParams>,
    #[serde(default)]
    pub control: Option<ControlModel>,
    #[serde(default)]
    pub top: Option<TopConfig>,
    #[serde(default)]
    pub motor: Option<MotorConfig>,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub ensemble: EnsembleSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    /// Fill the section of the selected model with defaults when absent.
    pub fn resolve(mut self) -> Self {
        match self.model {
            ModelKind::Disk => {
                self.disk.get_or_insert_with(DiskParams::default);
            }
            ModelKind::Control => {
                self.control.get_or_insert_with(ControlModel::default);
            }
            ModelKind::Top => {
                self.top.get_or_insert_with(TopConfig::default);
            }
            ModelKind::Motor => {
                self.motor.get_or_insert_with(MotorConfig::default);
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let missing = |name: &str| Error::Validation(format!("missing [{name}] section"));
        match self.model {
            ModelKind::Disk => {
                let p = self.disk.as_ref().ok_or_else(|| missing("disk"))?;
                p.validate().map_err(validation)?;
                self.ensemble.validate().map_err(validation)?;
            }
            ModelKind::Control => {
                self.control
                    .as_ref()
                    .ok_or_else(|| missing("control"))?
                    .validate()?;
                self.ensemble.validate().map_err(validation)?;
            }
            ModelKind::Top => {
                let t = self.top.as_ref().ok_or_else(|| missing("top"))?;
                t.params.validate()?;
                if !(t.run.h > 0.0) || t.run.record_stride == 0 {
                    return Err(Error::Validation(
                        "top run needs h > 0 and record_stride > 0".into(),
                    ));
                }
            }
            ModelKind::Motor => {
                let m = self.motor.as_ref().ok_or_else(|| missing("motor"))?;
                m.params.validate(m.mode)?;
                if !(m.run.h > 0.0) || m.run.record_stride == 0 {
                    return Err(Error::Validation(
                        "motor run needs h > 0 and record_stride > 0".into(),
                    ));
                }
                if self.ensemble.n_trajectories == 0 {
                    return Err(Error::Validation("n_trajectories must be positive".into()));
                }
            }
        }
        if let Some(s) = &self.scan {
            s.ring.validate()?;
            if s.grid.nx < 3 || s.grid.ny < 3 {
                return Err(Error::Validation(
                    "scan grid needs at least 3 points per axis".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Any model error surfaced during validation is a validation error.
fn validation(e: Error) -> Error {
    match e {
        Error::Validation(_) => e,
        Error::InvalidSigma(_) => Error::Validation("sigma must be positive".into()),
        other => Error::Validation(other.to_string()),
    }
}

/// A parsed config with the raw table kept for provenance.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// Dotted keys given explicitly in the file.
    pub explicit: Vec<String>,
}

pub fn parse_config_str(text: &str) -> Result<LoadedConfig> {
    let raw: toml::Table = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
    let config = config.resolve();
    config.validate()?;
    let mut explicit = Vec::new();
    collect_keys(&toml::Value::Table(raw), "", &mut explicit);
    Ok(LoadedConfig { config, explicit })
}

pub fn parse_config(path: &Path) -> Result<LoadedConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

fn parse_error(text: &str, e: &toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    let msg = e.message().trim().to_string();
    match line {
        Some(l) => Error::Parse(format!("line {l}: {msg}")),
        None => Error::Parse(msg),
    }
}

fn collect_keys(v: &toml::Value, prefix: &str, out: &mut Vec<String>) {
    if let toml::Value::Table(t) = v {
        for (k, v) in t {
            let key = if prefix.is_empty() {
                k.clone()
            } else {
                format!("{prefix}.{k}")
            };
            if v.is_table() {
                collect_keys(v, &key, out);
            } else {
                out.push(key);
            }
        }
    }
}

/// JSON with object keys sorted at every level.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Io(e.to_string()))?;
    serde_json::to_string(&sort_keys(v)).map_err(|e| Error::Io(e.to_string()))
}

fn sort_keys(v: serde_json::Value) -> serde_json::Value {
    match v {
        serde_json::Value::Object(m) => {
            let sorted: BTreeMap<String, serde_json::Value> =
                m.into_iter().map(|(k, v)| (k, sort_keys(v))).collect();
            serde_json::Value::Object(sorted.into_iter().collect())
        }
        serde_json::Value::Array(a) => {
            serde_json::Value::Array(a.into_iter().map(sort_keys).collect())
        }
        other => other,
    }
}

pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let json = canonical_json(config)?;
    Ok(hex::encode(Sha256::digest(json.as_bytes())))
}

/// Leaf keys of the resolved config tagged `config` or `default`.
pub fn parameter_sources(loaded: &LoadedConfig) -> Result<BTreeMap<String, String>> {
    let v = serde_json::to_value(&loaded.config).map_err(|e| Error::Io(e.to_string()))?;
    let mut leaves = Vec::new();
    json_leaves(&v, "", &mut leaves);
    Ok(leaves
        .into_iter()
        .map(|k| {
            let given = loaded
                .explicit
                .iter()
                .any(|e| e == &k || k.starts_with(&format!("{e}.")));
            (
                k,
                if given {
                    "config".to_string()
                } else {
                    "default".to_string()
                },
            )
        })
        .collect())
}

fn json_leaves(v: &serde_json::Value, prefix: &str, out: &mut Vec<String>) {
    match v {
        serde_json::Value::Object(m) if !m.is_empty() => {
            for (k, v) in m {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                json_leaves(v, &key, out);
            }
        }
        serde_json::Value::Null => {}
        _ => out.push(prefix.to_string()),
    }
}
