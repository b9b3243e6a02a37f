//! Flat TOML run configuration.
//!
//! One file holds the physical parameters and the run settings side by side.
//! Unknown keys are rejected so that typos do not silently fall back to
//! defaults.

use std::collections::BTreeMap;
use std::path::PathBuf;

use bubblespec::nonlinear_dynamics::Waveform;
use bubblespec::params::CONFIG_KEYS;
use bubblespec::PhysicalParams;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: PhysicalParams,
    pub m: f64,
    /// Galerkin truncation.
    pub n: usize,
    /// Fixed-point residual target for `periodic`.
    pub tol: f64,
    /// Relative tolerance of the time integrator.
    pub integration_tol: f64,
    /// Forcing angular frequency; ω0 when absent.
    pub omega: Option<f64>,
    /// Forcing amplitude [Pa].
    pub amplitude: f64,
    pub waveform: Waveform,
    /// Initial radius perturbation relative to R*.
    pub r0: f64,
    /// Simulation horizon; 20/β when absent.
    pub t_end: Option<f64>,
    pub n_out: usize,
    pub chi_min: Option<f64>,
    pub chi_max: Option<f64>,
    pub chi_points: usize,
    pub output_dir: Option<PathBuf>,
    /// SHA-256 of the canonical rendering of all keys except `output_dir`.
    pub hash: String,
}

fn number(key: &str, v: &toml::Value) -> Result<f64, CliError> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        other => Err(CliError::Config(format!(
            "key `{key}` must be a number, got {}",
            other.type_str()
        ))),
    }
}

fn count(key: &str, v: &toml::Value) -> Result<usize, CliError> {
    match v {
        toml::Value::Integer(i) if *i >= 1 => Ok(*i as usize),
        _ => Err(CliError::Config(format!(
            "key `{key}` must be a positive integer"
        ))),
    }
}

fn positive(key: &str, v: &toml::Value) -> Result<f64, CliError> {
    let x = number(key, v)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(CliError::Config(format!(
            "key `{key}` must be positive, got {x}"
        )));
    }
    Ok(x)
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let table: toml::Table =
            toml::from_str(text).map_err(|e| CliError::Config(format!("bad config: {e}")))?;

        let mut param_map = BTreeMap::new();
        let mut canonical = BTreeMap::new();
        let mut cfg = RunConfig {
            params: PhysicalParams::air_water(),
            m: 0.0,
            n: 64,
            tol: 1e-10,
            integration_tol: 1e-12,
            omega: None,
            amplitude: 0.0,
            waveform: Waveform::Cosine,
            r0: 1e-3,
            t_end: None,
            n_out: 200,
            chi_min: None,
            chi_max: None,
            chi_points: 21,
            output_dir: None,
            hash: String::new(),
        };

        for (key, value) in &table {
            let k = key.as_str();
            if CONFIG_KEYS.contains(&k) {
                let x = number(k, value)?;
                param_map.insert(key.clone(), x);
                canonical.insert(key.clone(), format!("{x:e}"));
                continue;
            }
            match k {
                "N" => cfg.n = count(k, value)?,
                "n_out" => cfg.n_out = count(k, value)?,
                "chi_points" => cfg.chi_points = count(k, value)?,
                "tol" => cfg.tol = positive(k, value)?,
                "integration_tol" => cfg.integration_tol = positive(k, value)?,
                "omega" => cfg.omega = Some(positive(k, value)?),
                "t_end" => cfg.t_end = Some(positive(k, value)?),
                "chi_min" => cfg.chi_min = Some(positive(k, value)?),
                "chi_max" => cfg.chi_max = Some(positive(k, value)?),
                "amplitude" => cfg.amplitude = number(k, value)?,
                "r0" => cfg.r0 = number(k, value)?,
                "waveform" => {
                    cfg.waveform = match value.as_str() {
                        Some("cosine") => Waveform::Cosine,
                        Some("sine") => Waveform::Sine,
                        _ => {
                            return Err(CliError::Config(
                                "waveform must be \"cosine\" or \"sine\"".into(),
                            ))
                        }
                    }
                }
                "output_dir" => match value.as_str() {
                    Some(s) => {
                        cfg.output_dir = Some(PathBuf::from(s));
                        continue;
                    }
                    None => return Err(CliError::Config("output_dir must be a string".into())),
                },
                _ => return Err(CliError::Config(format!("unknown config key `{k}`"))),
            }
            let rendered = match value {
                toml::Value::Float(f) => format!("{f:e}"),
                other => other.to_string(),
            };
            canonical.insert(key.clone(), rendered);
        }

        let (params, m) = PhysicalParams::from_map(&param_map)?;
        cfg.params = params;
        cfg.m = m;
        if !cfg.amplitude.is_finite() || !cfg.r0.is_finite() {
            return Err(CliError::Config("amplitude and r0 must be finite".into()));
        }
        if let (Some(a), Some(b)) = (cfg.chi_min, cfg.chi_max) {
            if a > b {
                return Err(CliError::Config("chi_min exceeds chi_max".into()));
            }
        }

        let mut hasher = Sha256::new();
        for (k, v) in &canonical {
            hasher.update(format!("{k}={v}\n").as_bytes());
        }
        cfg.hash = format!("{:x}", hasher.finalize());
        Ok(cfg)
    }
}
