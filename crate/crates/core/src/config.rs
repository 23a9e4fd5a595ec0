//! Parameter files and the normalized configuration report.
//!
//! A parameter file is a flat `key = value` document (TOML syntax) with
//! ordinary frequencies in Hz:
//!
//! ```text
//! omega_m_hz = 9.22e6
//! gamma_hz   = 120.0
//! kappa_hz   = 1.06e6
//! g0_hz      = 39.0
//! n_th       = 32.0
//! n_max      = 1e10
//! # n_ba     = 0.0008   (optional)
//! ```

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::PhysParams;
use crate::params::Sideband;

const REQUIRED: [&str; 6] = ["omega_m_hz", "gamma_hz", "kappa_hz", "g0_hz", "n_th", "n_max"];
const OPTIONAL: [&str; 1] = ["n_ba"];

/// Names accepted by [`ParamFile::preset`].
pub const PRESETS: [&str; 3] = ["paper_device", "paper_device_probe", "scaled"];

/// Raw parameter file contents, frequencies in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamFile {
    pub omega_m_hz: f64,
    pub gamma_hz: f64,
    pub kappa_hz: f64,
    pub g0_hz: f64,
    pub n_th: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_ba: Option<f64>,
    pub n_max: f64,
}

impl ParamFile {
    pub fn paper_device() -> Self {
        ParamFile {
            omega_m_hz: 9.22e6,
            gamma_hz: 120.0,
            kappa_hz: 1.06e6,
            g0_hz: 39.0,
            // technical heating level used for the bandwidth sweeps
            n_th: 32.0,
            n_ba: None,
            n_max: 1e10,
        }
    }

    pub fn paper_device_probe() -> Self {
        ParamFile {
            gamma_hz: 220.0,
            n_th: 12.1,
            ..Self::paper_device()
        }
    }

    /// Dimensionless set (`kappa = 1`); "Hz" values are the rates over 2 pi.
    pub fn scaled() -> Self {
        ParamFile {
            omega_m_hz: 10.0 / TAU,
            gamma_hz: 1e-3 / TAU,
            kappa_hz: 1.0 / TAU,
            g0_hz: 1e-3 / TAU,
            n_th: 100.0,
            n_ba: Some(0.0),
            n_max: 1e6,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "paper_device" => Some(Self::paper_device()),
            "paper_device_probe" => Some(Self::paper_device_probe()),
            "scaled" => Some(Self::scaled()),
            _ => None,
        }
    }

    /// Parses file contents, collecting every missing, non-numeric or NaN
    /// key into one error.
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::ParamFile(e.message().to_string()))?;
        let mut problems = Vec::new();
        let mut get = |key: &str, required: bool| -> Option<f64> {
            match table.get(key) {
                None => {
                    if required {
                        problems.push(format!("{key}: missing"));
                    }
                    None
                }
                Some(v) => {
                    let x = match v {
                        toml::Value::Float(f) => Some(*f),
                        toml::Value::Integer(i) => Some(*i as f64),
                        _ => None,
                    };
                    match x {
                        Some(x) if x.is_nan() => {
                            problems.push(format!("{key}: NaN"));
                            None
                        }
                        Some(x) => Some(x),
                        None => {
                            problems.push(format!("{key}: not a number ({v})"));
                            None
                        }
                    }
                }
            }
        };
        let vals: Vec<Option<f64>> = REQUIRED.iter().map(|k| get(k, true)).collect();
        let n_ba = get(OPTIONAL[0], false);
        for key in table.keys() {
            if !REQUIRED.contains(&key.as_str()) && !OPTIONAL.contains(&key.as_str()) {
                problems.push(format!("{key}: unknown key"));
            }
        }
        if !problems.is_empty() {
            return Err(Error::ParamFile(problems.join("; ")));
        }
        let v = |i: usize| vals[i].expect("checked above");
        Ok(ParamFile {
            omega_m_hz: v(0),
            gamma_hz: v(1),
            kappa_hz: v(2),
            g0_hz: v(3),
            n_th: v(4),
            n_ba,
            n_max: v(5),
        })
    }

    /// Resolves a bundled preset name or reads a file.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if let Some(p) = Self::preset(name_or_path) {
            return Ok(p);
        }
        let text = std::fs::read_to_string(Path::new(name_or_path))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat table serializes")
    }

    pub fn to_params(&self) -> Result<PhysParams<f64>> {
        PhysParams::new(
            TAU * self.omega_m_hz,
            TAU * self.gamma_hz,
            TAU * self.kappa_hz,
            TAU * self.g0_hz,
            self.n_th,
            self.n_ba,
            self.n_max,
        )
    }
}

/// One physical quantity in both conventions.
#[derive(Debug, Clone, Serialize)]
pub struct Rate {
    pub hz: f64,
    pub rad_s: f64,
}

impl Rate {
    fn from_rad(rad_s: f64) -> Self {
        Rate {
            hz: rad_s / TAU,
            rad_s,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigReport {
    pub omega_m: Rate,
    pub gamma: Rate,
    pub kappa: Rate,
    pub g0: Rate,
    pub n_th: f64,
    pub n_ba: f64,
    pub n_ba_defaulted: bool,
    pub n_max: f64,
    /// Coherent blue-tone photon number at which damping vanishes.
    pub threshold_photons: f64,
    /// Flux producing `threshold_photons`, photons/s.
    pub threshold_flux: f64,
    pub q_red: f64,
    pub q_blue: f64,
    pub warnings: Vec<String>,
}

/// Normalizes a parameter file into a report, or an itemized error.
///
/// `sample_dt`, when given, is checked against the widest drive band the
/// sideband geometry allows (`2 omega_m`).
pub fn validate_config(file: &ParamFile, sample_dt: Option<f64>) -> Result<ConfigReport> {
    let p = file.to_params()?;
    let mut warnings = Vec::new();
    if !p.is_resolved() {
        warnings.push(format!(
            "sideband not resolved: kappa/2pi = {:e} Hz >= omega_m/2pi = {:e} Hz; analytic models are invalid",
            file.kappa_hz, file.omega_m_hz
        ));
    } else if p.kappa > 0.3 * p.omega_m {
        warnings.push(format!(
            "weak sideband resolution: kappa/omega_m = {:.3}",
            p.kappa / p.omega_m
        ));
    }
    if p.g0 == 0.0 {
        warnings.push("g0 = 0: drive has no effect".into());
    }
    if let Some(dt) = sample_dt {
        let nyquist = std::f64::consts::PI / dt;
        if p.omega_m > nyquist {
            warnings.push(format!(
                "sample step {dt:e} s cannot represent a band up to the carrier (Nyquist {nyquist:e} rad/s < omega_m)"
            ));
        }
        if dt * p.kappa > 0.1 {
            warnings.push(format!("dt * kappa = {:.3} > 0.1", dt * p.kappa));
        }
    }
    let threshold = crate::analytic::AnalyticModel::unchecked(&p).self_oscillation_threshold_photons();
    Ok(ConfigReport {
        omega_m: Rate::from_rad(p.omega_m),
        gamma: Rate::from_rad(p.gamma),
        kappa: Rate::from_rad(p.kappa),
        g0: Rate::from_rad(p.g0),
        n_th: p.n_th,
        n_ba: p.n_ba,
        n_ba_defaulted: file.n_ba.is_none(),
        n_max: p.n_max,
        threshold_photons: threshold,
        threshold_flux: p.flux_from_nbar0(threshold),
        q_red: p.q_parameter(Sideband::Red),
        q_blue: p.q_parameter(Sideband::Blue),
        warnings,
    })
}
