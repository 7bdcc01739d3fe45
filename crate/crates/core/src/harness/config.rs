//! TOML experiment configuration.

use crate::diffuse::Bc;
use crate::error::{Error, Result};
use crate::potential::Potential;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    StationaryCircle,
    TwoCircles,
    FlatInterface,
    CoupledNsac,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum PotentialConfig {
    Named(String),
    Coefficients(Vec<f64>),
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig::Named("standard".into())
    }
}

impl PotentialConfig {
    pub fn build(&self) -> Result<Potential> {
        match self {
            PotentialConfig::Named(name) if name == "standard" => Ok(Potential::standard()),
            PotentialConfig::Named(name) => {
                Err(Error::InvalidConfig(format!("unknown potential '{name}'")))
            }
            PotentialConfig::Coefficients(c) => Potential::user_polynomial(c.clone()),
        }
    }
}

fn default_order() -> u8 {
    1
}
fn default_dt_factor() -> f64 {
    0.25
}
fn default_points_per_eps() -> f64 {
    4.0
}
fn default_output_every() -> usize {
    50
}
fn default_nu() -> f64 {
    1.0
}
fn default_radius() -> f64 {
    1.0
}
fn default_curve_samples() -> usize {
    512
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub eps_list: Vec<f64>,
    #[serde(default = "default_order")]
    pub order: u8,
    pub t_end: f64,
    /// dt = dt_factor * eps^2 for phase-field runs
    #[serde(default = "default_dt_factor")]
    pub dt_factor: f64,
    /// grid rule: hx = eps / points_per_eps (must be >= 2)
    #[serde(default = "default_points_per_eps")]
    pub points_per_eps: f64,
    /// square domain side
    pub domain: f64,
    #[serde(default)]
    pub walls: bool,
    #[serde(default = "default_nu")]
    pub nu_plus: f64,
    #[serde(default = "default_nu")]
    pub nu_minus: f64,
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default)]
    pub radius2: Option<f64>,
    #[serde(default = "default_output_every")]
    pub output_every: usize,
    #[serde(default = "default_curve_samples")]
    pub curve_samples: usize,
}

impl ExperimentConfig {
    pub fn bc(&self) -> Bc {
        if self.walls {
            Bc::WallNeumannNoSlip
        } else {
            Bc::Periodic
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_list.is_empty() {
            return Err(Error::InvalidConfig("eps_list must not be empty".into()));
        }
        if self.points_per_eps < 2.0 {
            return Err(Error::InvalidConfig(format!(
                "points_per_eps = {} violates the resolution rule hx <= eps/2",
                self.points_per_eps
            )));
        }
        if !(self.t_end > 0.0) || !(self.domain > 0.0) {
            return Err(Error::InvalidConfig("t_end and domain must be positive".into()));
        }
        for &e in &self.eps_list {
            if !(e > 0.0) {
                return Err(Error::InvalidConfig(format!("eps = {e} must be positive")));
            }
        }
        self.potential.build()?;
        Ok(())
    }

    /// Grid size for a given eps under the rule hx = eps/points_per_eps,
    /// rounded up to the next even integer.
    pub fn grid_size(&self, eps: f64) -> usize {
        let n = (self.domain / (eps / self.points_per_eps)).ceil() as usize;
        n + n % 2
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
