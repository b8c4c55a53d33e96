//! Run configuration: one flat JSON document per run.

use std::fs;
use std::path::{Path, PathBuf};

use fkpp_core::experiments::{ScenarioParams, SolverSpec};
use fkpp_core::inputs::{KernelSpec, MeasureSpec};
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;
pub const DEFAULT_N: u32 = 256;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUT: &str = "out";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_per_unit: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<SolverSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config =
            serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")))?;
        if cfg.version != CONFIG_VERSION {
            return Err(ConfigError(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    pub fn empty() -> Self {
        Self {
            version: CONFIG_VERSION,
            ..Self::default()
        }
    }

    pub fn measure(&self) -> Result<&MeasureSpec, ConfigError> {
        self.measure
            .as_ref()
            .ok_or_else(|| ConfigError("config needs a 'measure' section".into()))
    }

    pub fn domain(&self) -> Vec<[f64; 2]> {
        self.domain.clone().unwrap_or_else(|| vec![[0.0, 1.0]])
    }

    pub fn n_per_unit(&self) -> u32 {
        self.n_per_unit.unwrap_or(DEFAULT_N)
    }

    pub fn quadrature(&self) -> usize {
        self.quadrature.unwrap_or(fkpp_core::operator::DEFAULT_QUADRATURE)
    }

    pub fn sigma(&self) -> Result<f64, ConfigError> {
        self.sigma
            .ok_or_else(|| ConfigError("config needs 'sigma' for a logistic solve".into()))
    }

    pub fn tolerances(&self) -> SolverSpec {
        self.tolerances.clone().unwrap_or_default()
    }

    /// Scenario parameters with the top-level resolution, tolerances and
    /// `gamma_bar` filled in where the scenario section leaves them open.
    pub fn scenario_params(&self) -> ScenarioParams {
        let mut p = self.scenario.clone().unwrap_or_default();
        if p.n_per_unit.is_none() {
            p.n_per_unit = self.n_per_unit;
        }
        if p.quadrature.is_none() {
            p.quadrature = self.quadrature;
        }
        if p.gamma_bar.is_none() {
            p.gamma_bar = self.gamma_bar;
        }
        if p.solver.is_none() {
            p.solver = self.tolerances.clone();
        }
        p
    }
}
