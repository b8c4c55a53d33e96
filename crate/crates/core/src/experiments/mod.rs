//! Scenario harness: each kind builds the construction behind one survival or
//! extinction result, runs the eigen and logistic pipelines, and records
//! every inequality it relies on together with its slack.

mod report;
mod scenarios;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inputs::{KernelSpec, MeasureSpec};
use crate::logistic::{DescentMetric, SolveOptions};

pub use report::{emit_report, Report, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    ExtinctionSurvival,
    NegativeComponent,
    Fragmentation,
    ScalingSurvival,
    TwoMeasures,
    ModulusCounterexample,
    AppendixCheck,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 7] = [
        ScenarioKind::ExtinctionSurvival,
        ScenarioKind::NegativeComponent,
        ScenarioKind::Fragmentation,
        ScenarioKind::ScalingSurvival,
        ScenarioKind::TwoMeasures,
        ScenarioKind::ModulusCounterexample,
        ScenarioKind::AppendixCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::ExtinctionSurvival => "extinction_survival",
            ScenarioKind::NegativeComponent => "negative_component",
            ScenarioKind::Fragmentation => "fragmentation",
            ScenarioKind::ScalingSurvival => "scaling_survival",
            ScenarioKind::TwoMeasures => "two_measures",
            ScenarioKind::ModulusCounterexample => "modulus_counterexample",
            ScenarioKind::AppendixCheck => "appendix_check",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('-', "_");
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::InvalidInput(format!("unknown scenario kind '{s}'")))
    }
}

/// Solver overrides; anything left out keeps the library default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<DescentMetric>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trivial_factor: Option<f64>,
}

impl SolverSpec {
    pub fn options(&self, seed: u64) -> SolveOptions {
        let d = SolveOptions::default();
        SolveOptions {
            tol: self.tol.or(d.tol),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            metric: self.metric.unwrap_or(d.metric),
            projection: d.projection,
            trivial_factor: self.trivial_factor.unwrap_or(d.trivial_factor),
            seed,
        }
    }
}

/// Scenario inputs. Every field is optional; missing ones take the defaults
/// of the scenario kind, and the resolved values are echoed in the report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_per_unit: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureSpec>,
    /// Second measure (two_measures) or the passing comparison measure
    /// (modulus_counterexample).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure2: Option<MeasureSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<[f64; 2]>>,
    /// Second congruent piece (fragmentation).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain2: Option<Vec<[f64; 2]>>,
    /// Explicit resource levels; auto-selected when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    /// Dilation factor (scaling_survival); auto-selected when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    /// Weight of the negative atom in the three-atom measure.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_bar: Option<f64>,
    /// Random test functions per sampled inequality.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Relative tolerance for discretized equalities such as the scaling law.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub params: ScenarioParams,
    pub seed: u64,
}

impl Scenario {
    pub fn new(kind: ScenarioKind, seed: u64) -> Self {
        Self {
            kind,
            params: ScenarioParams::default(),
            seed,
        }
    }

    pub fn with_params(kind: ScenarioKind, params: ScenarioParams, seed: u64) -> Self {
        Self { kind, params, seed }
    }
}

pub fn run_scenario(sc: &Scenario) -> Result<Report> {
    scenarios::run(sc)
}
