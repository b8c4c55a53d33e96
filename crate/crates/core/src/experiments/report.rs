use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ScenarioKind, ScenarioParams};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::logistic::{Classification, SolveSummary};
use crate::measure::HypothesisReport;

/// Open eigenvalue window `(lo, hi)` for the resource level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
    /// Smallest width accepted: ten times the absolute eigen residual.
    pub resolution: f64,
    pub sigma: Option<f64>,
    pub nonempty: bool,
}

impl Window {
    pub(crate) fn new(lo: f64, hi: f64, abs_residual: f64) -> Self {
        let width = hi - lo;
        let resolution = 10.0 * abs_residual;
        let nonempty = width > resolution;
        Self {
            lo,
            hi,
            width,
            resolution,
            sigma: nonempty.then_some(0.5 * (lo + hi)),
            nonempty,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub params: ScenarioParams,
    pub hypotheses: BTreeMap<String, HypothesisReport>,
    pub metadata: BTreeMap<String, f64>,
    pub eigenvalues: BTreeMap<String, f64>,
    pub windows: BTreeMap<String, Window>,
    pub classifications: BTreeMap<String, Classification>,
    pub slacks: BTreeMap<String, f64>,
    pub checks: BTreeMap<String, bool>,
    pub solves: BTreeMap<String, SolveSummary>,
    pub notes: Vec<String>,
    pub inconclusive: bool,
    /// `None` when the run is inconclusive.
    pub paper_consistent: Option<bool>,
    #[serde(skip)]
    pub profiles: BTreeMap<String, GridFunction>,
}

impl Report {
    pub(crate) fn new(kind: ScenarioKind, seed: u64, params: ScenarioParams) -> Self {
        Self {
            kind,
            seed,
            params,
            hypotheses: BTreeMap::new(),
            metadata: BTreeMap::new(),
            eigenvalues: BTreeMap::new(),
            windows: BTreeMap::new(),
            classifications: BTreeMap::new(),
            slacks: BTreeMap::new(),
            checks: BTreeMap::new(),
            solves: BTreeMap::new(),
            notes: Vec::new(),
            inconclusive: false,
            paper_consistent: None,
            profiles: BTreeMap::new(),
        }
    }

    pub(crate) fn check(&mut self, name: impl Into<String>, ok: bool) -> bool {
        self.checks.insert(name.into(), ok);
        ok
    }

    pub(crate) fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub(crate) fn finish(mut self) -> Self {
        self.paper_consistent = (!self.inconclusive).then(|| self.checks.values().all(|ok| *ok));
        self
    }

    /// Names of failed checks.
    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|(_, ok)| !**ok)
            .map(|(k, _)| k.as_str())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn table(rows: &BTreeMap<String, f64>) -> String {
    let mut out = String::from("name,value\n");
    for (k, v) in rows {
        out.push_str(&format!("{k},{v}\n"));
    }
    out
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

/// Writes `<out>/<kind>/report.json`, `eigenvalues.csv`, `slacks.csv` and one
/// `profile_<name>.csv` per stored grid function. Returns the written paths.
pub fn emit_report(report: &Report, out: &Path) -> Result<Vec<PathBuf>> {
    let dir = out.join(report.kind.name());
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut written = Vec::new();

    let path = dir.join("report.json");
    write(&path, &report.to_json()?)?;
    written.push(path);

    let path = dir.join("eigenvalues.csv");
    write(&path, &table(&report.eigenvalues))?;
    written.push(path);

    let path = dir.join("slacks.csv");
    write(&path, &table(&report.slacks))?;
    written.push(path);

    for (name, u) in &report.profiles {
        let path = dir.join(format!("profile_{}.csv", file_stem(name)));
        let mut text = String::from("x,u\n");
        for (x, v) in u.grid().nodes().iter().zip(u.values()) {
            text.push_str(&format!("{x},{v}\n"));
        }
        write(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}
