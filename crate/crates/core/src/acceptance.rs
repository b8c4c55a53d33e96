//! The acceptance suite: twelve pass/fail criteria with pinned tolerances,
//! shared by the `acceptance` test target and `fkpp selftest`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::{emit_report, run_scenario, Report, Scenario, ScenarioKind};
use crate::grid::{build_grid, convolve, make_kernel, Domain1D, GridFunction, KernelKind};
use crate::logistic::{energy_e, grad_e, Classification, LogisticProblem};
use crate::measure::{c_bounds, c_ns, SignedMeasure};
use crate::operator::{assemble_superposition, DEFAULT_QUADRATURE};
use crate::spectral::solve_principal;

pub const LAPLACE_REL_TOL: f64 = 0.01;
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;
pub const CONSTANT_TOL: f64 = 1e-12;
pub const CONSTANT_SAMPLES: usize = 1000;
pub const SCALING_REL_TOL: f64 = 0.02;
pub const TRIVIAL_SUP: f64 = 1e-6;
pub const NONTRIVIAL_SUP: f64 = 1e-3;
pub const GRADIENT_REL_TOL: f64 = 1e-5;
pub const GRADIENT_STATES: usize = 20;
pub const WEAK_RESIDUAL_TOL: f64 = 1e-8;
pub const CONVOLUTION_PAIRS: usize = 100;
pub const KERNEL_MASS_TOL: f64 = 1e-14;

pub const CRITERIA: [&str; 12] = [
    "local eigenvalue reference",
    "normalization constant",
    "scaling law",
    "extinction/survival dichotomy",
    "negative component enables survival",
    "fragmentation",
    "two-measure crossover",
    "modulus inequality pair",
    "gradient check",
    "weak-form residuals",
    "convolution and kernel invariants",
    "determinism",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2}: {} ({})",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail
        )
    }
}

/// Scenario reports are computed at most once per suite and shared between
/// criteria.
pub struct Suite {
    seed: u64,
    scratch: PathBuf,
    reports: BTreeMap<ScenarioKind, std::result::Result<Report, String>>,
}

impl Suite {
    /// `scratch` receives the report files compared by the determinism
    /// criterion.
    pub fn new(seed: u64, scratch: &Path) -> Self {
        Self {
            seed,
            scratch: scratch.to_path_buf(),
            reports: BTreeMap::new(),
        }
    }

    fn report(&mut self, kind: ScenarioKind) -> std::result::Result<&Report, String> {
        let seed = self.seed;
        self.reports
            .entry(kind)
            .or_insert_with(|| run_scenario(&Scenario::new(kind, seed)).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn run(&mut self, id: usize) -> Verdict {
        assert!((1..=CRITERIA.len()).contains(&id), "criteria are numbered 1 to 12");
        let outcome = match id {
            1 => local_reference(),
            2 => constant_formula(),
            3 => scaling_law(),
            4 => self.dichotomy(),
            5 => self.scenario_verdict(ScenarioKind::NegativeComponent),
            6 => self.scenario_verdict(ScenarioKind::Fragmentation),
            7 => self.scenario_verdict(ScenarioKind::TwoMeasures),
            8 => self.scenario_verdict(ScenarioKind::ModulusCounterexample),
            9 => gradient_check(self.seed),
            10 => self.residuals(),
            11 => convolution_invariants(self.seed),
            _ => self.determinism(),
        };
        let (passed, detail) = match outcome {
            Ok(pair) => pair,
            Err(e) => (false, format!("error: {e}")),
        };
        Verdict {
            id,
            title: CRITERIA[id - 1],
            passed,
            detail,
        }
    }

    pub fn run_all(&mut self) -> Vec<Verdict> {
        (1..=CRITERIA.len()).map(|id| self.run(id)).collect()
    }

    /// Writes every scenario report of the suite under `out`.
    pub fn emit_reports(&mut self, out: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for kind in ScenarioKind::ALL {
            written.extend(emit_report(self.scenario(kind)?, out)?);
        }
        Ok(written)
    }

    fn scenario(&mut self, kind: ScenarioKind) -> Result<&Report> {
        self.report(kind).map_err(Error::Numerical)
    }

    fn scenario_verdict(&mut self, kind: ScenarioKind) -> Result<(bool, String)> {
        let r = self.scenario(kind)?;
        let failures = r.failures();
        let detail = if r.inconclusive {
            format!("{kind} inconclusive: {}", r.notes.join("; "))
        } else if failures.is_empty() {
            format!("{kind}: {} checks hold", r.checks.len())
        } else {
            format!("{kind} failed: {}", failures.join(", "))
        };
        Ok((r.paper_consistent == Some(true), detail))
    }

    fn dichotomy(&mut self) -> Result<(bool, String)> {
        let r = self.scenario(ScenarioKind::ExtinctionSurvival)?;
        let low = r.solves.get("sigma=9");
        let high = r.solves.get("sigma=12");
        let (Some(low), Some(high)) = (low, high) else {
            return Ok((false, "missing sigma = 9 or sigma = 12 solve".into()));
        };
        let ok = r.paper_consistent == Some(true)
            && low.classification == Classification::Trivial
            && low.sup_norm <= TRIVIAL_SUP
            && high.classification == Classification::Nontrivial
            && high.sup_norm >= NONTRIVIAL_SUP
            && high.energy < 0.0;
        Ok((
            ok,
            format!(
                "sigma=9: sup {:.3e}; sigma=12: sup {:.4}, E {:.4e}",
                low.sup_norm, high.sup_norm, high.energy
            ),
        ))
    }

    fn residuals(&mut self) -> Result<(bool, String)> {
        let mut worst_eigen = 0.0_f64;
        let unit = Domain1D::interval(0.0, 1.0)?;
        let cases = [
            (SignedMeasure::dirac(1.0, 1.0)?, 512),
            (SignedMeasure::three_atom_example(0.6, 0.3, 0.05)?, 256),
            (SignedMeasure::dirac(0.2, 1.0)?, 128),
        ];
        for (mu, n) in &cases {
            let s = solve_principal(&unit, mu, *n, DEFAULT_QUADRATURE)?;
            worst_eigen = worst_eigen.max(s.pair.residual);
        }
        let mut worst_weak = 0.0_f64;
        let mut count = 0;
        for kind in [
            ScenarioKind::ExtinctionSurvival,
            ScenarioKind::NegativeComponent,
            ScenarioKind::Fragmentation,
            ScenarioKind::ScalingSurvival,
            ScenarioKind::TwoMeasures,
        ] {
            for s in self.scenario(kind)?.solves.values().filter(|s| s.converged) {
                worst_weak = worst_weak.max(s.weak_residual);
                count += 1;
            }
        }
        Ok((
            worst_eigen <= EIGEN_RESIDUAL_TOL && worst_weak <= WEAK_RESIDUAL_TOL && count > 0,
            format!(
                "max eigen residual {worst_eigen:.3e}, max weak residual {worst_weak:.3e} over {count} solves"
            ),
        ))
    }

    fn determinism(&mut self) -> Result<(bool, String)> {
        let first = self.scratch.join("rerun_a");
        let second = self.scratch.join("rerun_b");
        let mut files = 0;
        let mut mismatched = Vec::new();
        for kind in ScenarioKind::ALL {
            let a = emit_report(self.scenario(kind)?, &first)?;
            let again = run_scenario(&Scenario::new(kind, self.seed))?;
            let b = emit_report(&again, &second)?;
            if a.len() != b.len() {
                mismatched.push(format!("{kind}: file count"));
                continue;
            }
            for (pa, pb) in a.iter().zip(&b) {
                let read = |p: &Path| fs::read(p).map_err(|e| Error::io(p, e));
                files += 1;
                if read(pa)? != read(pb)? {
                    mismatched.push(pa.display().to_string());
                }
            }
        }
        Ok((
            mismatched.is_empty(),
            if mismatched.is_empty() {
                format!("{files} report files byte-identical across reruns")
            } else {
                format!("differing: {}", mismatched.join(", "))
            },
        ))
    }
}

fn local_reference() -> Result<(bool, String)> {
    let pi2 = std::f64::consts::PI.powi(2);
    let s = solve_principal(
        &Domain1D::interval(0.0, 1.0)?,
        &SignedMeasure::dirac(1.0, 1.0)?,
        512,
        DEFAULT_QUADRATURE,
    )?;
    let rel = (s.pair.lambda / pi2 - 1.0).abs();
    Ok((
        rel <= LAPLACE_REL_TOL && s.pair.residual <= EIGEN_RESIDUAL_TOL,
        format!(
            "lambda {:.6} vs pi^2, relative error {rel:.3e}, residual {:.3e}",
            s.pair.lambda, s.pair.residual
        ),
    ))
}

fn constant_formula() -> Result<(bool, String)> {
    let half = (c_ns(1, 0.5) - 1.0 / (2.0 * std::f64::consts::PI)).abs();
    let endpoints = (1..=3).all(|n| c_ns(n, 0.0) == 0.0 && c_ns(n, 1.0) == 0.0);
    let (s_bar, delta) = (0.5, 0.25);
    let mut violations = 0;
    for n in 1..=3 {
        let b = c_bounds(n, s_bar, delta)?;
        for k in 0..CONSTANT_SAMPLES {
            let t = (k as f64 + 0.5) / CONSTANT_SAMPLES as f64;
            if c_ns(n, t) > b.c_up {
                violations += 1;
            }
            let s = s_bar + (1.0 - delta - s_bar) * t;
            if c_ns(n, s) < b.c_low_times_delta {
                violations += 1;
            }
        }
    }
    Ok((
        half <= CONSTANT_TOL && endpoints && violations == 0,
        format!("|c(1,1/2) - 1/(2 pi)| = {half:.1e}, endpoints zero: {endpoints}, bound violations {violations}"),
    ))
}

fn scaling_law() -> Result<(bool, String)> {
    let mu = SignedMeasure::dirac(0.5, 1.0)?;
    let unit = Domain1D::interval(0.0, 1.0)?;
    let n = 256;
    let base = solve_principal(&unit, &mu, n, DEFAULT_QUADRATURE)?.pair.lambda;
    let mut worst = 0.0_f64;
    for r in [0.5, 2.0] {
        let lam = solve_principal(&unit.scaled(r)?, &mu, n, DEFAULT_QUADRATURE)?.pair.lambda;
        worst = worst.max((lam * r / base - 1.0).abs());
    }
    Ok((
        worst <= SCALING_REL_TOL,
        format!("max |lambda(r) r / lambda - 1| = {worst:.3e} over r in {{1/2, 2}}"),
    ))
}

fn gradient_check(seed: u64) -> Result<(bool, String)> {
    let unit = Domain1D::interval(0.0, 1.0)?;
    let pieces = unit.union(&Domain1D::interval(2.0, 3.0)?)?;
    let setups = [
        (unit.clone(), SignedMeasure::dirac(1.0, 1.0)?, 0.0, KernelKind::Tophat),
        (unit, SignedMeasure::three_atom_example(0.6, 0.3, 0.05)?, 0.5, KernelKind::Gaussian),
        (
            pieces,
            SignedMeasure::new(
                crate::measure::MeasureComponent::new(
                    vec![
                        crate::measure::Atom { s: 1.0, weight: 1.0 },
                        crate::measure::Atom { s: 0.5, weight: 1.0 },
                    ],
                    vec![],
                )?,
                crate::measure::MeasureComponent::zero(),
                0.5,
                1,
            )?,
            0.25,
            KernelKind::Tophat,
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut worst = 0.0_f64;
    for (k, (domain, mu, tau, kind)) in setups.iter().enumerate() {
        let grid = build_grid(domain, 64)?;
        let op = assemble_superposition(&grid, mu, DEFAULT_QUADRATURE)?;
        let kernel = make_kernel(*kind, 0.1, &grid)?;
        let sigma = GridFunction::from_fn(grid.clone(), |x| 10.0 + 3.0 * (5.0 * x).sin());
        let nu = GridFunction::from_fn(grid.clone(), |x| 1.0 + 0.5 * (3.0 * x).cos());
        let problem = LogisticProblem::new(sigma, nu, *tau, kernel, None)?;
        let states = GRADIENT_STATES / setups.len() + usize::from(k < GRADIENT_STATES % setups.len());
        for _ in 0..states {
            let u = GridFunction::from_fn(grid.clone(), |_| rng.gen_range(-1.0..1.0));
            let v = GridFunction::from_fn(grid.clone(), |_| rng.gen_range(-1.0..1.0));
            let g = grad_e(&problem, &op, &u)?;
            let exact: f64 = g.values().iter().zip(v.values()).map(|(a, b)| a * b).sum();
            let t = 1e-6;
            let shift = |sign: f64| {
                let w: Vec<f64> =
                    u.values().iter().zip(v.values()).map(|(a, b)| a + sign * t * b).collect();
                u.with_values(w)
            };
            let fd = (energy_e(&problem, &op, &shift(1.0)?)? - energy_e(&problem, &op, &shift(-1.0)?)?)
                / (2.0 * t);
            worst = worst.max((fd - exact).abs() / exact.abs().max(f64::MIN_POSITIVE));
        }
    }
    Ok((
        worst <= GRADIENT_REL_TOL,
        format!("max relative error {worst:.3e} over {GRADIENT_STATES} states in 3 problems"),
    ))
}

fn convolution_invariants(seed: u64) -> Result<(bool, String)> {
    let grid = build_grid(&Domain1D::interval(0.0, 1.0)?, 128)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5bd1_e995);
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut mass_err = 0.0_f64;
    let mut symmetric = true;
    for (kind, width) in [
        (KernelKind::Tophat, 0.05),
        (KernelKind::Tophat, 0.3),
        (KernelKind::Gaussian, 0.05),
        (KernelKind::Gaussian, 0.2),
    ] {
        let k = make_kernel(kind, width, &grid)?;
        mass_err = mass_err.max((k.mass() - 1.0).abs());
        let reach = k.reach() as i64;
        symmetric &= (1..=reach).all(|j| k.weight(j) == k.weight(-j));
        for _ in 0..CONVOLUTION_PAIRS / 4 {
            let u = GridFunction::from_fn(grid.clone(), |_| rng.gen_range(-1.0..1.0));
            let v = GridFunction::from_fn(grid.clone(), |_| rng.gen_range(-1.0..1.0));
            let lhs = v.inner(&convolve(&k, &u)?)?;
            worst_ratio = worst_ratio.max(lhs / (u.norm_l2() * v.norm_l2()));
        }
    }
    Ok((
        worst_ratio <= 1.0 && mass_err <= KERNEL_MASS_TOL && symmetric,
        format!(
            "max <v, J*u>/(|u||v|) = {worst_ratio:.4} over {CONVOLUTION_PAIRS} pairs, mass error {mass_err:.1e}, symmetric: {symmetric}"
        ),
    ))
}
