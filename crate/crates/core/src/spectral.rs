//! Principal eigenpair of `A_μ` and the eigenvalue comparisons behind the
//! domain-geometry results.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{Cholesky, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_grid, dot, Domain1D, Grid, GridFunction};
use crate::measure::SignedMeasure;
use crate::operator::{assemble_superposition, dense_eigen, form_value, FormPart, SuperposedOperator};

/// Relative gap above which the principal eigenvalue counts as simple.
pub const SIMPLICITY_GAP: f64 = 1e-8;

const INVERSE_ITERATION_TOL: f64 = 1e-13;
const INVERSE_ITERATION_MAX: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    Dense,
    InverseIteration,
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    pub lambda2: f64,
    /// L²-normalized, oriented to have nonnegative mean.
    pub e: GridFunction,
    /// `‖A_μ e − λ e‖_{L²} / |λ|`.
    pub residual: f64,
    pub gap: f64,
    pub sign_violation: f64,
    pub method: EigenMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSummary {
    pub lambda: f64,
    pub lambda2: f64,
    pub residual: f64,
    pub gap: f64,
    pub simple: bool,
    pub sign_violation: f64,
    pub method: EigenMethod,
    pub nodes: usize,
    pub h: f64,
}

impl EigenPair {
    pub fn is_simple(&self) -> bool {
        self.gap > SIMPLICITY_GAP * self.lambda.abs()
    }

    pub fn summary(&self) -> EigenSummary {
        EigenSummary {
            lambda: self.lambda,
            lambda2: self.lambda2,
            residual: self.residual,
            gap: self.gap,
            simple: self.is_simple(),
            sign_violation: self.sign_violation,
            method: self.method,
            nodes: self.e.grid().len(),
            h: self.e.grid().h(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_profile_csv(path, "e", &self.e)
    }
}

pub(crate) fn write_profile_csv(path: &Path, column: &str, u: &GridFunction) -> Result<()> {
    let mut out = String::with_capacity(32 * u.values().len());
    out.push_str("x,");
    out.push_str(column);
    out.push('\n');
    for (x, v) in u.grid().nodes().iter().zip(u.values()) {
        out.push_str(&format!("{x},{v}\n"));
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn principal_eigen(op: &SuperposedOperator) -> Result<EigenPair> {
    principal_eigen_with(op, EigenMethod::Dense)
}

pub fn principal_eigen_with(op: &SuperposedOperator, method: EigenMethod) -> Result<EigenPair> {
    if op.dim() == 0 {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    let (lambda, lambda2, vector) = match method {
        EigenMethod::Dense => dense_path(op)?,
        EigenMethod::InverseIteration => inverse_iteration_path(op)?,
    };
    Ok(finish(op, lambda, lambda2, vector, method))
}

fn dense_path(op: &SuperposedOperator) -> Result<(f64, f64, Vec<f64>)> {
    let eig = dense_eigen(op.a_mu());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lambda = eig.eigenvalues[order[0]];
    op.seed_margin(lambda);
    if lambda <= 0.0 {
        return Err(Error::NotCoercive { margin: lambda });
    }
    let lambda2 = order.get(1).map_or(f64::INFINITY, |&k| eig.eigenvalues[k]);
    let vector = eig.eigenvectors.column(order[0]).iter().copied().collect();
    Ok((lambda, lambda2, vector))
}

fn inverse_iteration_path(op: &SuperposedOperator) -> Result<(f64, f64, Vec<f64>)> {
    let chol = Cholesky::new(op.a_mu().clone()).ok_or_else(|| Error::NotCoercive {
        margin: op.coercivity_margin(),
    })?;
    let n = op.dim();
    let (lambda, first) = inverse_iteration(op, &chol, vec![1.0; n], None)?;
    let lambda2 = if n > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let start: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        inverse_iteration(op, &chol, start, Some(&first))?.0
    } else {
        f64::INFINITY
    };
    Ok((lambda, lambda2, first))
}

/// Inverse power iteration, optionally kept orthogonal to a unit vector.
fn inverse_iteration(
    op: &SuperposedOperator,
    chol: &Cholesky<f64, nalgebra::Dyn>,
    start: Vec<f64>,
    deflate: Option<&[f64]>,
) -> Result<(f64, Vec<f64>)> {
    let project = |x: &mut DVector<f64>| {
        if let Some(d) = deflate {
            let c = dot(x.as_slice(), d);
            for (xi, di) in x.iter_mut().zip(d) {
                *xi -= c * di;
            }
        }
    };
    let mut x = DVector::from_vec(start);
    project(&mut x);
    x /= x.norm();
    let mut lambda = f64::NAN;
    for _ in 0..INVERSE_ITERATION_MAX {
        let mut y = chol.solve(&x);
        project(&mut y);
        let norm = y.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Numerical("inverse iteration collapsed".into()));
        }
        x = y / norm;
        let ax = op.a_mu() * &x;
        lambda = x.dot(&ax);
        let residual = (ax - &x * lambda).norm() / lambda.abs();
        if residual < INVERSE_ITERATION_TOL {
            return Ok((lambda, x.as_slice().to_vec()));
        }
    }
    // Degenerate eigenvalues stall the vector but not the Rayleigh quotient.
    Ok((lambda, x.as_slice().to_vec()))
}

fn finish(
    op: &SuperposedOperator,
    lambda: f64,
    lambda2: f64,
    mut vector: Vec<f64>,
    method: EigenMethod,
) -> EigenPair {
    let grid = op.grid();
    let h = grid.h();
    let norm = (h * dot(&vector, &vector)).sqrt();
    let sign = if vector.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    for v in &mut vector {
        *v *= sign / norm;
    }
    let av = op.apply(&vector);
    let res2: f64 = av
        .iter()
        .zip(&vector)
        .map(|(a, v)| (a - lambda * v).powi(2))
        .sum();
    let residual = (h * res2).sqrt() / lambda.abs();
    let sign_violation = vector.iter().fold(0.0_f64, |m, v| m.max(-v));
    let e = GridFunction::new(grid.clone(), vector).expect("length matches grid");
    EigenPair {
        lambda,
        lambda2,
        e,
        residual,
        gap: lambda2 - lambda,
        sign_violation,
        method,
    }
}

/// `h uᵀA_μu / ‖u‖²_{L²}`.
pub fn rayleigh(op: &SuperposedOperator, u: &GridFunction) -> Result<f64> {
    let num = form_value(op, u, u, FormPart::Signed)?;
    let den = u.norm_l2().powi(2);
    if den == 0.0 {
        return Err(Error::InvalidInput("Rayleigh quotient of the zero function".into()));
    }
    Ok(num / den)
}

/// Largest relative mismatch of `⟨e, v⟩_μ = λ ⟨e, v⟩_{L²}` over random `v`.
pub fn euler_lagrange_mismatch(
    op: &SuperposedOperator,
    pair: &EigenPair,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let v = GridFunction::from_fn(pair.e.grid().clone(), |_| rng.gen_range(-1.0..1.0));
        let lhs = form_value(op, &pair.e, &v, FormPart::Signed)?;
        let rhs = pair.lambda * pair.e.inner(&v)?;
        worst = worst.max((lhs - rhs).abs() / (pair.lambda.abs() * v.norm_l2()));
    }
    Ok(worst)
}

/// Grid, operator and principal eigenpair for one domain and measure.
pub struct Solved {
    pub grid: Arc<Grid>,
    pub op: SuperposedOperator,
    pub pair: EigenPair,
}

pub fn solve_principal(
    domain: &Domain1D,
    mu: &SignedMeasure,
    n_per_unit: u32,
    q: usize,
) -> Result<Solved> {
    let grid = build_grid(domain, n_per_unit)?;
    let op = assemble_superposition(&grid, mu, q)?;
    let pair = principal_eigen(&op)?;
    Ok(Solved { grid, op, pair })
}

fn check_lattice_aligned(domain: &Domain1D, n_per_unit: u32) -> Result<()> {
    let n = n_per_unit as f64;
    for &(a, b) in domain.intervals() {
        for end in [a, b] {
            let cells = end * n;
            if (cells - cells.round()).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "endpoint {end} is not on the lattice of spacing 1/{n_per_unit}"
                )));
            }
        }
    }
    Ok(())
}

/// Two-sided scaling bound `inf_Σ r^{2s} λ(Ω_r) ≤ λ(Ω) ≤ sup_Σ r^{2s} λ(Ω_r)`
/// for a nonnegative measure with support `Σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub r: f64,
    pub support: (f64, f64),
    pub lambda: f64,
    pub lambda_scaled: f64,
    pub lower: f64,
    pub upper: f64,
    /// `λ(Ω_r) r^{2s} / λ(Ω) − 1` for singleton support, else 0.
    pub singleton_deviation: f64,
    pub tolerance: f64,
    pub holds: bool,
}

pub fn scaling_check(
    domain: &Domain1D,
    mu: &SignedMeasure,
    n_per_unit: u32,
    q: usize,
    r: f64,
    tolerance: f64,
) -> Result<ScalingCheck> {
    if mu.has_negative_part() {
        return Err(Error::InvalidInput("scaling bounds apply to nonnegative measures".into()));
    }
    let support = mu
        .plus
        .support()
        .ok_or_else(|| Error::InvalidInput("measure has no mass".into()))?;
    let scaled = domain.scaled(r)?;
    check_lattice_aligned(domain, n_per_unit)?;
    check_lattice_aligned(&scaled, n_per_unit)?;
    let base = solve_principal(domain, mu, n_per_unit, q)?.pair.lambda;
    let lambda_scaled = solve_principal(&scaled, mu, n_per_unit, q)?.pair.lambda;
    let factors = [r.powf(2.0 * support.0), r.powf(2.0 * support.1)];
    let lo_factor = factors[0].min(factors[1]);
    let hi_factor = factors[0].max(factors[1]);
    let lower = lo_factor * lambda_scaled;
    let upper = hi_factor * lambda_scaled;
    let singleton_deviation = if support.0 == support.1 {
        lower / base - 1.0
    } else {
        0.0
    };
    let holds = lower <= base * (1.0 + tolerance)
        && base <= upper * (1.0 + tolerance)
        && singleton_deviation.abs() <= tolerance;
    Ok(ScalingCheck {
        r,
        support,
        lambda: base,
        lambda_scaled,
        lower,
        upper,
        singleton_deviation,
        tolerance,
        holds,
    })
}

/// `U₁ ⊆ U₂` as node sets implies `λ(U₂) ≤ λ(U₁)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityCheck {
    pub lambda_inner: f64,
    pub lambda_outer: f64,
    pub slack: f64,
    pub holds: bool,
}

pub const MONOTONICITY_TOL: f64 = 1e-10;

pub fn monotonicity_check(
    inner: &Domain1D,
    outer: &Domain1D,
    mu: &SignedMeasure,
    n_per_unit: u32,
    q: usize,
) -> Result<MonotonicityCheck> {
    let a = solve_principal(inner, mu, n_per_unit, q)?;
    let b = solve_principal(outer, mu, n_per_unit, q)?;
    if !a.grid.is_subset_of(&b.grid) {
        return Err(Error::InvalidInput("inner domain is not contained in the outer one".into()));
    }
    let slack = a.pair.lambda - b.pair.lambda;
    Ok(MonotonicityCheck {
        lambda_inner: a.pair.lambda,
        lambda_outer: b.pair.lambda,
        slack,
        holds: slack >= -MONOTONICITY_TOL,
    })
}

/// Principal eigenvalues on two disjoint congruent pieces and on their union.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionCheck {
    pub lambda_first: f64,
    pub lambda_second: f64,
    pub lambda_union: f64,
    /// `λ(Ω₁) − λ(Ω₁ ∪ Ω₂)`.
    pub slack: f64,
    pub residual: f64,
    pub strict: bool,
}

pub fn union_check(
    first: &Domain1D,
    second: &Domain1D,
    mu: &SignedMeasure,
    n_per_unit: u32,
    q: usize,
) -> Result<UnionCheck> {
    let union = first.union(second)?;
    let a = solve_principal(first, mu, n_per_unit, q)?;
    let b = solve_principal(second, mu, n_per_unit, q)?;
    let u = solve_principal(&union, mu, n_per_unit, q)?;
    let slack = a.pair.lambda - u.pair.lambda;
    let residual = a
        .pair
        .residual
        .max(b.pair.residual)
        .max(u.pair.residual)
        * a.pair.lambda;
    Ok(UnionCheck {
        lambda_first: a.pair.lambda,
        lambda_second: b.pair.lambda,
        lambda_union: u.pair.lambda,
        slack,
        residual,
        strict: slack > 10.0 * residual,
    })
}

/// `λ(μ⁺ − εμ⁻) < λ(μ⁺)` for each `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativeComponentCheck {
    pub lambda_plus: f64,
    pub entries: Vec<NegativeComponentEntry>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativeComponentEntry {
    pub epsilon: f64,
    pub lambda: f64,
    pub slack: f64,
}

pub fn negative_component_check(
    domain: &Domain1D,
    mu: &SignedMeasure,
    n_per_unit: u32,
    q: usize,
    epsilons: &[f64],
) -> Result<NegativeComponentCheck> {
    if !mu.has_negative_part() {
        return Err(Error::InvalidInput("measure has no negative component".into()));
    }
    let grid = build_grid(domain, n_per_unit)?;
    let plus = assemble_superposition(&grid, &mu.positive_part(), q)?;
    let lambda_plus = principal_eigen(&plus)?.lambda;
    let mut entries = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let op = assemble_superposition(&grid, &mu.with_negative_scaled(eps)?, q)?;
        let pair = principal_eigen(&op)?;
        entries.push(NegativeComponentEntry {
            epsilon: eps,
            lambda: pair.lambda,
            slack: lambda_plus - pair.lambda,
        });
    }
    let holds = entries.iter().all(|e| e.slack > 0.0);
    Ok(NegativeComponentCheck {
        lambda_plus,
        entries,
        holds,
    })
}

/// Inputs for running every comparison in one call.
#[derive(Debug, Clone)]
pub struct ComparisonSpec {
    pub domain: Domain1D,
    pub mu: SignedMeasure,
    pub n_per_unit: u32,
    pub q: usize,
    pub scale_factors: Vec<f64>,
    pub scale_tolerance: f64,
    pub nested: Option<(Domain1D, Domain1D)>,
    pub pieces: Option<(Domain1D, Domain1D)>,
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub scaling: Vec<ScalingCheck>,
    pub monotonicity: Option<MonotonicityCheck>,
    pub union: Option<UnionCheck>,
    pub negative_component: Option<NegativeComponentCheck>,
}

impl ComparisonRecord {
    pub fn all_hold(&self) -> bool {
        self.scaling.iter().all(|c| c.holds)
            && self.monotonicity.as_ref().map_or(true, |c| c.holds)
            && self.union.as_ref().map_or(true, |c| c.strict)
            && self.negative_component.as_ref().map_or(true, |c| c.holds)
    }
}

pub fn eigen_comparisons(spec: &ComparisonSpec) -> Result<ComparisonRecord> {
    let positive = spec.mu.positive_part();
    let scaling = spec
        .scale_factors
        .iter()
        .map(|&r| {
            scaling_check(&spec.domain, &positive, spec.n_per_unit, spec.q, r, spec.scale_tolerance)
        })
        .collect::<Result<_>>()?;
    let monotonicity = spec
        .nested
        .as_ref()
        .map(|(a, b)| monotonicity_check(a, b, &spec.mu, spec.n_per_unit, spec.q))
        .transpose()?;
    let union = spec
        .pieces
        .as_ref()
        .map(|(a, b)| union_check(a, b, &spec.mu, spec.n_per_unit, spec.q))
        .transpose()?;
    let negative_component = if spec.mu.has_negative_part() && !spec.epsilons.is_empty() {
        Some(negative_component_check(
            &spec.domain,
            &spec.mu,
            spec.n_per_unit,
            spec.q,
            &spec.epsilons,
        )?)
    } else {
        None
    };
    Ok(ComparisonRecord {
        scaling,
        monotonicity,
        union,
        negative_component,
    })
}
