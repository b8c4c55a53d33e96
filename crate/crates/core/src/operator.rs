//! Dense matrices for `(-Δ)^s` on a grid with zero exterior data, and their
//! signed superposition `A_μ = A₊ − A₋`.
//!
//! For `s ∈ (0,1)` the singular integral is split at `3h/2`. Inside, the
//! second difference is replaced by its curvature so the weight reduces to
//! `∫_0^{3h/2} y^{1-2s} dy`. Outside, each lattice shell `k` gets the exact
//! mass `q_k` of `y^{-1-2s}` over `((k-1/2)h, (k+1/2)h)`. Shells that land on
//! exterior points see `u = 0`, so their mass stays on the diagonal only; the
//! diagonal therefore carries the whole tail `∫_{3h/2}^∞`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, OnceLock};

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{same_grid, Grid, GridFunction};
use crate::measure::{c_ns, SignedMeasure, WeightedExponent};

/// Near-field cutoff in units of `h`.
pub const NEAR_FIELD_CELLS: f64 = 1.5;

/// Default Gauss–Legendre nodes per density piece.
pub const DEFAULT_QUADRATURE: usize = 8;

/// Diagonal entry and off-diagonal entries by lattice offset `k ≥ 1`
/// (`off[k - 1]`) for the matrix of `(-Δ)^s`.
#[derive(Debug, Clone)]
pub struct ToeplitzWeights {
    pub diag: f64,
    pub off: Vec<f64>,
}

impl ToeplitzWeights {
    pub fn at(&self, k: usize) -> f64 {
        if k == 0 {
            self.diag
        } else {
            self.off.get(k - 1).copied().unwrap_or(0.0)
        }
    }
}

/// Mass of `y^{-1-2s}` on `((k-1/2)h, (k+1/2)h)` for `k ≥ 2`.
fn shell_mass(h: f64, s: f64, k: usize) -> f64 {
    let lo = (k as f64 - 0.5) * h;
    let ratio_log = (1.0 / (k as f64 - 0.5)).ln_1p();
    lo.powf(-2.0 * s) * -(-2.0 * s * ratio_log).exp_m1() / (2.0 * s)
}

pub fn toeplitz_weights(h: f64, s: f64, max_offset: usize) -> Result<ToeplitzWeights> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidInput(format!("exponent {s} outside [0, 1]")));
    }
    let mut off = vec![0.0; max_offset];
    if s == 0.0 {
        return Ok(ToeplitzWeights { diag: 1.0, off });
    }
    if s == 1.0 {
        if max_offset >= 1 {
            off[0] = -1.0 / (h * h);
        }
        return Ok(ToeplitzWeights { diag: 2.0 / (h * h), off });
    }
    // The symmetric-difference integral runs over y > 0 only, hence 2c.
    let scale = 2.0 * c_ns(1, s);
    let cut = NEAR_FIELD_CELLS * h;
    let near = cut.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s) / (h * h);
    let tail = cut.powf(-2.0 * s) / (2.0 * s);
    if max_offset >= 1 {
        off[0] = -scale * near;
    }
    for (k, w) in off.iter_mut().enumerate().skip(1) {
        *w = -scale * shell_mass(h, s, k + 1);
    }
    Ok(ToeplitzWeights {
        diag: scale * 2.0 * (near + tail),
        off,
    })
}

/// Matrix of `(-Δ)^s` restricted to the grid nodes.
#[derive(Debug, Clone)]
pub struct FormMatrix {
    s: f64,
    grid: Arc<Grid>,
    matrix: DMatrix<f64>,
}

impl FormMatrix {
    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// `h uᵀ A_s u`, the discrete `[u]_s²`.
    pub fn quadratic(&self, u: &GridFunction) -> Result<f64> {
        check_grid(&self.grid, u)?;
        Ok(quadratic_form(&self.matrix, self.grid.h(), u.values(), u.values()))
    }
}

pub fn assemble_fractional(grid: &Arc<Grid>, s: f64) -> Result<FormMatrix> {
    let weights = toeplitz_weights(grid.h(), s, grid.max_offset())?;
    let n = grid.len();
    let lattice = grid.lattice();
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        weights.at((lattice[i] - lattice[j]).unsigned_abs() as usize)
    });
    Ok(FormMatrix {
        s,
        grid: grid.clone(),
        matrix,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormPart {
    Plus,
    Minus,
    Signed,
}

/// `A₊`, `A₋` and `A_μ` for a signed measure on a fixed grid.
#[derive(Debug)]
pub struct SuperposedOperator {
    grid: Arc<Grid>,
    measure: SignedMeasure,
    exponents: Vec<WeightedExponent>,
    a_plus: DMatrix<f64>,
    a_minus: DMatrix<f64>,
    a_mu: DMatrix<f64>,
    a_plus_upper: DMatrix<f64>,
    margin: OnceLock<f64>,
}

pub fn assemble_superposition(
    grid: &Arc<Grid>,
    mu: &SignedMeasure,
    q: usize,
) -> Result<SuperposedOperator> {
    let exponents = mu.quadrature_decompose(q);
    let parts: Vec<FormMatrix> = exponents
        .par_iter()
        .map(|e| assemble_fractional(grid, e.s))
        .collect::<Result<_>>()?;
    let n = grid.len();
    let mut a_plus = DMatrix::zeros(n, n);
    let mut a_minus = DMatrix::zeros(n, n);
    let mut a_plus_upper = DMatrix::zeros(n, n);
    for (e, part) in exponents.iter().zip(&parts) {
        if e.w > 0.0 {
            a_plus += part.matrix() * e.w;
            if e.s >= mu.s_bar {
                a_plus_upper += part.matrix() * e.w;
            }
        } else if e.w < 0.0 {
            a_minus += part.matrix() * (-e.w);
        }
    }
    let a_mu = &a_plus - &a_minus;
    Ok(SuperposedOperator {
        grid: grid.clone(),
        measure: mu.clone(),
        exponents,
        a_plus,
        a_minus,
        a_mu,
        a_plus_upper,
        margin: OnceLock::new(),
    })
}

impl SuperposedOperator {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn measure(&self) -> &SignedMeasure {
        &self.measure
    }

    pub fn exponents(&self) -> &[WeightedExponent] {
        &self.exponents
    }

    pub fn a_plus(&self) -> &DMatrix<f64> {
        &self.a_plus
    }

    pub fn a_minus(&self) -> &DMatrix<f64> {
        &self.a_minus
    }

    pub fn a_mu(&self) -> &DMatrix<f64> {
        &self.a_mu
    }

    /// Positive part restricted to exponents in `[s̄, 1]`.
    pub fn a_plus_upper(&self) -> &DMatrix<f64> {
        &self.a_plus_upper
    }

    pub fn part(&self, part: FormPart) -> &DMatrix<f64> {
        match part {
            FormPart::Plus => &self.a_plus,
            FormPart::Minus => &self.a_minus,
            FormPart::Signed => &self.a_mu,
        }
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    /// `A_μ u` as a plain vector.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        matvec(&self.a_mu, u)
    }

    /// Smallest eigenvalue of `A_μ`, computed once.
    pub fn coercivity_margin(&self) -> f64 {
        *self.margin.get_or_init(|| {
            self.a_mu
                .clone()
                .symmetric_eigenvalues()
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        })
    }

    pub(crate) fn seed_margin(&self, value: f64) {
        let _ = self.margin.set(value);
    }

    pub fn is_coercive(&self) -> bool {
        self.coercivity_margin() > 0.0
    }

    /// True when every off-diagonal entry of `A_μ` is nonpositive. This is
    /// the discrete form of a nonnegative interaction kernel and is exactly
    /// what makes `Q_μ(|u|) ≤ Q_μ(u)` hold for every grid function.
    pub fn kernel_positive(&self) -> bool {
        self.max_offdiagonal() <= 0.0
    }

    pub fn max_offdiagonal(&self) -> f64 {
        let n = self.dim();
        let mut worst = f64::NEG_INFINITY;
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    worst = worst.max(self.a_mu[(i, j)]);
                }
            }
        }
        worst
    }
}

fn check_grid(grid: &Arc<Grid>, u: &GridFunction) -> Result<()> {
    if same_grid(grid, u.grid()) {
        Ok(())
    } else {
        Err(Error::GridMismatch("grid function does not live on the operator grid".into()))
    }
}

pub(crate) fn matvec(a: &DMatrix<f64>, u: &[f64]) -> Vec<f64> {
    let v = DVector::from_column_slice(u);
    (a * v).as_slice().to_vec()
}

pub(crate) fn quadratic_form(a: &DMatrix<f64>, h: f64, u: &[f64], v: &[f64]) -> f64 {
    let av = matvec(a, v);
    h * u.iter().zip(&av).map(|(x, y)| x * y).sum::<f64>()
}

/// `h uᵀ A_part v`.
pub fn form_value(
    op: &SuperposedOperator,
    u: &GridFunction,
    v: &GridFunction,
    part: FormPart,
) -> Result<f64> {
    check_grid(&op.grid, u)?;
    check_grid(&op.grid, v)?;
    Ok(quadratic_form(op.part(part), op.grid.h(), u.values(), v.values()))
}

/// `I(u) = ½ h uᵀ A_μ u`.
pub fn energy_i(op: &SuperposedOperator, u: &GridFunction) -> Result<f64> {
    Ok(0.5 * form_value(op, u, u, FormPart::Signed)?)
}

pub fn coercivity_margin(op: &SuperposedOperator) -> f64 {
    op.coercivity_margin()
}

/// `sup_u uᵀAu / uᵀBu` for symmetric `A` and positive definite `B`, via the
/// Cholesky factor of `B`.
pub fn max_form_ratio(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let chol = Cholesky::new(b.clone())
        .ok_or_else(|| Error::Numerical("denominator form is not positive definite".into()))?;
    let l = chol.l();
    let mut m = a.clone();
    l.solve_lower_triangular_mut(&mut m);
    let mut mt = m.transpose();
    l.solve_lower_triangular_mut(&mut mt);
    let sym = (&mt + mt.transpose()) * 0.5;
    Ok(sym
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Eigen-decomposition helper shared with the spectral module.
pub(crate) fn dense_eigen(a: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::new(a.clone())
}

/// Writes `n` as a little-endian `u64`, then the matrix row by row as
/// little-endian `f64`.
pub fn write_matrix_binary(path: &Path, a: &DMatrix<f64>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let n = a.nrows();
    out.write_all(&(n as u64).to_le_bytes()).map_err(|e| Error::io(path, e))?;
    for i in 0..n {
        for j in 0..a.ncols() {
            out.write_all(&a[(i, j)].to_le_bytes()).map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_matrix_binary(path: &Path) -> Result<DMatrix<f64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 {
        return Err(Error::InvalidInput(format!("{} is too short", path.display())));
    }
    let n = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
    if bytes.len() != 8 + 8 * n * n {
        return Err(Error::InvalidInput(format!(
            "{} has {} bytes, expected {}",
            path.display(),
            bytes.len(),
            8 + 8 * n * n
        )));
    }
    let values: Vec<f64> = bytes[8..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(DMatrix::from_row_slice(n, n, &values))
}
