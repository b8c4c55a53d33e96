//! Uniform cell-centred grids on finite unions of intervals.
//!
//! Nodes sit at `(m + 1/2) h` for integer lattice indices `m`, so grids built
//! with the same `n_per_unit` on different domains share one lattice and
//! node sets can be compared directly. Grid functions are implicitly zero
//! outside the node set.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_CELLS_PER_UNIT: u32 = 8;

/// Finite union of disjoint open intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain1D {
    intervals: Vec<(f64, f64)>,
}

impl Domain1D {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidInput("domain needs at least one interval".into()));
        }
        for &(a, b) in &intervals {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::InvalidInput(format!("invalid interval ({a}, {b})")));
            }
        }
        intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
        if intervals.windows(2).any(|w| w[0].1 >= w[1].0) {
            return Err(Error::InvalidInput(
                "domain intervals must have disjoint closures".into(),
            ));
        }
        Ok(Self { intervals })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![(a, b)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn total_length(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    /// Half the diameter of the convex hull: the smallest radius of a ball
    /// containing the domain.
    pub fn radius(&self) -> f64 {
        let lo = self.intervals[0].0;
        let hi = self.intervals[self.intervals.len() - 1].1;
        0.5 * (hi - lo)
    }

    /// Half the length of the longest component: the largest inscribed ball.
    pub fn inner_radius(&self) -> f64 {
        self.intervals
            .iter()
            .map(|(a, b)| 0.5 * (b - a))
            .fold(0.0, f64::max)
    }

    /// `r Ω = { r x : x ∈ Ω }`.
    pub fn scaled(&self, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::InvalidInput(format!("scale factor {r} must be positive")));
        }
        Self::new(self.intervals.iter().map(|&(a, b)| (r * a, r * b)).collect())
    }

    pub fn translated(&self, shift: f64) -> Result<Self> {
        Self::new(self.intervals.iter().map(|&(a, b)| (a + shift, b + shift)).collect())
    }

    pub fn union(&self, other: &Domain1D) -> Result<Self> {
        let mut all = self.intervals.clone();
        all.extend_from_slice(&other.intervals);
        Self::new(all)
    }
}

/// Cell-centred grid. `lattice[i]` is the integer index `m` of node `i`,
/// located at `(m + 1/2) h`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    n_per_unit: u32,
    h: f64,
    lattice: Vec<i64>,
    nodes: Vec<f64>,
    /// Snapped intervals as half-open lattice ranges `[start, end)`.
    blocks: Vec<(i64, i64)>,
}

impl Grid {
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_per_unit(&self) -> u32 {
        self.n_per_unit
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn lattice(&self) -> &[i64] {
        &self.lattice
    }

    /// Lattice distance between nodes `i` and `j`.
    pub fn offset(&self, i: usize, j: usize) -> usize {
        (self.lattice[i] - self.lattice[j]).unsigned_abs() as usize
    }

    /// Largest lattice distance between two nodes.
    pub fn max_offset(&self) -> usize {
        match (self.lattice.first(), self.lattice.last()) {
            (Some(a), Some(b)) => (b - a) as usize,
            _ => 0,
        }
    }

    /// Interval endpoints after snapping to the lattice.
    pub fn snapped_intervals(&self) -> Vec<(f64, f64)> {
        self.blocks
            .iter()
            .map(|&(a, b)| (a as f64 * self.h, b as f64 * self.h))
            .collect()
    }

    pub fn snapped_domain(&self) -> Domain1D {
        Domain1D::new(self.snapped_intervals()).expect("snapped blocks are disjoint")
    }

    /// Index of the node at lattice position `m`, if any.
    pub fn node_at(&self, m: i64) -> Option<usize> {
        self.lattice.binary_search(&m).ok()
    }

    /// True when every node of `self` is also a node of `other`.
    pub fn is_subset_of(&self, other: &Grid) -> bool {
        self.h == other.h && self.lattice.iter().all(|m| other.node_at(*m).is_some())
    }

    pub fn number_of_components(&self) -> usize {
        self.blocks.len()
    }
}

pub fn build_grid(domain: &Domain1D, n_per_unit: u32) -> Result<Arc<Grid>> {
    if n_per_unit < MIN_CELLS_PER_UNIT {
        return Err(Error::InvalidInput(format!(
            "n_per_unit = {n_per_unit} is below the minimum of {MIN_CELLS_PER_UNIT}"
        )));
    }
    let n = n_per_unit as f64;
    let h = 1.0 / n;
    let mut blocks: Vec<(i64, i64)> = Vec::with_capacity(domain.intervals.len());
    for &(a, b) in &domain.intervals {
        let start = (a * n).round() as i64;
        let end = (b * n).round() as i64;
        if b - a < 2.0 * h || end - start < 2 {
            return Err(Error::InvalidInput(format!(
                "interval ({a}, {b}) is shorter than 2h = {}",
                2.0 * h
            )));
        }
        if let Some(&(_, prev_end)) = blocks.last() {
            if start <= prev_end {
                return Err(Error::InvalidInput(format!(
                    "intervals merge after snapping to h = {h}"
                )));
            }
        }
        blocks.push((start, end));
    }
    let lattice: Vec<i64> = blocks.iter().flat_map(|&(a, b)| a..b).collect();
    let nodes = lattice.iter().map(|&m| (m as f64 + 0.5) * h).collect();
    Ok(Arc::new(Grid {
        n_per_unit,
        h,
        lattice,
        nodes,
        blocks,
    }))
}

/// Values at the grid nodes; zero everywhere else.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid with {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n] }
    }

    pub fn constant(grid: Arc<Grid>, value: f64) -> Self {
        let n = grid.len();
        Self { grid, values: vec![value; n] }
    }

    pub fn from_fn(grid: Arc<Grid>, mut f: impl FnMut(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), values)
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        same_grid(&self.grid, &other.grid)
    }

    pub fn inner(&self, other: &GridFunction) -> Result<f64> {
        self.check(other)?;
        Ok(self.grid.h * dot(&self.values, &other.values))
    }

    pub fn norm_l2(&self) -> f64 {
        (self.grid.h * dot(&self.values, &self.values)).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn abs(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn check(&self, other: &GridFunction) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch("grid functions live on different grids".into()))
        }
    }
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Tophat,
    Gaussian,
}

/// Symmetric, unit-mass dispersal kernel sampled on the lattice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Kernel {
    kind: KernelKind,
    width: f64,
    h: f64,
    /// `half[k]` is the weight at lattice offsets `±k`.
    half: Vec<f64>,
}

impl Kernel {
    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn weight(&self, k: i64) -> f64 {
        self.half.get(k.unsigned_abs() as usize).copied().unwrap_or(0.0)
    }

    pub fn reach(&self) -> usize {
        self.half.len() - 1
    }

    /// `h Σ_k weight(k)`.
    pub fn mass(&self) -> f64 {
        self.h * (self.half[0] + 2.0 * self.half[1..].iter().sum::<f64>())
    }

    pub fn nonzero_weights(&self) -> usize {
        let tail = self.half[1..].iter().filter(|w| **w > 0.0).count();
        usize::from(self.half[0] > 0.0) + 2 * tail
    }
}

pub fn make_kernel(kind: KernelKind, width: f64, grid: &Grid) -> Result<Kernel> {
    let h = grid.h();
    if !(width.is_finite() && width >= 2.0 * h * (1.0 - 1e-12)) {
        return Err(Error::InvalidInput(format!(
            "kernel width {width} is below 2h = {}",
            2.0 * h
        )));
    }
    let slack = 1e-9;
    let mut half = match kind {
        KernelKind::Tophat => {
            let reach = (width / (2.0 * h) + slack).floor() as usize;
            vec![1.0 / width; reach + 1]
        }
        KernelKind::Gaussian => {
            let reach = (width / h + slack).floor() as usize;
            let sd = width / 4.0;
            (0..=reach)
                .map(|k| {
                    let y = k as f64 * h;
                    (-(y * y) / (2.0 * sd * sd)).exp()
                })
                .collect()
        }
    };
    let mass = h * (half[0] + 2.0 * half[1..].iter().sum::<f64>());
    for w in &mut half {
        *w /= mass;
    }
    Ok(Kernel { kind, width, h, half })
}

/// `(J * u)_i = h Σ_k J(k) u_{i-k}` with `u = 0` off the node set.
pub fn convolve(kernel: &Kernel, u: &GridFunction) -> Result<GridFunction> {
    let grid = u.grid();
    if (kernel.h - grid.h()).abs() > 1e-15 * grid.h() {
        return Err(Error::GridMismatch("kernel was built for a different spacing".into()));
    }
    if grid.is_empty() {
        return Ok(u.clone());
    }
    let base = grid.lattice()[0];
    let span = grid.max_offset() + 1;
    let mut dense = vec![0.0; span];
    for (&m, &v) in grid.lattice().iter().zip(u.values()) {
        dense[(m - base) as usize] = v;
    }
    let reach = kernel.reach() as i64;
    let h = grid.h();
    let out = grid
        .lattice()
        .iter()
        .map(|&m| {
            let p = m - base;
            let lo = (p - reach).max(0);
            let hi = (p + reach).min(span as i64 - 1);
            let mut acc = 0.0;
            for q in lo..=hi {
                acc += kernel.weight(p - q) * dense[q as usize];
            }
            h * acc
        })
        .collect();
    u.with_values(out)
}
