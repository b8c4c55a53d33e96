//! Signed measures over the exponent range `[0, 1]`.
//!
//! A [`SignedMeasure`] is the difference of two nonnegative components, each a
//! finite sum of Dirac atoms plus piecewise-linear densities. Everything the
//! solver needs from the measure reduces to interval masses, integrals of
//! smooth functions of the exponent, and the structural checks in
//! [`check_hypotheses`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{gamma, gauss_legendre};

/// Number of points used by the grid searches for `s_sharp` and `delta_star`.
pub const SEARCH_POINTS: usize = 10_000;

/// Exponents closer than this are treated as the same atom.
const ATOM_MERGE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub s: f64,
    pub weight: f64,
}

/// Nonnegative density, linear between consecutive breakpoints and zero
/// outside `[breakpoints[0], breakpoints[last]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseDensity {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseDensity {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "density needs at least two breakpoints and one value per breakpoint (got {} / {})",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::InvalidInput(
                "density breakpoints must lie in [0, 1]".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "density breakpoints must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput(
                "density values must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { breakpoints, values })
    }

    /// Constant density `value` on `[lo, hi]`.
    pub fn constant(lo: f64, hi: f64, value: f64) -> Result<Self> {
        Self::new(vec![lo, hi], vec![value, value])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, s: f64) -> f64 {
        let b = &self.breakpoints;
        if s < b[0] || s > b[b.len() - 1] {
            return 0.0;
        }
        let k = match b.partition_point(|&x| x <= s) {
            0 => 0,
            p if p >= b.len() => b.len() - 2,
            p => p - 1,
        };
        let t = (s - b[k]) / (b[k + 1] - b[k]);
        self.values[k] + t * (self.values[k + 1] - self.values[k])
    }

    /// Exact integral over `[lo, hi]`.
    fn integral(&self, lo: f64, hi: f64) -> f64 {
        self.segments(lo, hi)
            .map(|(a, b)| 0.5 * (b - a) * (self.eval(a) + self.eval(b)))
            .sum()
    }

    /// Linear pieces clipped to `[lo, hi]`.
    fn segments(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.breakpoints.windows(2).filter_map(move |w| {
            let a = w[0].max(lo);
            let b = w[1].min(hi);
            (b > a).then_some((a, b))
        })
    }

    /// Closure of the set where the density is positive, as `(inf, sup)`.
    fn support(&self) -> Option<(f64, f64)> {
        let mut lo = None;
        let mut hi = None;
        for (w, v) in self.breakpoints.windows(2).zip(self.values.windows(2)) {
            if v[0] > 0.0 || v[1] > 0.0 {
                lo.get_or_insert(w[0]);
                hi = Some(w[1]);
            }
        }
        lo.zip(hi)
    }
}

/// Interval of exponents with explicit endpoint closure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentRange {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl ExponentRange {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: true }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: false, hi_closed: false }
    }

    /// `[lo, hi)`
    pub fn closed_open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: false }
    }

    pub fn contains(&self, s: f64) -> bool {
        let above = if self.lo_closed { s >= self.lo } else { s > self.lo };
        let below = if self.hi_closed { s <= self.hi } else { s < self.hi };
        above && below
    }
}

/// One nonnegative component (`mu+` or `mu-`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasureComponent {
    atoms: Vec<Atom>,
    densities: Vec<PiecewiseDensity>,
}

impl MeasureComponent {
    pub fn new(atoms: Vec<Atom>, densities: Vec<PiecewiseDensity>) -> Result<Self> {
        for a in &atoms {
            if !(0.0..=1.0).contains(&a.s) {
                return Err(Error::InvalidInput(format!(
                    "atom exponent {} outside [0, 1]",
                    a.s
                )));
            }
            if !(a.weight.is_finite() && a.weight >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "atom weight {} must be finite and nonnegative",
                    a.weight
                )));
            }
        }
        let mut sorted = atoms;
        sorted.sort_by(|a, b| a.s.total_cmp(&b.s));
        let mut merged: Vec<Atom> = Vec::with_capacity(sorted.len());
        for a in sorted {
            match merged.last_mut() {
                Some(last) if (last.s - a.s).abs() <= ATOM_MERGE_TOL => last.weight += a.weight,
                _ => merged.push(a),
            }
        }
        merged.retain(|a| a.weight > 0.0);
        Ok(Self {
            atoms: merged,
            densities,
        })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn dirac(s: f64, weight: f64) -> Result<Self> {
        Self::new(vec![Atom { s, weight }], Vec::new())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn densities(&self) -> &[PiecewiseDensity] {
        &self.densities
    }

    pub fn is_zero(&self) -> bool {
        self.total_mass() == 0.0
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { s: a.s, weight: a.weight * factor })
            .collect();
        let densities = self
            .densities
            .iter()
            .map(|d| {
                PiecewiseDensity::new(
                    d.breakpoints.clone(),
                    d.values.iter().map(|v| v * factor).collect(),
                )
            })
            .collect::<Result<_>>()?;
        Self::new(atoms, densities)
    }

    /// Mass of the component on `range` (atoms respect endpoint closure,
    /// densities are integrated exactly).
    pub fn mass(&self, range: ExponentRange) -> f64 {
        if range.hi < range.lo {
            return 0.0;
        }
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|a| range.contains(a.s))
            .fold(0.0, |acc, a| acc + a.weight);
        let dens: f64 = self
            .densities
            .iter()
            .fold(0.0, |acc, d| acc + d.integral(range.lo, range.hi));
        atoms + dens
    }

    pub fn total_mass(&self) -> f64 {
        self.mass(ExponentRange::closed(0.0, 1.0))
    }

    /// `∫_range f(s) dμ(s)`, exact on atoms and Gauss–Legendre with `q` nodes
    /// per linear density piece.
    pub fn integrate(&self, range: ExponentRange, q: usize, f: impl Fn(f64) -> f64) -> f64 {
        let mut total = 0.0;
        for a in self.atoms.iter().filter(|a| range.contains(a.s)) {
            total += a.weight * f(a.s);
        }
        for (s, w) in self.density_nodes(range.lo, range.hi, q) {
            total += w * f(s);
        }
        total
    }

    fn density_nodes(&self, lo: f64, hi: f64, q: usize) -> Vec<(f64, f64)> {
        let (x, w) = gauss_legendre(q);
        let mut out = Vec::new();
        for d in &self.densities {
            for (a, b) in d.segments(lo, hi) {
                let half = 0.5 * (b - a);
                let mid = 0.5 * (a + b);
                for (xi, wi) in x.iter().zip(&w) {
                    let s = mid + half * xi;
                    out.push((s, half * wi * d.eval(s)));
                }
            }
        }
        out
    }

    /// `(inf, sup)` of the support.
    pub fn support(&self) -> Option<(f64, f64)> {
        let mut bounds: Option<(f64, f64)> = None;
        let mut absorb = |lo: f64, hi: f64| {
            bounds = Some(match bounds {
                None => (lo, hi),
                Some((a, b)) => (a.min(lo), b.max(hi)),
            });
        };
        for a in &self.atoms {
            absorb(a.s, a.s);
        }
        for d in &self.densities {
            if let Some((lo, hi)) = d.support() {
                absorb(lo, hi);
            }
        }
        bounds
    }
}

/// Free-function form of [`MeasureComponent::mass`].
pub fn measure_mass(
    component: &MeasureComponent,
    lo: f64,
    hi: f64,
    lo_closed: bool,
    hi_closed: bool,
) -> f64 {
    component.mass(ExponentRange { lo, hi, lo_closed, hi_closed })
}

/// `mu = mu+ - mu-` together with the splitting exponent `s_bar` and the
/// ambient dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedMeasure {
    pub plus: MeasureComponent,
    pub minus: MeasureComponent,
    pub s_bar: f64,
    pub dimension: u32,
}

/// A single `(exponent, signed weight)` term of a discretized measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedExponent {
    pub s: f64,
    pub w: f64,
}

impl SignedMeasure {
    pub fn new(
        plus: MeasureComponent,
        minus: MeasureComponent,
        s_bar: f64,
        dimension: u32,
    ) -> Result<Self> {
        if !(s_bar > 0.0 && s_bar <= 1.0) {
            return Err(Error::InvalidInput(format!("s_bar = {s_bar} must lie in (0, 1]")));
        }
        if dimension == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        Ok(Self { plus, minus, s_bar, dimension })
    }

    /// Unsigned Dirac mass `weight * delta_s` in one dimension, with `s_bar = s`.
    pub fn dirac(s: f64, weight: f64) -> Result<Self> {
        let s_bar = if s > 0.0 { s } else { 1.0 };
        Self::new(MeasureComponent::dirac(s, weight)?, MeasureComponent::zero(), s_bar, 1)
    }

    /// `delta_1 + delta_{s1} - alpha delta_{s2}` with `1 > s1 > s2 > 0` and `s_bar = s1`.
    pub fn three_atom_example(s1: f64, s2: f64, alpha: f64) -> Result<Self> {
        if !(1.0 > s1 && s1 > s2 && s2 > 0.0) || alpha < 0.0 {
            return Err(Error::InvalidInput(
                "three-atom measure needs 1 > s1 > s2 > 0 and alpha >= 0".into(),
            ));
        }
        let plus = MeasureComponent::new(
            vec![Atom { s: 1.0, weight: 1.0 }, Atom { s: s1, weight: 1.0 }],
            Vec::new(),
        )?;
        let minus = MeasureComponent::dirac(s2, alpha)?;
        Self::new(plus, minus, s1, 1)
    }

    /// `mu+` alone (same `s_bar`).
    pub fn positive_part(&self) -> Self {
        Self {
            plus: self.plus.clone(),
            minus: MeasureComponent::zero(),
            s_bar: self.s_bar,
            dimension: self.dimension,
        }
    }

    /// `mu+ - eps mu-`.
    pub fn with_negative_scaled(&self, eps: f64) -> Result<Self> {
        Ok(Self {
            plus: self.plus.clone(),
            minus: self.minus.scaled(eps)?,
            s_bar: self.s_bar,
            dimension: self.dimension,
        })
    }

    pub fn has_negative_part(&self) -> bool {
        !self.minus.is_zero()
    }

    /// Signed finite combination `sum_k w_k (-Δ)^{s_k}` representing the measure.
    /// Atoms pass through; each linear density piece contributes `q`
    /// Gauss–Legendre nodes weighted by the density.
    pub fn quadrature_decompose(&self, q: usize) -> Vec<WeightedExponent> {
        let q = q.max(1);
        let mut out = Vec::new();
        for (component, sign) in [(&self.plus, 1.0), (&self.minus, -1.0)] {
            for a in component.atoms() {
                out.push(WeightedExponent { s: a.s, w: sign * a.weight });
            }
            for (s, w) in component.density_nodes(0.0, 1.0, q) {
                out.push(WeightedExponent { s, w: sign * w });
            }
        }
        out.sort_by(|a, b| b.s.total_cmp(&a.s).then(b.w.total_cmp(&a.w)));
        out
    }
}

/// Extreme values of `Γ((N+2s)/2) / Γ(2-s)` over `s ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaExtrema {
    pub gamma_up: f64,
    pub s_up: f64,
    pub gamma_down: f64,
    pub s_down: f64,
}

fn gamma_ratio(n: u32, s: f64) -> f64 {
    gamma((n as f64 + 2.0 * s) / 2.0) / gamma(2.0 - s)
}

pub fn gamma_extrema(n: u32) -> GammaExtrema {
    const SCAN: usize = 10_000;
    let step = 1.0 / SCAN as f64;
    let vals: Vec<f64> = (0..=SCAN).map(|k| gamma_ratio(n, k as f64 * step)).collect();
    let (imax, _) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty scan");
    let (imin, _) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty scan");
    let refine = |i: usize, sign: f64| -> (f64, f64) {
        let lo = (i as f64 - 1.0).max(0.0) * step;
        let hi = ((i + 1) as f64 * step).min(1.0);
        let f = |s: f64| sign * gamma_ratio(n, s);
        // Golden-section on the bracket, compared against the scan winner and its
        // endpoints so interior refinement never loses to the boundary.
        let (mut a, mut b) = (lo, hi);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) > f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let mut best = (i as f64 * step, f(i as f64 * step));
        for s in [lo, hi, 0.5 * (a + b)] {
            let v = f(s);
            if v > best.1 {
                best = (s, v);
            }
        }
        (best.0, sign * best.1)
    };
    let (s_up, gamma_up) = refine(imax, 1.0);
    let (s_down, gamma_down) = refine(imin, -1.0);
    GammaExtrema { gamma_up, s_up, gamma_down, s_down }
}

/// Normalization constant of the fractional Laplacian in dimension `n`:
/// `2^{2s-1} Γ((N+2s)/2) s(1-s) / (π^{N/2} Γ(2-s))`, exactly zero at `s ∈ {0, 1}`.
pub fn c_ns(n: u32, s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    let nf = n as f64;
    2f64.powf(2.0 * s - 1.0) * gamma((nf + 2.0 * s) / 2.0) * s * (1.0 - s)
        / (PI.powf(nf / 2.0) * gamma(2.0 - s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CBounds {
    /// Upper bound of `c_ns` valid for every `s ∈ [0, 1]`.
    pub c_up: f64,
    /// Lower bound of `c_ns` valid for `s ∈ [s_bar, 1 - delta]`.
    pub c_low_times_delta: f64,
}

pub fn c_bounds(n: u32, s_bar: f64, delta: f64) -> Result<CBounds> {
    if !(s_bar > 0.0 && s_bar <= 1.0) || !(delta > 0.0 && delta <= 1.0 - s_bar) {
        return Err(Error::InvalidInput(format!(
            "c_bounds needs s_bar in (0,1] and delta in (0, 1 - s_bar] (got s_bar={s_bar}, delta={delta})"
        )));
    }
    let ext = gamma_extrema(n);
    let pi_half = PI.powf(n as f64 / 2.0);
    let bounds = CBounds {
        c_up: 2.0 * ext.gamma_up / pi_half,
        c_low_times_delta: ext.gamma_down * s_bar / (2.0 * pi_half) * delta,
    };
    const SAMPLES: usize = 100;
    for k in 0..=SAMPLES {
        let s = k as f64 / SAMPLES as f64;
        if c_ns(n, s) > bounds.c_up {
            return Err(Error::Numerical(format!("c_ns({n}, {s}) exceeds the upper bound")));
        }
        let s_in = s_bar + (1.0 - delta - s_bar) * k as f64 / SAMPLES as f64;
        if c_ns(n, s_in) < bounds.c_low_times_delta {
            return Err(Error::Numerical(format!("c_ns({n}, {s_in}) is below the lower bound")));
        }
    }
    Ok(bounds)
}

/// Exclusive upper end of the admissible reabsorption constant `gamma_bar`
/// for a domain of radius `r`.
pub fn gamma_bar_bound(n: u32, r: f64, s_bar: f64) -> f64 {
    let ext = gamma_extrema(n);
    ext.gamma_down * s_bar / (4.0 * ext.gamma_up * 1f64.max((2.0 * r).powi(2)))
}

/// Outcome of the structural checks on a signed measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub s_bar: f64,
    pub radius: f64,
    /// `mu+([s_bar, 1])`
    pub mu0_mass: f64,
    pub mu0_ok: bool,
    /// `mu-([s_bar, 1])`
    pub mu1_mass: f64,
    pub mu1_ok: bool,
    /// Smallest `gamma` with `mu-([0, s_bar)) <= gamma mu+([s_bar, 1])`.
    pub gamma_min: f64,
    pub s_sharp: f64,
    pub s_sharp_resolution: f64,
    /// Critical Sobolev exponent; `None` when infinite (`N <= 2 s_sharp`).
    pub two_star: Option<f64>,
    /// `mu-((0, s_bar))`
    pub negative_mass_below: f64,
    pub mu2forte_ok: bool,
    /// True when the strong reabsorption condition holds only because
    /// `mu-((0, s_bar)) = 0`.
    pub mu2forte_vacuous: bool,
    pub delta_star: Option<f64>,
    pub gamma_bar_used: f64,
    pub gamma_bar_upper: f64,
}

/// Checks the positivity, sign and reabsorption hypotheses on `mu` for a
/// domain of radius `radius`. `gamma_bar` defaults to half of its admissible
/// upper end.
pub fn check_hypotheses(
    mu: &SignedMeasure,
    radius: f64,
    gamma_bar: Option<f64>,
) -> Result<HypothesisReport> {
    if !(radius > 0.0) {
        return Err(Error::InvalidInput(format!("radius {radius} must be positive")));
    }
    let s_bar = mu.s_bar;
    let upper = gamma_bar_bound(mu.dimension, radius, s_bar);
    let gamma_bar = gamma_bar.unwrap_or(0.5 * upper);
    if !(gamma_bar >= 0.0 && gamma_bar < upper) {
        return Err(Error::InvalidInput(format!(
            "gamma_bar = {gamma_bar} outside the admissible range [0, {upper})"
        )));
    }

    let mu0_mass = mu.plus.mass(ExponentRange::closed(s_bar, 1.0));
    let mu1_mass = mu.minus.mass(ExponentRange::closed(s_bar, 1.0));
    if mu0_mass <= 0.0 {
        return Err(Error::Hypothesis(format!(
            "mu+([s_bar, 1]) = 0 for s_bar = {s_bar}: no positive mass at high exponents"
        )));
    }
    if mu1_mass > 0.0 {
        return Err(Error::Hypothesis(format!(
            "mu-([s_bar, 1]) = {mu1_mass} > 0 for s_bar = {s_bar}: negative mass at high exponents"
        )));
    }
    let gamma_min = mu.minus.mass(ExponentRange::closed_open(0.0, s_bar)) / mu0_mass;

    let resolution = 1.0 / SEARCH_POINTS as f64;
    let s_sharp = (0..=SEARCH_POINTS)
        .rev()
        .map(|k| k as f64 * resolution)
        .filter(|&s| s >= s_bar)
        .find(|&s| mu.plus.mass(ExponentRange::closed(s, 1.0)) > 0.0)
        .unwrap_or(s_bar);
    let n = mu.dimension as f64;
    let two_star = (n > 2.0 * s_sharp).then(|| 2.0 * n / (n - 2.0 * s_sharp));

    let negative_mass_below = mu.minus.mass(ExponentRange::open(0.0, s_bar));
    let holds = |delta: f64| {
        negative_mass_below
            <= gamma_bar * delta * mu.plus.mass(ExponentRange::closed(s_bar, 1.0 - delta))
    };
    let span = 1.0 - s_bar;
    let mut delta_star = None;
    if span > 0.0 {
        let step = span / SEARCH_POINTS as f64;
        if let Some(j) = (1..=SEARCH_POINTS).find(|&j| holds(j as f64 * step)) {
            let mut hi = j as f64 * step;
            if j > 1 {
                // Tighten towards the threshold; keep the end where the inequality holds.
                let mut lo = (j - 1) as f64 * step;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if holds(mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
            }
            delta_star = Some(hi);
        }
    }
    let mu2forte_vacuous = negative_mass_below == 0.0;
    let mu2forte_ok = delta_star.is_some() || mu2forte_vacuous;

    Ok(HypothesisReport {
        s_bar,
        radius,
        mu0_mass,
        mu0_ok: true,
        mu1_mass,
        mu1_ok: true,
        gamma_min,
        s_sharp,
        s_sharp_resolution: resolution,
        two_star,
        negative_mass_below,
        mu2forte_ok,
        mu2forte_vacuous,
        delta_star,
        gamma_bar_used: gamma_bar,
        gamma_bar_upper: upper,
    })
}

/// Both sides of the comparison between the negative component below `s_bar`
/// and the positive component on `[s_bar, upper)`, evaluated at the length
/// scale `zeta ∈ (0, 2R)`.
pub fn scale_comparison_sides(
    mu: &SignedMeasure,
    radius: f64,
    zeta: f64,
    upper: f64,
    q: usize,
) -> (f64, f64) {
    let s_bar = mu.s_bar;
    let two_r = 2.0 * radius;
    let pos_range = ExponentRange::closed_open(s_bar, upper);
    let neg_range = ExponentRange::open(0.0, s_bar);
    let weight = |s: f64| zeta.powf(-2.0 * s);
    let lhs = 1f64.min(two_r.powf(2.0 * s_bar))
        * mu.plus.mass(pos_range)
        * mu.minus.integrate(neg_range, q, weight);
    let rhs = two_r.powf(2.0 * s_bar).max(two_r * two_r)
        * mu.minus.mass(neg_range)
        * mu.plus.integrate(pos_range, q, weight);
    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SQRT_PI: f64 = 1.772_453_850_905_516;

    #[test]
    fn gamma_extrema_one_dimension() {
        let ext = gamma_extrema(1);
        assert!((ext.gamma_up - SQRT_PI).abs() < 1e-12);
        assert!(ext.s_up.abs() < 1e-12);
        assert!((ext.gamma_down - SQRT_PI / 2.0).abs() < 1e-12);
        assert!((ext.s_down - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_extrema_two_dimensions() {
        let ext = gamma_extrema(2);
        assert!(ext.gamma_up >= 1.0);
        assert!(ext.gamma_up >= ext.gamma_down && ext.gamma_down > 0.0);
        // Brute-force oracle on a finer independent grid.
        let fine = (0..=200_000)
            .map(|k| {
                let s = k as f64 / 200_000.0;
                statrs::function::gamma::gamma(1.0 + s) / statrs::function::gamma::gamma(2.0 - s)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((ext.gamma_up - fine).abs() < 1e-9);
    }

    #[test]
    fn c_ns_values() {
        assert_eq!(c_ns(1, 0.0), 0.0);
        assert_eq!(c_ns(1, 1.0), 0.0);
        assert_eq!(c_ns(3, 0.0), 0.0);
        assert_eq!(c_ns(3, 1.0), 0.0);
        assert!((c_ns(1, 0.5) - 1.0 / (2.0 * PI)).abs() < 1e-12);
        let g = statrs::function::gamma::gamma;
        let oracle = 2f64.powf(-0.5) * g(0.75) * (3.0 / 16.0) / (PI.sqrt() * g(1.75));
        assert!((c_ns(1, 0.25) - oracle).abs() < 1e-13);
        assert!((c_ns(1, 0.25) - 0.099_735_570_100_358).abs() < 1e-12);
    }

    #[test]
    fn c_ns_positive_inside_and_bounded() {
        for n in 1..=4 {
            let up = c_bounds(n, 0.5, 0.25).unwrap().c_up;
            for k in 1..1000 {
                let c = c_ns(n, k as f64 / 1000.0);
                assert!(c > 0.0 && c <= up);
            }
        }
    }

    #[test]
    fn c_bounds_examples() {
        let b = c_bounds(1, 0.5, 0.25).unwrap();
        assert!((b.c_up - 2.0).abs() < 1e-12);
        assert!((b.c_low_times_delta - 0.03125).abs() < 1e-12);
        let tiny = c_bounds(1, 0.5, 1e-9).unwrap();
        assert!(tiny.c_low_times_delta < 1e-9);
        assert!(c_bounds(1, 0.5, 0.6).is_err());
    }

    #[test]
    fn gamma_bar_bound_examples() {
        assert!((gamma_bar_bound(1, 0.5, 1.0) - 0.125).abs() < 1e-12);
        assert!((gamma_bar_bound(1, 5.0, 1.0) - 0.00125).abs() < 1e-14);
        assert!(gamma_bar_bound(1, 0.5, 1e-12) < 1e-12);
    }

    #[test]
    fn masses_respect_closure() {
        let c = MeasureComponent::dirac(1.0, 1.0).unwrap();
        assert_eq!(measure_mass(&c, 0.5, 1.0, true, true), 1.0);
        assert_eq!(measure_mass(&c, 0.5, 1.0, true, false), 0.0);
        let d = MeasureComponent::new(
            Vec::new(),
            vec![PiecewiseDensity::constant(0.0, 0.5, 2.0).unwrap()],
        )
        .unwrap();
        assert!((measure_mass(&d, 0.0, 0.25, true, true) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn duplicate_atoms_merge() {
        let c = MeasureComponent::new(
            vec![
                Atom { s: 0.7, weight: 1.0 },
                Atom { s: 0.2, weight: 0.5 },
                Atom { s: 0.7, weight: 2.0 },
            ],
            Vec::new(),
        )
        .unwrap();
        assert_eq!(c.atoms(), &[Atom { s: 0.2, weight: 0.5 }, Atom { s: 0.7, weight: 3.0 }]);
        assert!(MeasureComponent::dirac(1.5, 1.0).is_err());
        assert!(MeasureComponent::dirac(0.5, -1.0).is_err());
    }

    #[test]
    fn three_atom_hypotheses() {
        let alpha = 0.01;
        let mu = SignedMeasure::three_atom_example(0.6, 0.3, alpha).unwrap();
        let rep = check_hypotheses(&mu, 0.5, None).unwrap();
        assert!((rep.gamma_min - alpha / 2.0).abs() < 1e-15);
        assert!(alpha <= rep.gamma_bar_used * (1.0 - 0.6));
        assert!(rep.mu2forte_ok);
        let delta = rep.delta_star.unwrap();
        assert!((delta - alpha / rep.gamma_bar_used).abs() < 1e-10);
        assert_eq!(rep.s_sharp, 1.0);
        assert_eq!(rep.two_star, None);
        assert!(
            rep.negative_mass_below
                <= rep.gamma_bar_used * delta * mu.plus.mass(ExponentRange::closed(0.6, 1.0 - delta))
        );
    }

    #[test]
    fn three_atom_with_large_alpha_fails_strong_reabsorption() {
        // alpha = 0.05 exceeds gamma_bar (1 - s1) for every admissible gamma_bar.
        let mu = SignedMeasure::three_atom_example(0.6, 0.3, 0.05).unwrap();
        let upper = gamma_bar_bound(1, 0.5, 0.6);
        let rep = check_hypotheses(&mu, 0.5, Some(upper * 0.999)).unwrap();
        assert!((rep.gamma_min - 0.025).abs() < 1e-15);
        assert!(!rep.mu2forte_ok);
    }

    #[test]
    fn laplacian_minus_half_power_fails_strong_reabsorption() {
        let mu = SignedMeasure::new(
            MeasureComponent::dirac(1.0, 1.0).unwrap(),
            MeasureComponent::dirac(0.5, 0.05).unwrap(),
            0.75,
            1,
        )
        .unwrap();
        let rep = check_hypotheses(&mu, 0.5, None).unwrap();
        assert!(!rep.mu2forte_ok);
        assert!(rep.delta_star.is_none());
    }

    #[test]
    fn rejects_sign_hypotheses() {
        let no_high = SignedMeasure::new(
            MeasureComponent::dirac(0.2, 1.0).unwrap(),
            MeasureComponent::zero(),
            0.5,
            1,
        )
        .unwrap();
        assert!(matches!(check_hypotheses(&no_high, 0.5, None), Err(Error::Hypothesis(_))));
        let neg_high = SignedMeasure::new(
            MeasureComponent::dirac(1.0, 1.0).unwrap(),
            MeasureComponent::dirac(0.8, 0.1).unwrap(),
            0.5,
            1,
        )
        .unwrap();
        assert!(matches!(check_hypotheses(&neg_high, 0.5, None), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn two_star_finite_in_three_dimensions() {
        let mut mu = SignedMeasure::dirac(0.5, 1.0).unwrap();
        mu.dimension = 3;
        let rep = check_hypotheses(&mu, 0.5, None).unwrap();
        assert_eq!(rep.s_sharp, 0.5);
        assert!((rep.two_star.unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn decomposition_examples() {
        let lap = SignedMeasure::dirac(1.0, 1.0).unwrap();
        assert_eq!(lap.quadrature_decompose(4), vec![WeightedExponent { s: 1.0, w: 1.0 }]);

        let dens = SignedMeasure::new(
            MeasureComponent::new(Vec::new(), vec![PiecewiseDensity::constant(0.4, 0.6, 1.0).unwrap()])
                .unwrap(),
            MeasureComponent::zero(),
            0.4,
            1,
        )
        .unwrap();
        let terms = dens.quadrature_decompose(4);
        assert_eq!(terms.len(), 4);
        assert!(terms.iter().all(|t| t.s > 0.4 && t.s < 0.6));
        assert!((terms.iter().map(|t| t.w).sum::<f64>() - 0.2).abs() < 1e-14);

        let three = SignedMeasure::three_atom_example(0.6, 0.3, 0.05).unwrap();
        assert_eq!(
            three.quadrature_decompose(4),
            vec![
                WeightedExponent { s: 1.0, w: 1.0 },
                WeightedExponent { s: 0.6, w: 1.0 },
                WeightedExponent { s: 0.3, w: -0.05 },
            ]
        );
    }

    #[test]
    fn decomposition_preserves_signed_mass() {
        let plus = MeasureComponent::new(
            vec![Atom { s: 1.0, weight: 0.5 }],
            vec![PiecewiseDensity::new(vec![0.5, 0.7, 0.9], vec![0.0, 3.0, 1.0]).unwrap()],
        )
        .unwrap();
        let minus = MeasureComponent::new(
            Vec::new(),
            vec![PiecewiseDensity::new(vec![0.05, 0.3], vec![0.2, 0.1]).unwrap()],
        )
        .unwrap();
        let mu = SignedMeasure::new(plus, minus, 0.5, 1).unwrap();
        for q in [1, 2, 5] {
            let total: f64 = mu.quadrature_decompose(q).iter().map(|t| t.w).sum();
            let expect = mu.plus.total_mass() - mu.minus.total_mass();
            assert!((total - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn scale_comparison_holds_on_random_scales() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let plus = MeasureComponent::new(
            vec![Atom { s: 1.0, weight: 1.0 }, Atom { s: 0.7, weight: 0.4 }],
            vec![PiecewiseDensity::constant(0.55, 0.95, 0.8).unwrap()],
        )
        .unwrap();
        let minus = MeasureComponent::new(
            vec![Atom { s: 0.2, weight: 0.01 }],
            vec![PiecewiseDensity::constant(0.1, 0.4, 0.02).unwrap()],
        )
        .unwrap();
        let mu = SignedMeasure::new(plus, minus, 0.5, 1).unwrap();
        for radius in [0.3, 0.5, 2.0] {
            for _ in 0..100 {
                let zeta = rng.gen_range(1e-6..2.0 * radius);
                let upper = rng.gen_range(0.5..=1.0);
                let (lhs, rhs) = scale_comparison_sides(&mu, radius, zeta, upper, 8);
                assert!(lhs <= rhs * (1.0 + 1e-12), "R={radius} zeta={zeta} S={upper}");
            }
        }
    }

    #[test]
    fn density_eval_and_support() {
        let d = PiecewiseDensity::new(vec![0.2, 0.4, 0.6], vec![0.0, 2.0, 0.0]).unwrap();
        assert_eq!(d.eval(0.1), 0.0);
        assert!((d.eval(0.3) - 1.0).abs() < 1e-15);
        assert!((d.eval(0.6)).abs() < 1e-15);
        assert_eq!(d.support(), Some((0.2, 0.6)));
        assert!((d.integral(0.0, 1.0) - 0.4).abs() < 1e-15);
    }
}
