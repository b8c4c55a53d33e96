//! Serializable descriptions of measures, domains and kernels, as they
//! appear in configuration files.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{make_kernel, Domain1D, Grid, Kernel, KernelKind};
use crate::measure::{Atom, MeasureComponent, PiecewiseDensity, SignedMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub s: f64,
    pub weight: f64,
    pub sign: Sign,
}

/// Piecewise-linear density on `[lo, hi]`. Without breakpoints, `values`
/// must hold a single constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub lo: f64,
    pub hi: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    pub sign: Sign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default)]
    pub atoms: Vec<AtomSpec>,
    #[serde(default)]
    pub densities: Vec<DensitySpec>,
    pub s_bar: f64,
    #[serde(default = "one")]
    pub dimension: u32,
}

fn one() -> u32 {
    1
}

impl DensitySpec {
    fn build(&self) -> Result<PiecewiseDensity> {
        if self.breakpoints.is_empty() {
            match self.values.as_slice() {
                [v] => PiecewiseDensity::constant(self.lo, self.hi, *v),
                _ => Err(Error::InvalidInput(
                    "a density without breakpoints needs exactly one value".into(),
                )),
            }
        } else {
            let (first, last) = (self.breakpoints[0], self.breakpoints[self.breakpoints.len() - 1]);
            if first != self.lo || last != self.hi {
                return Err(Error::InvalidInput(format!(
                    "density breakpoints must run from lo = {} to hi = {}",
                    self.lo, self.hi
                )));
            }
            PiecewiseDensity::new(self.breakpoints.clone(), self.values.clone())
        }
    }
}

impl MeasureSpec {
    pub fn build(&self) -> Result<SignedMeasure> {
        let mut parts = [(Vec::new(), Vec::new()), (Vec::new(), Vec::new())];
        for a in &self.atoms {
            let slot = &mut parts[(a.sign == Sign::Minus) as usize];
            slot.0.push(Atom { s: a.s, weight: a.weight });
        }
        for d in &self.densities {
            let slot = &mut parts[(d.sign == Sign::Minus) as usize];
            slot.1.push(d.build()?);
        }
        let [(pa, pd), (ma, md)] = parts;
        SignedMeasure::new(
            MeasureComponent::new(pa, pd)?,
            MeasureComponent::new(ma, md)?,
            self.s_bar,
            self.dimension,
        )
    }

    pub fn from_measure(mu: &SignedMeasure) -> Self {
        let mut atoms = Vec::new();
        let mut densities = Vec::new();
        for (component, sign) in [(&mu.plus, Sign::Plus), (&mu.minus, Sign::Minus)] {
            atoms.extend(component.atoms().iter().map(|a| AtomSpec {
                s: a.s,
                weight: a.weight,
                sign,
            }));
            densities.extend(component.densities().iter().map(|d| {
                let b = d.breakpoints();
                DensitySpec {
                    lo: b[0],
                    hi: b[b.len() - 1],
                    breakpoints: b.to_vec(),
                    values: d.values().to_vec(),
                    sign,
                }
            }));
        }
        Self {
            atoms,
            densities,
            s_bar: mu.s_bar,
            dimension: mu.dimension,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub width: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            kind: KernelKind::Tophat,
            width: 0.1,
        }
    }
}

impl KernelSpec {
    pub fn build(&self, grid: &Grid) -> Result<Kernel> {
        make_kernel(self.kind, self.width, grid)
    }
}

pub fn build_domain(intervals: &[[f64; 2]]) -> Result<Domain1D> {
    Domain1D::new(intervals.iter().map(|[a, b]| (*a, *b)).collect())
}

pub fn domain_intervals(domain: &Domain1D) -> Vec<[f64; 2]> {
    domain.intervals().iter().map(|&(a, b)| [a, b]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_round_trips_through_json() {
        let text = r#"{
            "atoms": [
                {"s": 1.0, "weight": 1.0, "sign": "plus"},
                {"s": 0.6, "weight": 1.0, "sign": "plus"},
                {"s": 0.3, "weight": 0.05, "sign": "minus"}
            ],
            "densities": [{"lo": 0.7, "hi": 0.9, "values": [2.0], "sign": "plus"}],
            "s_bar": 0.6
        }"#;
        let spec: MeasureSpec = serde_json::from_str(text).unwrap();
        let mu = spec.build().unwrap();
        assert_eq!(mu.plus.atoms().len(), 2);
        assert_eq!(mu.minus.atoms().len(), 1);
        assert!((mu.plus.total_mass() - 2.4).abs() < 1e-14);
        let again = MeasureSpec::from_measure(&mu).build().unwrap();
        assert_eq!(again, mu);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{"atoms": [], "s_bar": 1.0, "colour": 3}"#;
        assert!(serde_json::from_str::<MeasureSpec>(text).is_err());
        let text = r#"{"kind": "gaussian", "width": 0.2, "extra": 1}"#;
        assert!(serde_json::from_str::<KernelSpec>(text).is_err());
    }

    #[test]
    fn density_breakpoints_must_cover_support() {
        let d = DensitySpec {
            lo: 0.1,
            hi: 0.5,
            breakpoints: vec![0.1, 0.4],
            values: vec![1.0, 1.0],
            sign: Sign::Plus,
        };
        assert!(d.build().is_err());
    }
}
