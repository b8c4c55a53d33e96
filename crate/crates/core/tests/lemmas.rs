//! Discrete analogues of the structural inequalities on measures and forms.

use std::sync::Arc;

use fkpp_core::grid::{build_grid, Domain1D, Grid, GridFunction};
use fkpp_core::measure::{
    check_hypotheses, Atom, ExponentRange, MeasureComponent, PiecewiseDensity, SignedMeasure,
};
use fkpp_core::operator::{
    assemble_fractional, assemble_superposition, energy_i, form_value, max_form_ratio, FormPart,
    DEFAULT_QUADRATURE,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_grid(n: u32) -> Arc<Grid> {
    build_grid(&Domain1D::interval(0.0, 1.0).unwrap(), n).unwrap()
}

fn random_fn(grid: &Arc<Grid>, rng: &mut ChaCha8Rng) -> GridFunction {
    // Two sine modes plus nodal noise.
    let (a, b, c) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.0..0.3));
    let k = rng.gen_range(1..12) as f64;
    GridFunction::from_fn(grid.clone(), |x| {
        a * (std::f64::consts::PI * x).sin() + b * (k * std::f64::consts::PI * x).sin()
            + c * rng.gen_range(-1.0..1.0)
    })
}

#[test]
fn lower_exponents_are_controlled_by_higher_ones() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (s1, s2) in [(0.0, 0.3), (0.2, 0.7), (0.5, 1.0), (0.0, 1.0)] {
        let mut constants = Vec::new();
        for n in [64, 128] {
            let g = unit_grid(n);
            let a1 = assemble_fractional(&g, s1).unwrap();
            let a2 = assemble_fractional(&g, s2).unwrap();
            let c = max_form_ratio(a1.matrix(), a2.matrix()).unwrap();
            for _ in 0..100 {
                let u = random_fn(&g, &mut rng);
                let (q1, q2) = (a1.quadratic(&u).unwrap(), a2.quadratic(&u).unwrap());
                assert!(q1 <= c * q2 * (1.0 + 1e-10), "s1={s1} s2={s2}");
            }
            constants.push(c);
        }
        // The fitted constant is a property of the domain, not of the grid.
        assert!((constants[1] / constants[0] - 1.0).abs() < 0.05, "{constants:?}");
    }
}

#[test]
fn negative_part_is_reabsorbed_by_upper_exponents() {
    let g = unit_grid(128);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for alpha in [0.01, 0.05] {
        let mu = SignedMeasure::three_atom_example(0.6, 0.3, alpha).unwrap();
        let gamma = check_hypotheses(&mu, 0.5, None).unwrap().gamma_min;
        let op = assemble_superposition(&g, &mu, DEFAULT_QUADRATURE).unwrap();
        let c0 = max_form_ratio(op.a_minus(), op.a_plus_upper()).unwrap() / gamma;
        assert!(c0.is_finite() && c0 > 0.0);
        for _ in 0..100 {
            let u = random_fn(&g, &mut rng);
            let minus = form_value(&op, &u, &u, FormPart::Minus).unwrap();
            let upper = op.a_plus_upper();
            let h = g.h();
            let top = h * u
                .values()
                .iter()
                .enumerate()
                .map(|(i, ui)| ui * (0..g.len()).map(|j| upper[(i, j)] * u.values()[j]).sum::<f64>())
                .sum::<f64>();
            assert!(minus <= c0 * gamma * top * (1.0 + 1e-10));
        }
    }
}

#[test]
fn energy_controls_the_positive_norm() {
    let g = unit_grid(128);
    let mu = SignedMeasure::three_atom_example(0.6, 0.3, 0.05).unwrap();
    let op = assemble_superposition(&g, &mu, DEFAULT_QUADRATURE).unwrap();
    let c = 0.5 / max_form_ratio(op.a_plus(), op.a_mu()).unwrap();
    assert!(c > 0.0 && c <= 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let u = random_fn(&g, &mut rng);
        let plus = form_value(&op, &u, &u, FormPart::Plus).unwrap();
        assert!(energy_i(&op, &u).unwrap() >= c * plus * (1.0 - 1e-10));
    }
}

#[test]
fn exponent_weights_compare_across_the_split() {
    let plus = MeasureComponent::new(
        vec![Atom { s: 1.0, weight: 1.0 }],
        vec![PiecewiseDensity::constant(0.55, 0.9, 1.0).unwrap()],
    )
    .unwrap();
    let minus = MeasureComponent::new(
        vec![Atom { s: 0.2, weight: 0.02 }],
        vec![PiecewiseDensity::constant(0.1, 0.3, 0.05).unwrap()],
    )
    .unwrap();
    let s_bar = 0.5;
    let mu = SignedMeasure::new(plus, minus, s_bar, 1).unwrap();
    let neg_mass = mu.minus.mass(ExponentRange::open(0.0, s_bar));
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for r in [0.3, 0.5, 2.0] {
        let two_r: f64 = 2.0 * r;
        for _ in 0..100 {
            let zeta = rng.gen_range(1e-3..two_r);
            let big_s = rng.gen_range(s_bar..=1.0);
            let pos_mass = mu.plus.mass(ExponentRange::closed_open(s_bar, big_s));
            let weight = |s: f64| zeta.powf(-2.0 * s);
            let neg = mu.minus.integrate(ExponentRange::open(0.0, s_bar), DEFAULT_QUADRATURE, weight);
            let pos = mu
                .plus
                .integrate(ExponentRange::closed_open(s_bar, big_s), DEFAULT_QUADRATURE, weight);
            let lhs = 1f64.min(two_r.powf(2.0 * s_bar)) * pos_mass * neg;
            let rhs = two_r.powf(2.0 * s_bar).max(two_r.powi(2)) * neg_mass * pos;
            assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300, "R={r} zeta={zeta} S={big_s}");
        }
    }
}

#[test]
fn modulus_lowers_form_strictly_for_sign_changing_states() {
    let g = unit_grid(128);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for alpha in [0.01, 0.05] {
        let mu = SignedMeasure::three_atom_example(0.6, 0.3, alpha).unwrap();
        let op = assemble_superposition(&g, &mu, DEFAULT_QUADRATURE).unwrap();
        assert!(op.kernel_positive());
        for _ in 0..50 {
            let u = random_fn(&g, &mut rng);
            if u.max() <= 0.0 || u.min() >= 0.0 {
                continue;
            }
            let a = u.abs();
            let qa = form_value(&op, &a, &a, FormPart::Signed).unwrap();
            let qu = form_value(&op, &u, &u, FormPart::Signed).unwrap();
            assert!(qa < qu);
        }
        let positive = GridFunction::from_fn(g.clone(), |x| x * (1.0 - x));
        let q = form_value(&op, &positive, &positive, FormPart::Signed).unwrap();
        let qa = form_value(&op, &positive.abs(), &positive.abs(), FormPart::Signed).unwrap();
        assert_eq!(q, qa);
    }
}

#[test]
fn strong_reabsorption_fails_without_middle_exponents() {
    let plus = MeasureComponent::dirac(1.0, 1.0).unwrap();
    let minus = MeasureComponent::dirac(0.5, 0.05).unwrap();
    let mu = SignedMeasure::new(plus, minus, 0.75, 1).unwrap();
    let report = check_hypotheses(&mu, 0.5, None).unwrap();
    assert!(!report.mu2forte_ok);
    let op = assemble_superposition(&unit_grid(128), &mu, DEFAULT_QUADRATURE).unwrap();
    assert!(op.is_coercive());
}
