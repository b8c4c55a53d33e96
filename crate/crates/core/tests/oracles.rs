//! Discrete quantities against values obtained without the lattice scheme.

use std::f64::consts::PI;

use fkpp_core::grid::{build_grid, Domain1D, GridFunction};
use fkpp_core::measure::{c_ns, SignedMeasure};
use fkpp_core::operator::{assemble_superposition, form_value, FormPart, DEFAULT_QUADRATURE};
use fkpp_core::spectral::solve_principal;
use statrs::function::beta::beta;
use statrs::function::gamma::gamma;

/// `c ∫∫_{ℝ²} (u(x)−u(y))²/|x−y|^{1+2s}` for `u = x(1−x)` on `(0,1)`.
///
/// On the square the integrand is `|x−y|^{1−2s}(1−x−y)²`; with `p = x−y`,
/// `q = x+y` the `q` integral is `2(1−|p|)³/3`, leaving `(2/3)B(2−2s, 4)`.
/// The exterior part is `(2/s)B(3−2s, 3)`.
fn bump_form(s: f64) -> f64 {
    let square = 2.0 / 3.0 * beta(2.0 - 2.0 * s, 4.0);
    let exterior = 2.0 / s * beta(3.0 - 2.0 * s, 3.0);
    c_ns(1, s) * (square + exterior)
}

fn discrete_form(s: f64, n: u32) -> f64 {
    let grid = build_grid(&Domain1D::interval(0.0, 1.0).unwrap(), n).unwrap();
    let op = assemble_superposition(&grid, &SignedMeasure::dirac(s, 1.0).unwrap(), DEFAULT_QUADRATURE)
        .unwrap();
    let u = GridFunction::from_fn(grid, |x| x * (1.0 - x));
    form_value(&op, &u, &u, FormPart::Signed).unwrap()
}

#[test]
fn half_laplacian_form_of_bump_is_one_over_four_pi() {
    assert!((bump_form(0.5) - 1.0 / (4.0 * PI)).abs() < 1e-6);
    let q = discrete_form(0.5, 256);
    assert!((q * 4.0 * PI - 1.0).abs() < 0.02, "{q}");
}

#[test]
fn fractional_forms_of_bump_match_quadrature() {
    for s in [0.2, 0.35, 0.65, 0.8] {
        let exact = bump_form(s);
        let q = discrete_form(s, 256);
        assert!((q / exact - 1.0).abs() < 0.02, "s={s}: {q} vs {exact}");
    }
}

#[test]
fn local_and_zero_exponent_forms() {
    // ∫ (u')² = ∫ (1−2x)² = 1/3 and ∫ u² = 1/30.
    // The zero ghost half a cell outside the boundary makes the local form
    // first order in h.
    let coarse = (discrete_form(1.0, 128) * 3.0 - 1.0).abs();
    let fine = (discrete_form(1.0, 512) * 3.0 - 1.0).abs();
    assert!(fine < 0.01 && fine < 0.3 * coarse, "{coarse} {fine}");
    assert!((discrete_form(0.0, 256) * 30.0 - 1.0).abs() < 1e-3);
}

#[test]
fn normalization_matches_gamma_function_formula() {
    for n in 1..=3u32 {
        for s in [0.1, 0.25, 0.5, 0.75, 0.9] {
            let nf = n as f64;
            let expect = 2f64.powf(2.0 * s - 1.0) * gamma((nf + 2.0 * s) / 2.0) * s * (1.0 - s)
                / (PI.powf(nf / 2.0) * gamma(2.0 - s));
            assert!((c_ns(n, s) - expect).abs() <= 1e-12 * expect, "N={n} s={s}");
        }
    }
}

#[test]
fn half_laplacian_eigenvalue_on_unit_interval() {
    // Principal eigenvalue of the half-Laplacian on (−1, 1) is 1.1577738...;
    // (0, 1) is that interval shrunk by 1/2, which doubles it.
    let reference = 2.0 * 1.157_773_883_697;
    let s = solve_principal(
        &Domain1D::interval(0.0, 1.0).unwrap(),
        &SignedMeasure::dirac(0.5, 1.0).unwrap(),
        512,
        DEFAULT_QUADRATURE,
    )
    .unwrap();
    assert!((s.pair.lambda / reference - 1.0).abs() < 5e-3, "{}", s.pair.lambda);
}
