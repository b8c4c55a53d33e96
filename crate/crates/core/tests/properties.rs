use std::sync::Arc;

use fkpp_core::grid::{build_grid, convolve, make_kernel, Domain1D, Grid, GridFunction, KernelKind};
use fkpp_core::logistic::{energy_e, LogisticProblem};
use fkpp_core::measure::{
    c_bounds, c_ns, Atom, ExponentRange, MeasureComponent, PiecewiseDensity, SignedMeasure,
};
use fkpp_core::operator::{assemble_superposition, form_value, FormPart, DEFAULT_QUADRATURE};
use fkpp_core::spectral::{principal_eigen, solve_principal};
use proptest::prelude::*;

fn unit_grid(n: u32) -> Arc<Grid> {
    build_grid(&Domain1D::interval(0.0, 1.0).unwrap(), n).unwrap()
}

fn values(grid: &Arc<Grid>, seed: &[f64]) -> GridFunction {
    let n = seed.len();
    GridFunction::from_fn(grid.clone(), {
        let mut k = 0;
        move |_| {
            k += 1;
            seed[(k - 1) % n]
        }
    })
}

fn nonnegative_measure() -> impl Strategy<Value = SignedMeasure> {
    (
        prop::collection::vec((0.05f64..1.0, 0.1f64..2.0), 1..4),
        prop::option::of((0.1f64..0.5, 0.1f64..0.4, 0.1f64..1.5)),
    )
        .prop_map(|(atoms, density)| {
            let atoms: Vec<Atom> = atoms.into_iter().map(|(s, weight)| Atom { s, weight }).collect();
            let densities = density
                .map(|(lo, len, v)| vec![PiecewiseDensity::constant(lo, lo + len, v).unwrap()])
                .unwrap_or_default();
            let plus = MeasureComponent::new(atoms, densities).unwrap();
            SignedMeasure::new(plus, MeasureComponent::zero(), 0.5, 1).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn operator_is_symmetric_with_nonpositive_offdiagonal(mu in nonnegative_measure()) {
        let g = unit_grid(32);
        let op = assemble_superposition(&g, &mu, DEFAULT_QUADRATURE).unwrap();
        let a = op.a_mu();
        for i in 0..a.nrows() {
            for j in 0..i {
                prop_assert_eq!(a[(i, j)], a[(j, i)]);
                prop_assert!(a[(i, j)] <= 0.0);
            }
        }
        prop_assert!(op.kernel_positive());
        prop_assert!(op.is_coercive());
    }

    #[test]
    fn modulus_never_raises_form_for_nonnegative_measures(
        mu in nonnegative_measure(),
        seed in prop::collection::vec(-1.0f64..1.0, 8..40),
    ) {
        let g = unit_grid(32);
        let op = assemble_superposition(&g, &mu, DEFAULT_QUADRATURE).unwrap();
        let u = values(&g, &seed);
        let a = u.abs();
        let qa = form_value(&op, &a, &a, FormPart::Signed).unwrap();
        let qu = form_value(&op, &u, &u, FormPart::Signed).unwrap();
        prop_assert!(qa <= qu + 1e-12 * qu.abs());
    }

    #[test]
    fn form_is_symmetric_bilinear(
        mu in nonnegative_measure(),
        a in prop::collection::vec(-1.0f64..1.0, 5..20),
        b in prop::collection::vec(-1.0f64..1.0, 5..20),
        t in -3.0f64..3.0,
    ) {
        let g = unit_grid(24);
        let op = assemble_superposition(&g, &mu, DEFAULT_QUADRATURE).unwrap();
        let (u, v) = (values(&g, &a), values(&g, &b));
        let uv = form_value(&op, &u, &v, FormPart::Signed).unwrap();
        let vu = form_value(&op, &v, &u, FormPart::Signed).unwrap();
        let scale = form_value(&op, &u, &u, FormPart::Signed).unwrap()
            + form_value(&op, &v, &v, FormPart::Signed).unwrap();
        prop_assert!((uv - vu).abs() <= 1e-12 * scale);
        let w = u.with_values(u.values().iter().zip(v.values()).map(|(x, y)| x + t * y).collect()).unwrap();
        let lin = form_value(&op, &w, &v, FormPart::Signed).unwrap();
        let expect = uv + t * form_value(&op, &v, &v, FormPart::Signed).unwrap();
        prop_assert!((lin - expect).abs() <= 1e-10 * scale.max(1.0) * (1.0 + t.abs()));
    }

    #[test]
    fn kernels_have_unit_mass_and_symmetric_convolution(
        gaussian in any::<bool>(),
        width in 0.03f64..0.6,
        a in prop::collection::vec(-1.0f64..1.0, 5..30),
        b in prop::collection::vec(-1.0f64..1.0, 5..30),
    ) {
        let g = unit_grid(64);
        let kind = if gaussian { KernelKind::Gaussian } else { KernelKind::Tophat };
        let k = make_kernel(kind, width, &g).unwrap();
        prop_assert!((k.mass() - 1.0).abs() <= 1e-14);
        for j in 1..=k.reach() as i64 {
            prop_assert_eq!(k.weight(j), k.weight(-j));
        }
        let (u, v) = (values(&g, &a), values(&g, &b));
        let vju = v.inner(&convolve(&k, &u).unwrap()).unwrap();
        let ujv = u.inner(&convolve(&k, &v).unwrap()).unwrap();
        prop_assert!((vju - ujv).abs() <= 1e-12);
        prop_assert!(vju <= u.norm_l2() * v.norm_l2() + 1e-14);
    }

    #[test]
    fn decomposition_preserves_signed_mass(
        mu in nonnegative_measure(),
        neg in prop::collection::vec((0.01f64..0.45, 0.001f64..0.05), 0..3),
    ) {
        let minus = MeasureComponent::new(
            neg.into_iter().map(|(s, weight)| Atom { s, weight }).collect(),
            vec![],
        ).unwrap();
        let mu = SignedMeasure::new(mu.plus.clone(), minus, 0.5, 1).unwrap();
        let total: f64 = mu.quadrature_decompose(DEFAULT_QUADRATURE).iter().map(|e| e.w).sum();
        let all = ExponentRange::closed(0.0, 1.0);
        prop_assert!((total - (mu.plus.mass(all) - mu.minus.mass(all))).abs() <= 1e-10);
    }

    #[test]
    fn normalization_within_bounds(n in 1u32..4, s in 0.0f64..=1.0, s_bar in 0.05f64..0.9, frac in 0.01f64..1.0) {
        let delta = frac * (1.0 - s_bar);
        let b = c_bounds(n, s_bar, delta).unwrap();
        prop_assert!(c_ns(n, s) >= 0.0 && c_ns(n, s) <= b.c_up);
        if s >= s_bar && s <= 1.0 - delta {
            prop_assert!(c_ns(n, s) >= b.c_low_times_delta);
        }
    }

    #[test]
    fn projection_never_raises_energy(
        seed in prop::collection::vec(-1.5f64..1.5, 8..40),
        tau in 0.0f64..1.0,
        sigma in 0.0f64..20.0,
    ) {
        let g = unit_grid(32);
        let mu = SignedMeasure::three_atom_example(0.6, 0.3, 0.01).unwrap();
        let op = assemble_superposition(&g, &mu, DEFAULT_QUADRATURE).unwrap();
        let k = make_kernel(KernelKind::Gaussian, 0.2, &g).unwrap();
        let p = LogisticProblem::uniform(&g, sigma, 1.0, tau, k).unwrap();
        let u = values(&g, &seed);
        let e = energy_e(&p, &op, &u).unwrap();
        let ea = energy_e(&p, &op, &u.abs()).unwrap();
        prop_assert!(ea <= e + 1e-12 * e.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn eigenvalue_is_monotone_under_domain_growth(mu in nonnegative_measure(), grow in 1u32..8) {
        let small = Domain1D::interval(0.0, 1.0).unwrap();
        let large = Domain1D::interval(0.0, 1.0 + grow as f64 / 8.0).unwrap();
        let a = solve_principal(&small, &mu, 32, DEFAULT_QUADRATURE).unwrap();
        let b = solve_principal(&large, &mu, 32, DEFAULT_QUADRATURE).unwrap();
        prop_assert!(b.pair.lambda <= a.pair.lambda);
    }

    #[test]
    fn ground_state_is_positive_and_simple(mu in nonnegative_measure()) {
        let g = unit_grid(48);
        let op = assemble_superposition(&g, &mu, DEFAULT_QUADRATURE).unwrap();
        let pair = principal_eigen(&op).unwrap();
        prop_assert!(pair.e.values().iter().all(|v| *v > 0.0));
        prop_assert!(pair.is_simple());
        prop_assert!(pair.residual <= 1e-8);
    }

    #[test]
    fn dilation_with_matching_resolution_scales_exactly(s in 0.05f64..1.0, k in 1u32..4) {
        // Ω_r sampled with n/r cells per unit has the same lattice as Ω with n,
        // so the eigenvalue scales exactly as r^{-2s}.
        let r = f64::from(1u32 << k);
        let mu = SignedMeasure::dirac(s, 1.0).unwrap();
        let unit = Domain1D::interval(0.0, 1.0).unwrap();
        let a = solve_principal(&unit, &mu, 128, DEFAULT_QUADRATURE).unwrap();
        let b = solve_principal(&unit.scaled(r).unwrap(), &mu, 128 >> k, DEFAULT_QUADRATURE).unwrap();
        let ratio = b.pair.lambda * r.powf(2.0 * s) / a.pair.lambda;
        prop_assert!((ratio - 1.0).abs() <= 1e-10, "{}", ratio);
    }
}
