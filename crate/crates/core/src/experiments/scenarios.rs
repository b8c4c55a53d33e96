use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::{Report, Window};
use super::{Scenario, ScenarioKind, ScenarioParams, SolverSpec};
use crate::error::{Error, Result};
use crate::grid::{build_grid, Domain1D, GridFunction};
use crate::inputs::{build_domain, KernelSpec, MeasureSpec};
use crate::logistic::{
    minimize_e_with_eigen, threshold_report, Classification, LogisticProblem, SolveOptions,
};
use crate::measure::{check_hypotheses, Atom, ExponentRange, MeasureComponent, SignedMeasure};
use crate::operator::{
    assemble_superposition, form_value, FormPart, SuperposedOperator, DEFAULT_QUADRATURE,
};
use crate::spectral::{principal_eigen, scaling_check, solve_principal, EigenPair, Solved};

/// Relative tolerance for the discretized scaling equality.
pub const DEFAULT_REL_TOL: f64 = 0.02;
/// Largest dilation tried when the survival radius is auto-selected.
const MAX_AUTO_SCALE: u32 = 64;
/// The union and its pieces must agree to this for purely local measures.
pub const LOCAL_UNION_TOL: f64 = 1e-10;

pub(super) fn run(sc: &Scenario) -> Result<Report> {
    let report = match sc.kind {
        ScenarioKind::ExtinctionSurvival => extinction_survival(sc)?,
        ScenarioKind::NegativeComponent => negative_component(sc)?,
        ScenarioKind::Fragmentation => fragmentation(sc)?,
        ScenarioKind::ScalingSurvival => scaling_survival(sc)?,
        ScenarioKind::TwoMeasures => two_measures(sc)?,
        ScenarioKind::ModulusCounterexample => modulus_counterexample(sc)?,
        ScenarioKind::AppendixCheck => appendix_check(sc)?,
    };
    Ok(report.finish())
}

fn atoms(plus: &[(f64, f64)], minus: &[(f64, f64)], s_bar: f64) -> SignedMeasure {
    let comp = |list: &[(f64, f64)]| {
        MeasureComponent::new(list.iter().map(|&(s, weight)| Atom { s, weight }).collect(), vec![])
            .expect("fixed atoms are valid")
    };
    SignedMeasure::new(comp(plus), comp(minus), s_bar, 1).expect("fixed measure is valid")
}

/// Values shared by every scenario once defaults are applied.
struct Common {
    n: u32,
    q: usize,
    nu: f64,
    tau: f64,
    kernel: KernelSpec,
    opts: SolveOptions,
}

fn common(p: &mut ScenarioParams, n_default: u32, seed: u64) -> Common {
    let solver = p.solver.get_or_insert_with(SolverSpec::default).clone();
    Common {
        n: *p.n_per_unit.get_or_insert(n_default),
        q: *p.quadrature.get_or_insert(DEFAULT_QUADRATURE),
        nu: *p.nu.get_or_insert(1.0),
        tau: *p.tau.get_or_insert(0.0),
        kernel: p.kernel.get_or_insert_with(KernelSpec::default).clone(),
        opts: solver.options(seed),
    }
}

fn measure_or(slot: &mut Option<MeasureSpec>, default: impl FnOnce() -> SignedMeasure) -> Result<SignedMeasure> {
    slot.get_or_insert_with(|| MeasureSpec::from_measure(&default())).build()
}

fn domain_or(slot: &mut Option<Vec<[f64; 2]>>, default: [f64; 2]) -> Result<Domain1D> {
    build_domain(slot.get_or_insert_with(|| vec![default]))
}

fn abs_residual(pair: &EigenPair) -> f64 {
    pair.residual * pair.lambda.abs()
}

/// Solves the logistic problem with constant `σ` on an already solved
/// eigenproblem and records classification, threshold consistency and slacks
/// under `key`.
fn solve_and_record(
    report: &mut Report,
    key: &str,
    solved: (&SuperposedOperator, &EigenPair),
    sigma: f64,
    c: &Common,
) -> Result<Classification> {
    let (op, pair) = solved;
    let grid = op.grid();
    let kernel = c.kernel.build(grid)?;
    let problem = LogisticProblem::uniform(grid, sigma, c.nu, c.tau, kernel.clone())?;
    let sol = minimize_e_with_eigen(&problem, op, pair, &c.opts)?;
    let threshold = threshold_report(&problem, pair, &kernel)?;
    report.check(format!("converged:{key}"), sol.converged);
    report.check(
        format!("threshold_consistent:{key}"),
        threshold.consistent_with(sol.classification),
    );
    report
        .slacks
        .insert(format!("extinction_condition:{key}"), threshold.lambda - threshold.extinction_lhs);
    report
        .slacks
        .insert(format!("survival_condition:{key}"), threshold.survival_rhs - threshold.lambda);
    report.classifications.insert(key.to_string(), sol.classification);
    report.solves.insert(key.to_string(), sol.summary());
    report.profiles.insert(key.to_string(), sol.u.clone());
    Ok(sol.classification)
}

fn extinction_survival(sc: &Scenario) -> Result<Report> {
    let mut p = sc.params.clone();
    let c = common(&mut p, 512, sc.seed);
    let mu = measure_or(&mut p.measure, || SignedMeasure::dirac(1.0, 1.0).unwrap())?;
    let domain = domain_or(&mut p.domain, [0.0, 1.0])?;
    let sigmas = p.sigma.get_or_insert_with(|| vec![9.0, 12.0]).clone();
    let hyp = check_hypotheses(&mu, domain.radius(), p.gamma_bar)?;
    let mut report = Report::new(sc.kind, sc.seed, p);
    report.hypotheses.insert("mu".into(), hyp);

    let s = solve_principal(&domain, &mu, c.n, c.q)?;
    report.eigenvalues.insert("lambda".into(), s.pair.lambda);
    report.metadata.insert("eigen_residual".into(), s.pair.residual);
    report.check("eigen_residual", s.pair.residual <= 1e-8);
    report.profiles.insert("eigenfunction".into(), s.pair.e.clone());
    for sigma in sigmas {
        let key = format!("sigma={sigma}");
        let class = solve_and_record(&mut report, &key, (&s.op, &s.pair), sigma, &c)?;
        if sigma + c.tau <= s.pair.lambda {
            report.check(format!("trivial:{key}"), class == Classification::Trivial);
        } else if s.pair.lambda < sigma {
            report.check(format!("nontrivial:{key}"), class == Classification::Nontrivial);
        }
    }
    Ok(report)
}

fn negative_component(sc: &Scenario) -> Result<Report> {
    let mut p = sc.params.clone();
    let c = common(&mut p, 256, sc.seed);
    let mu = measure_or(&mut p.measure, || {
        SignedMeasure::three_atom_example(0.6, 0.3, 0.05).unwrap()
    })?;
    let domain = domain_or(&mut p.domain, [0.0, 1.0])?;
    let epsilons = p.epsilons.get_or_insert_with(|| vec![0.1, 0.5, 0.9]).clone();
    if !mu.has_negative_part() {
        return Err(Error::InvalidInput("negative_component needs a negative part".into()));
    }
    if epsilons.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(Error::InvalidInput("epsilons must lie in (0, 1)".into()));
    }
    let hyp = check_hypotheses(&mu, domain.radius(), p.gamma_bar)?;
    let mut report = Report::new(sc.kind, sc.seed, p);
    if !hyp.mu2forte_ok {
        report.note(
            "strong reabsorption fails for this measure at the admissible gamma_bar; \
             the conclusion is tested anyway and the projection step relies on the \
             discrete kernel sign instead",
        );
    }
    report.hypotheses.insert("mu".into(), hyp);

    let grid = build_grid(&domain, c.n)?;
    let op_plus = assemble_superposition(&grid, &mu.positive_part(), c.q)?;
    let pair_plus = principal_eigen(&op_plus)?;
    report.eigenvalues.insert("lambda_plus".into(), pair_plus.lambda);
    for eps in epsilons {
        let key = format!("eps={eps}");
        let op = assemble_superposition(&grid, &mu.with_negative_scaled(eps)?, c.q)?;
        let pair = principal_eigen(&op)?;
        report.eigenvalues.insert(format!("lambda_{key}"), pair.lambda);
        let drop = pair_plus.lambda - pair.lambda;
        report.slacks.insert(format!("eigen_drop:{key}"), drop);
        report.check(format!("strict_drop:{key}"), drop > 0.0);
        report.check(format!("kernel_positive:{key}"), op.kernel_positive());

        let window = Window::new(
            pair.lambda,
            pair_plus.lambda - c.tau,
            abs_residual(&pair).max(abs_residual(&pair_plus)),
        );
        let sigma = window.sigma;
        report.windows.insert(key.clone(), window);
        let Some(sigma) = sigma else {
            report.inconclusive = true;
            report.note(format!("window for {key} is narrower than the eigen resolution"));
            continue;
        };
        let without = solve_and_record(&mut report, &format!("plus:{key}"), (&op_plus, &pair_plus), sigma, &c)?;
        let with = solve_and_record(&mut report, &format!("signed:{key}"), (&op, &pair), sigma, &c)?;
        report.check(format!("trivial_without_negative:{key}"), without == Classification::Trivial);
        report.check(format!("nontrivial_with_negative:{key}"), with == Classification::Nontrivial);
    }
    Ok(report)
}

fn congruent(a: &Domain1D, b: &Domain1D) -> bool {
    let (ia, ib) = (a.intervals(), b.intervals());
    ia.len() == ib.len() && {
        let shift = ib[0].0 - ia[0].0;
        ia.iter()
            .zip(ib)
            .all(|(x, y)| ((y.0 - x.0) - shift).abs() < 1e-12 && ((y.1 - x.1) - shift).abs() < 1e-12)
    }
}

fn fragmentation(sc: &Scenario) -> Result<Report> {
    let mut p = sc.params.clone();
    let c = common(&mut p, 128, sc.seed);
    let mu = measure_or(&mut p.measure, || atoms(&[(1.0, 1.0), (0.5, 1.0)], &[], 0.5))?;
    let first = domain_or(&mut p.domain, [0.0, 1.0])?;
    let second = domain_or(&mut p.domain2, [2.0, 3.0])?;
    let union = first.union(&second)?;
    let hyp = check_hypotheses(&mu, union.radius(), p.gamma_bar)?;
    let mut report = Report::new(sc.kind, sc.seed, p);
    report.hypotheses.insert("mu".into(), hyp);
    report.check("congruent_pieces", congruent(&first, &second));
    report.check(
        "nonlocal_positive_part",
        mu.plus.mass(ExponentRange::open(0.0, 1.0)) > 0.0,
    );

    let a = solve_principal(&first, &mu, c.n, c.q)?;
    let b = solve_principal(&second, &mu, c.n, c.q)?;
    let u = solve_principal(&union, &mu, c.n, c.q)?;
    report.eigenvalues.insert("lambda_first".into(), a.pair.lambda);
    report.eigenvalues.insert("lambda_second".into(), b.pair.lambda);
    report.eigenvalues.insert("lambda_union".into(), u.pair.lambda);
    let residual = abs_residual(&a.pair).max(abs_residual(&b.pair)).max(abs_residual(&u.pair));
    let drop = a.pair.lambda - u.pair.lambda;
    report.slacks.insert("union_drop".into(), drop);
    report.metadata.insert("eigen_residual_abs".into(), residual);
    report.check("union_strict", drop > 10.0 * residual);
    report.check(
        "pieces_equal",
        (a.pair.lambda - b.pair.lambda).abs() <= 1e-10 * a.pair.lambda,
    );
    report.metadata.insert("union_gap".into(), u.pair.gap);

    let control = SignedMeasure::dirac(1.0, 1.0)?;
    let ca = solve_principal(&first, &control, c.n, c.q)?;
    let cu = solve_principal(&union, &control, c.n, c.q)?;
    let diff = (cu.pair.lambda - ca.pair.lambda).abs();
    report.eigenvalues.insert("control_lambda_first".into(), ca.pair.lambda);
    report.eigenvalues.insert("control_lambda_union".into(), cu.pair.lambda);
    report.slacks.insert("control_difference".into(), diff);
    report.check("control_local_equal", diff <= LOCAL_UNION_TOL);

    let window = Window::new(u.pair.lambda, a.pair.lambda.min(b.pair.lambda) - c.tau, residual);
    let sigma = window.sigma;
    report.windows.insert("union".into(), window);
    let Some(sigma) = sigma else {
        report.inconclusive = true;
        report.note("union window is narrower than the eigen resolution");
        return Ok(report);
    };
    let ka = solve_and_record(&mut report, "first", (&a.op, &a.pair), sigma, &c)?;
    let kb = solve_and_record(&mut report, "second", (&b.op, &b.pair), sigma, &c)?;
    let ku = solve_and_record(&mut report, "union", (&u.op, &u.pair), sigma, &c)?;
    report.check("first_trivial", ka == Classification::Trivial);
    report.check("second_trivial", kb == Classification::Trivial);
    report.check("union_nontrivial", ku == Classification::Nontrivial);
    Ok(report)
}

fn scaling_survival(sc: &Scenario) -> Result<Report> {
    let mut p = sc.params.clone();
    if p.sigma.as_ref().is_some_and(|s| s != &[1.0]) || p.nu.is_some_and(|v| v != 1.0) {
        return Err(Error::InvalidInput(
            "scaling_survival fixes sigma = nu = 1".into(),
        ));
    }
    p.sigma = Some(vec![1.0]);
    let c = common(&mut p, 64, sc.seed);
    let mu = measure_or(&mut p.measure, || atoms(&[(1.0, 1.0), (0.75, 1.0)], &[], 0.75))?;
    let domain = domain_or(&mut p.domain, [0.0, 1.0])?;
    let rel_tol = *p.rel_tol.get_or_insert(DEFAULT_REL_TOL);
    let support = mu
        .plus
        .support()
        .ok_or_else(|| Error::InvalidInput("positive part has no mass".into()))?;
    let plus = mu.positive_part();
    let base = solve_principal(&domain, &plus, c.n, c.q)?;
    let inf_factor = |r: f64| r.powf(2.0 * support.0).min(r.powf(2.0 * support.1));
    let r = match p.scale {
        Some(r) => r,
        None => (2..=MAX_AUTO_SCALE)
            .map(f64::from)
            .find(|&r| inf_factor(r) > base.pair.lambda)
            .ok_or_else(|| Error::InvalidInput("no dilation up to 64 exceeds the eigenvalue".into()))?,
    };
    p.scale = Some(r);
    let hyp = check_hypotheses(&mu, domain.radius(), p.gamma_bar)?;
    let mut report = Report::new(sc.kind, sc.seed, p);
    report.hypotheses.insert("mu".into(), hyp);
    report.metadata.insert("scale".into(), r);
    report.metadata.insert("inf_scale_factor".into(), inf_factor(r));
    report.eigenvalues.insert("lambda_plus".into(), base.pair.lambda);

    let pre = inf_factor(r) - base.pair.lambda;
    report.slacks.insert("scale_hypothesis".into(), pre);
    report.check("scale_hypothesis", pre >= 0.0);
    report.check("strict_or_negative", pre > 0.0 || mu.has_negative_part());

    let scaled = domain.scaled(r)?;
    let bounds = scaling_check(&domain, &plus, c.n, c.q, r, rel_tol)?;
    report.eigenvalues.insert("lambda_plus_scaled".into(), bounds.lambda_scaled);
    report.slacks.insert("scaling_lower".into(), bounds.lambda - bounds.lower);
    report.slacks.insert("scaling_upper".into(), bounds.upper - bounds.lambda);
    report.check("scaling_bounds", bounds.holds);

    let s = solve_principal(&scaled, &mu, c.n, c.q)?;
    report.eigenvalues.insert("lambda_scaled".into(), s.pair.lambda);
    report.slacks.insert("below_one".into(), 1.0 - s.pair.lambda);
    report.check("lambda_scaled_below_one", s.pair.lambda < 1.0);
    let class = solve_and_record(&mut report, "scaled", (&s.op, &s.pair), 1.0, &c)?;
    report.check("nontrivial", class == Classification::Nontrivial);
    Ok(report)
}

fn two_measures(sc: &Scenario) -> Result<Report> {
    let mut p = sc.params.clone();
    let c = common(&mut p, 128, sc.seed);
    let mu1 = measure_or(&mut p.measure, || SignedMeasure::dirac(0.2, 1.0).unwrap())?;
    let mu2 = measure_or(&mut p.measure2, || SignedMeasure::dirac(0.8, 1.0).unwrap())?;
    let domain = domain_or(&mut p.domain, [0.0, 1.0])?;
    let mut radii = p.radii.get_or_insert_with(|| vec![0.25, 0.5, 1.0, 2.0, 4.0]).clone();
    radii.sort_by(f64::total_cmp);
    if mu1.has_negative_part() || mu2.has_negative_part() {
        return Err(Error::InvalidInput("two_measures compares nonnegative measures".into()));
    }
    let (s1_lo, s1) = mu1.plus.support().ok_or_else(|| Error::InvalidInput("empty measure".into()))?;
    let (s2, s2_hi) = mu2.plus.support().ok_or_else(|| Error::InvalidInput("empty measure".into()))?;
    let h1 = check_hypotheses(&mu1, domain.radius(), p.gamma_bar)?;
    let h2 = check_hypotheses(&mu2, domain.radius(), p.gamma_bar)?;
    let mut report = Report::new(sc.kind, sc.seed, p);
    report.hypotheses.insert("mu1".into(), h1);
    report.hypotheses.insert("mu2".into(), h2);
    report.check("separated_supports", s1 < s2);

    // Ball bounds around the midpoint of the longest component; metadata only.
    let longest = domain
        .intervals()
        .iter()
        .copied()
        .fold((0.0, 0.0), |best, iv| if iv.1 - iv.0 > best.1 - best.0 { iv } else { best });
    let x0 = 0.5 * (longest.0 + longest.1);
    let outer = domain
        .intervals()
        .iter()
        .map(|&(a, b)| (x0 - a).abs().max((b - x0).abs()))
        .fold(0.0, f64::max);
    report.metadata.insert("ball_center".into(), x0);
    report.metadata.insert("ball_inner_radius".into(), domain.inner_radius());
    report.metadata.insert("ball_outer_radius".into(), outer);

    let mut table: Vec<(f64, Solved, Solved)> = Vec::with_capacity(radii.len());
    for &r in &radii {
        let scaled = domain.scaled(r)?;
        let a = solve_principal(&scaled, &mu1, c.n, c.q)?;
        let b = solve_principal(&scaled, &mu2, c.n, c.q)?;
        report.eigenvalues.insert(format!("mu1:r={r}"), a.pair.lambda);
        report.eigenvalues.insert(format!("mu2:r={r}"), b.pair.lambda);
        report.slacks.insert(format!("mu2_minus_mu1:r={r}"), b.pair.lambda - a.pair.lambda);
        table.push((r, a, b));
    }
    for w in table.windows(2) {
        let (r0, r1) = (w[0].0, w[1].0);
        if w[0].1.grid.is_subset_of(&w[1].1.grid) {
            for (name, x, y) in [("mu1", &w[0].1, &w[1].1), ("mu2", &w[0].2, &w[1].2)] {
                report.check(
                    format!("monotone:{name}:r={r0}->{r1}"),
                    y.pair.lambda <= x.pair.lambda + 1e-10,
                );
            }
        }
    }
    if s1_lo == s1 && s2 == s2_hi {
        if let Some(unit) = table.iter().find(|t| t.0 == 1.0) {
            let ratio = unit.2.pair.lambda / unit.1.pair.lambda;
            report
                .metadata
                .insert("power_law_crossover".into(), ratio.powf(1.0 / (2.0 * (s2 - s1))));
        }
    }

    let bracket = table.windows(2).position(|w| {
        w[0].2.pair.lambda > w[0].1.pair.lambda && w[1].2.pair.lambda < w[1].1.pair.lambda
    });
    report.check("crossover_found", bracket.is_some());
    let Some(k) = bracket else {
        return Ok(report);
    };
    report.metadata.insert("crossover_r_lo".into(), table[k].0);
    report.metadata.insert("crossover_r_hi".into(), table[k + 1].0);

    let (r_lo, a_lo, b_lo) = &table[k];
    let (r_hi, a_hi, b_hi) = &table[k + 1];
    let res_lo = abs_residual(&a_lo.pair).max(abs_residual(&b_lo.pair));
    let res_hi = abs_residual(&a_hi.pair).max(abs_residual(&b_hi.pair));
    let small = Window::new(a_lo.pair.lambda, b_lo.pair.lambda - c.tau, res_lo);
    let large = Window::new(b_hi.pair.lambda, a_hi.pair.lambda - c.tau, res_hi);
    let (sigma_small, sigma_large) = (small.sigma, large.sigma);
    report.windows.insert(format!("r={r_lo}"), small);
    report.windows.insert(format!("r={r_hi}"), large);
    let (Some(sigma_small), Some(sigma_large)) = (sigma_small, sigma_large) else {
        report.inconclusive = true;
        report.note("a crossover window is narrower than the eigen resolution");
        return Ok(report);
    };
    let k1 = solve_and_record(&mut report, &format!("mu1:r={r_lo}"), (&a_lo.op, &a_lo.pair), sigma_small, &c)?;
    let k2 = solve_and_record(&mut report, &format!("mu2:r={r_lo}"), (&b_lo.op, &b_lo.pair), sigma_small, &c)?;
    report.check("small_scale_favors_mu1", k1 == Classification::Nontrivial && k2 == Classification::Trivial);
    let k1 = solve_and_record(&mut report, &format!("mu1:r={r_hi}"), (&a_hi.op, &a_hi.pair), sigma_large, &c)?;
    let k2 = solve_and_record(&mut report, &format!("mu2:r={r_hi}"), (&b_hi.op, &b_hi.pair), sigma_large, &c)?;
    report.check("large_scale_favors_mu2", k1 == Classification::Trivial && k2 == Classification::Nontrivial);
    Ok(report)
}

/// Positive bump on the second fifth of the hull, negative bump on the fourth.
pub(crate) fn two_bump(grid: &std::sync::Arc<crate::grid::Grid>, lo: f64, hi: f64) -> GridFunction {
    let len = hi - lo;
    let bump = |x: f64, a: f64, b: f64| {
        if x > a && x < b {
            (std::f64::consts::PI * (x - a) / (b - a)).sin().powi(2)
        } else {
            0.0
        }
    };
    GridFunction::from_fn(grid.clone(), |x| {
        bump(x, lo + 0.1 * len, lo + 0.4 * len) - bump(x, lo + 0.6 * len, lo + 0.9 * len)
    })
}

/// `Q_μ(|u|) − Q_μ(u)` on the signed form.
pub(crate) fn modulus_gain(op: &SuperposedOperator, u: &GridFunction) -> Result<f64> {
    let a = u.abs();
    Ok(form_value(op, &a, &a, FormPart::Signed)? - form_value(op, u, u, FormPart::Signed)?)
}

pub(crate) fn random_sign_changing(grid: &std::sync::Arc<crate::grid::Grid>, rng: &mut ChaCha8Rng) -> GridFunction {
    loop {
        let u = GridFunction::from_fn(grid.clone(), |_| rng.gen_range(-1.0..1.0));
        if u.max() > 0.0 && u.min() < 0.0 {
            return u;
        }
    }
}

fn modulus_counterexample(sc: &Scenario) -> Result<Report> {
    let mut p = sc.params.clone();
    let c = common(&mut p, 128, sc.seed);
    let alpha = *p.alpha.get_or_insert(0.05);
    let mu = measure_or(&mut p.measure, || atoms(&[(1.0, 1.0)], &[(0.5, alpha)], 0.75))?;
    let passing = measure_or(&mut p.measure2, || {
        SignedMeasure::three_atom_example(0.6, 0.3, 0.01).unwrap()
    })?;
    let domain = domain_or(&mut p.domain, [0.0, 1.0])?;
    let samples = *p.samples.get_or_insert(50);
    let h_bad = check_hypotheses(&mu, domain.radius(), p.gamma_bar)?;
    let h_good = check_hypotheses(&passing, domain.radius(), p.gamma_bar)?;
    let mut report = Report::new(sc.kind, sc.seed, p);
    report.check("counterexample_fails_strong_reabsorption", !h_bad.mu2forte_ok);
    report.check("comparison_passes_strong_reabsorption", h_good.mu2forte_ok);
    report.hypotheses.insert("counterexample".into(), h_bad);
    report.hypotheses.insert("comparison".into(), h_good);

    let grid = build_grid(&domain, c.n)?;
    let op = assemble_superposition(&grid, &mu, c.q)?;
    report.eigenvalues.insert("margin_counterexample".into(), op.coercivity_margin());
    report.check("counterexample_coercive", op.is_coercive());
    let lo = domain.intervals()[0].0;
    let hi = domain.intervals()[domain.intervals().len() - 1].1;
    let u = two_bump(&grid, lo, hi);
    let gain = modulus_gain(&op, &u)?;
    report.slacks.insert("two_bump_modulus_gain".into(), gain);
    report.check("modulus_increases_form", gain > 0.0);
    report.profiles.insert("two_bump".into(), u);

    let good = assemble_superposition(&grid, &passing, c.q)?;
    report.eigenvalues.insert("margin_comparison".into(), good.coercivity_margin());
    report.check("comparison_kernel_positive", good.kernel_positive());
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let v = random_sign_changing(&grid, &mut rng);
        worst = worst.max(modulus_gain(&good, &v)?);
    }
    report.slacks.insert("random_max_modulus_gain".into(), worst);
    report.check("modulus_strictly_decreases_form", worst < 0.0);
    Ok(report)
}

fn appendix_check(sc: &Scenario) -> Result<Report> {
    let mut p = sc.params.clone();
    let c = common(&mut p, 256, sc.seed);
    let alpha = *p.alpha.get_or_insert(0.01);
    let (s1, s2) = (0.6, 0.3);
    let mu = SignedMeasure::three_atom_example(s1, s2, alpha)?;
    p.measure = Some(MeasureSpec::from_measure(&mu));
    let domain = domain_or(&mut p.domain, [0.0, 1.0])?;
    let hyp = check_hypotheses(&mu, domain.radius(), p.gamma_bar)?;
    let mut report = Report::new(sc.kind, sc.seed, p);

    let gamma_bar = hyp.gamma_bar_used;
    let threshold = gamma_bar * (1.0 - s1);
    report.metadata.insert("alpha".into(), alpha);
    report.metadata.insert("gamma_bar".into(), gamma_bar);
    report.metadata.insert("gamma_bar_upper".into(), hyp.gamma_bar_upper);
    report.metadata.insert("alpha_threshold".into(), threshold);
    report.metadata.insert("expected_gamma_min".into(), alpha / 2.0);
    report.check("gamma_min_is_half_alpha", (hyp.gamma_min - alpha / 2.0).abs() <= 1e-12);
    if alpha <= threshold {
        let expect = alpha / gamma_bar;
        report.metadata.insert("expected_delta_star".into(), expect);
        report.check("strong_reabsorption_holds", hyp.mu2forte_ok);
        report.check(
            "delta_star_is_alpha_over_gamma_bar",
            hyp.delta_star.is_some_and(|d| (d - expect).abs() <= 1e-9 * expect),
        );
    } else {
        report.note(format!(
            "alpha = {alpha} exceeds gamma_bar (1 - s1) = {threshold}; strong reabsorption is not expected"
        ));
        report.check("strong_reabsorption_fails_above_threshold", !hyp.mu2forte_ok);
    }
    let decomposition = mu.quadrature_decompose(c.q);
    let expected = [(1.0, 1.0), (s1, 1.0), (s2, -alpha)];
    report.check(
        "decomposition",
        decomposition.len() == 3
            && decomposition
                .iter()
                .zip(expected)
                .all(|(e, (s, w))| e.s == s && (e.w - w).abs() <= 1e-15),
    );
    report.hypotheses.insert("mu".into(), hyp);

    let s = solve_principal(&domain, &mu, c.n, c.q)?;
    let plus = solve_principal(&domain, &mu.positive_part(), c.n, c.q)?;
    report.eigenvalues.insert("lambda".into(), s.pair.lambda);
    report.eigenvalues.insert("lambda_plus".into(), plus.pair.lambda);
    report.eigenvalues.insert("margin".into(), s.op.coercivity_margin());
    report.check("coercive", s.op.is_coercive());
    report.check("kernel_positive", s.op.kernel_positive());
    report.check("sign_definite_eigenfunction", s.pair.sign_violation <= 1e-10);
    report.check("simple_eigenvalue", s.pair.is_simple());
    report.slacks.insert("negative_part_drop".into(), plus.pair.lambda - s.pair.lambda);
    report.profiles.insert("eigenfunction".into(), s.pair.e.clone());
    Ok(report)
}
