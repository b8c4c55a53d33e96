use std::fs;

use fkpp_core::experiments::{emit_report, run_scenario, Scenario, ScenarioKind, ScenarioParams};
use fkpp_core::inputs::MeasureSpec;
use fkpp_core::measure::SignedMeasure;
use serde_json::Value;

fn run(kind: ScenarioKind, params: ScenarioParams) -> fkpp_core::experiments::Report {
    run_scenario(&Scenario::with_params(kind, params, 5)).unwrap()
}

#[test]
fn report_json_has_the_documented_keys() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(ScenarioKind::ModulusCounterexample, ScenarioParams::default());
    let files = emit_report(&r, dir.path()).unwrap();
    let json: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("modulus_counterexample/report.json")).unwrap())
            .unwrap();
    for key in ["kind", "params", "eigenvalues", "windows", "classifications", "slacks", "paper_consistent"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    assert_eq!(json["kind"], "modulus_counterexample");
    assert!(files.iter().any(|p| p.ends_with("eigenvalues.csv")));
    assert!(files.iter().any(|p| p.ends_with("profile_two_bump.csv")));
}

#[test]
fn appendix_report_records_the_worked_example() {
    let r = run(ScenarioKind::AppendixCheck, ScenarioParams::default());
    assert_eq!(r.paper_consistent, Some(true), "{:?}", r.failures());
    let json: Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    let hyp = &json["hypotheses"]["mu"];
    let alpha = 0.01;
    let gamma_bar = json["metadata"]["gamma_bar"].as_f64().unwrap();
    assert!((hyp["gamma_min"].as_f64().unwrap() - alpha / 2.0).abs() < 1e-15);
    let delta = hyp["delta_star"].as_f64().unwrap();
    assert!((delta - alpha / gamma_bar).abs() < 1e-9 * delta);
}

#[test]
fn appendix_above_threshold_reports_failed_reabsorption() {
    let params = ScenarioParams {
        alpha: Some(0.05),
        ..ScenarioParams::default()
    };
    let r = run(ScenarioKind::AppendixCheck, params);
    assert_eq!(r.checks.get("strong_reabsorption_fails_above_threshold"), Some(&true));
    assert_eq!(r.paper_consistent, Some(true));
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let r = run(ScenarioKind::Fragmentation, ScenarioParams::default());
        emit_report(&r, dir.path()).unwrap();
    }
    let names: Vec<_> = fs::read_dir(a.path().join("fragmentation"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert!(names.len() >= 3);
    for name in names {
        let x = fs::read(a.path().join("fragmentation").join(&name)).unwrap();
        let y = fs::read(b.path().join("fragmentation").join(&name)).unwrap();
        assert_eq!(x, y, "{name:?}");
    }
}

#[test]
fn local_measure_gives_an_empty_fragmentation_window() {
    let params = ScenarioParams {
        measure: Some(MeasureSpec::from_measure(&SignedMeasure::dirac(1.0, 1.0).unwrap())),
        ..ScenarioParams::default()
    };
    let r = run(ScenarioKind::Fragmentation, params);
    assert!(r.inconclusive);
    assert_eq!(r.paper_consistent, None);
    assert!(!r.windows["union"].nonempty);
    assert!(r.windows["union"].sigma.is_none());
}

#[test]
fn windows_place_sigma_strictly_inside() {
    let r = run(ScenarioKind::NegativeComponent, ScenarioParams::default());
    assert_eq!(r.paper_consistent, Some(true), "{:?}", r.failures());
    for w in r.windows.values() {
        let s = w.sigma.unwrap();
        assert!(w.lo < s && s < w.hi && w.width > w.resolution);
    }
}

#[test]
fn crossover_bracket_orders_the_eigenvalues() {
    let r = run(ScenarioKind::TwoMeasures, ScenarioParams::default());
    let lo = r.metadata["crossover_r_lo"];
    let hi = r.metadata["crossover_r_hi"];
    assert!(r.eigenvalues[&format!("mu1:r={lo}")] < r.eigenvalues[&format!("mu2:r={lo}")]);
    assert!(r.eigenvalues[&format!("mu1:r={hi}")] > r.eigenvalues[&format!("mu2:r={hi}")]);
    let predicted = r.metadata["power_law_crossover"];
    assert!(lo < predicted && predicted < hi);
}

#[test]
fn scaling_scenario_rejects_other_resources() {
    let params = ScenarioParams {
        sigma: Some(vec![2.0]),
        ..ScenarioParams::default()
    };
    assert!(run_scenario(&Scenario::with_params(ScenarioKind::ScalingSurvival, params, 1)).is_err());
}

#[test]
fn params_echo_resolved_defaults() {
    let r = run(ScenarioKind::ExtinctionSurvival, ScenarioParams::default());
    assert_eq!(r.params.n_per_unit, Some(512));
    assert_eq!(r.params.sigma, Some(vec![9.0, 12.0]));
    assert!(r.params.measure.is_some());
}
