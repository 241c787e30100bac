use augmi::data::mask_cells;
use augmi::impute::{fcs_impute, ImputationConfig, ModelFamily, TtePredictor};
use augmi::rng::{tags, RngStream};
use augmi::scenario::{read_records, report_from_records, run_scenario, ScenarioConfig};
use augmi::simgen::{gen_binary_outcome, gen_covariates, BinaryOutcomeParams, SURVEY_COVARIATES, X3, X4};

fn config(extra: &str) -> ScenarioConfig {
    ScenarioConfig::from_json(&format!(
        r#"{{"outcome": "binary", "n": 1500, "observed_fraction": 0.3, "replicates": 6, "seed": 11,
            "mi": {{"m": 3, "iterations": 3}}{extra}}}"#
    ))
    .unwrap()
}

#[test]
fn worker_count_does_not_change_records() {
    let mut one = config("");
    one.parallelism = Some(1);
    let mut many = one.clone();
    many.parallelism = Some(8);
    let a = run_scenario(&one, None).unwrap();
    let b = run_scenario(&many, None).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.report, b.report);
    assert_eq!(a.trace, b.trace);
}

#[test]
fn artifacts_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("");
    let out = run_scenario(&cfg, Some(dir.path())).unwrap();
    assert_eq!(out.records.len(), cfg.replicates);
    assert_eq!(out.report.replicates + out.report.failed, cfg.replicates);
    for name in ["records.csv", "timings.csv", "metrics.json", "metrics.csv", "trace_rep1.csv", "config_resolved.json", "truth.json"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let records = read_records(std::fs::File::open(dir.path().join("records.csv")).unwrap()).unwrap();
    assert_eq!(records, out.records);
    let recomputed = report_from_records(&records, None).unwrap();
    let emitted = std::fs::read_to_string(dir.path().join("metrics.json")).unwrap();
    assert_eq!(recomputed.to_json().unwrap(), emitted);
    let resolved: ScenarioConfig =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("config_resolved.json")).unwrap()).unwrap();
    assert!(resolved.parallelism.is_some());

    let again = tempfile::tempdir().unwrap();
    run_scenario(&cfg, Some(again.path())).unwrap();
    for name in ["records.csv", "metrics.json", "metrics.csv", "trace_rep1.csv"] {
        assert_eq!(
            std::fs::read(dir.path().join(name)).unwrap(),
            std::fs::read(again.path().join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }
}

#[test]
fn fully_observed_scenario_reuses_cca() {
    let cfg = ScenarioConfig::from_json(
        r#"{"outcome": "binary", "n": 800, "observed_fraction": 1.0, "replicates": 5, "seed": 3}"#,
    )
    .unwrap();
    let out = run_scenario(&cfg, None).unwrap();
    assert_eq!(out.records.len(), 5);
    for r in &out.records {
        assert!(!r.mi_imputed);
        for c in r.result.as_ref().unwrap() {
            assert_eq!(c.cca_estimate, c.mi_estimate);
            assert_eq!(c.cca_se, c.mi_se);
        }
    }
    assert!(out.trace.is_none());
    assert!(out.report.metrics.values().all(|m| m.mi.d == 0.0 && m.mi.rmse == m.cca.rmse));
}

#[test]
fn tte_scenario_runs_each_method() {
    for method in ["glm", "cart", "transformation", "nelson-aalen"] {
        let cfg = ScenarioConfig::from_json(&format!(
            r#"{{"outcome": "tte", "n": 1500, "observed_fraction": 0.3, "replicates": 2, "seed": 5,
                "mi": {{"m": 3, "iterations": 2, "method": "{method}"}}}}"#
        ))
        .unwrap();
        let out = run_scenario(&cfg, None).unwrap();
        assert_eq!(out.success_fraction(), 1.0, "{method}: {:?}", out.records);
        let labels: Vec<&str> = out.report.metrics.keys().map(String::as_str).collect();
        assert!(labels.contains(&"shape") && labels.contains(&"scale") && labels.contains(&"x4"), "{labels:?}");
    }
}

#[test]
fn imputed_spread_stays_near_observed_spread() {
    let root = RngStream::new(77, 1);
    let cov = gen_covariates(4000, &mut root.child(tags::COVARIATES)).unwrap();
    let full = gen_binary_outcome(&cov, &BinaryOutcomeParams::default(), &mut root.child(tags::OUTCOME)).unwrap();
    let masked = mask_cells(&full, &SURVEY_COVARIATES, 0.1, &mut root.child(tags::MASK)).unwrap();
    let cfg = ImputationConfig::auto(&masked, ModelFamily::Glm, TtePredictor::None, 3, 5).unwrap();
    let (_, trace) = fcs_impute(&masked, &cfg, &root.child(tags::IMPUTE)).unwrap();
    for name in [X3, X4] {
        let col = masked.column(name).unwrap();
        let obs: Vec<f64> = (0..col.len()).filter_map(|i| col.get(i)).collect();
        let mean = obs.iter().sum::<f64>() / obs.len() as f64;
        let sd = (obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (obs.len() - 1) as f64).sqrt();
        for chain in 1..=3 {
            let last = trace.get(chain, 5, name).unwrap();
            assert!(last.sd > 0.1 * sd && last.sd < 10.0 * sd, "{name} chain {chain}: {} vs {sd}", last.sd);
        }
    }
}

#[test]
fn shipped_scenarios_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            augmi::scenario::parse_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 3);
}

#[test]
fn logistic_fit_reaches_score_tolerance_at_scale() {
    let root = RngStream::new(2024, 1);
    let cov = gen_covariates(5000, &mut root.child(tags::COVARIATES)).unwrap();
    let data = gen_binary_outcome(&cov, &BinaryOutcomeParams::default(), &mut root.child(tags::OUTCOME)).unwrap();
    let x = augmi::estimators::DesignMatrix::from_dataset(&data, &augmi::simgen::ANALYSIS_COVARIATES, true).unwrap();
    let y = data.column(augmi::simgen::Y).unwrap().complete_values().unwrap();
    let fit = augmi::estimators::fit_logistic(&x, y).unwrap();
    assert!(fit.converged);
    let p = x.matrix().ncols();
    let mut score = vec![0.0; p];
    for (i, yi) in y.iter().enumerate() {
        let eta: f64 = (0..p).map(|j| x.matrix()[(i, j)] * fit.coefficients[j]).sum();
        let r = yi - 1.0 / (1.0 + (-eta).exp());
        for (j, s) in score.iter_mut().enumerate() {
            *s += x.matrix()[(i, j)] * r;
        }
    }
    let worst = score.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    assert!(worst < 1e-8, "score max-norm {worst:e}");
}
