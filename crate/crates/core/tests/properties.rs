use std::collections::BTreeSet;

use augmi::data::{complete_rows, mask_cells_with};
use augmi::estimators::{fit_weibull_lt, kendall_tau, nelson_aalen, DesignMatrix, FitResult};
use augmi::impute::{fcs_impute, ImputationConfig, ModelFamily, TtePredictor};
use augmi::pooling::{metric_d, metric_mae, metric_rmse, pool_rubin};
use augmi::{Column, ColumnKind, Dataset, MaskMode, RngStream};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Rows of (a, b, c, d) plus a per-cell observed flag for every column.
type RawRow = (f64, f64, usize, bool, [bool; 4]);

fn raw_rows(min: usize, max: usize) -> impl Strategy<Value = Vec<RawRow>> {
    prop::collection::vec(
        (
            -5.0f64..5.0,
            -3.0f64..3.0,
            0usize..3,
            any::<bool>(),
            prop::array::uniform4(prop::bool::weighted(0.8)),
        ),
        min..max,
    )
}

fn build(rows: &[RawRow]) -> Dataset {
    let cell = |v: f64, obs: bool| obs.then_some(v);
    let a = rows.iter().map(|r| cell(r.0, r.4[0])).collect();
    let b = rows.iter().map(|r| cell(r.0 * 0.5 + r.1, r.4[1])).collect();
    let c = rows.iter().map(|r| cell(r.2 as f64, r.4[2])).collect();
    let d = rows.iter().map(|r| cell(r.3 as u8 as f64, r.4[3])).collect();
    Dataset::new(vec![
        Column::new("a", ColumnKind::Continuous, a).unwrap(),
        Column::new("b", ColumnKind::Continuous, b).unwrap(),
        Column::new("c", ColumnKind::categorical(&["p", "q", "r"]), c).unwrap(),
        Column::new("d", ColumnKind::categorical(&["no", "yes"]), d).unwrap(),
    ])
    .unwrap()
}

/// Keeps at least two observed cells per column so every target has donors.
fn usable(ds: &Dataset) -> bool {
    ds.columns().iter().all(|c| c.len() - c.n_missing() >= 2) && ds.n_missing() > 0
}

fn fit(est: f64, se: f64) -> FitResult {
    FitResult {
        labels: vec!["b".into()],
        coefficients: vec![est],
        standard_errors: vec![se],
        covariance: DMatrix::from_element(1, 1, se * se),
        loglik: 0.0,
        converged: true,
        iterations: 1,
        loglik_trace: vec![],
    }
}

proptest! {
    #[test]
    fn complete_rows_is_idempotent(rows in raw_rows(1, 40)) {
        let ds = build(&rows);
        let once = complete_rows(&ds);
        prop_assert_eq!(complete_rows(&once), once.clone());
        prop_assert_eq!(once.n_missing(), 0);
    }

    #[test]
    fn masking_only_hides_target_cells(
        rows in raw_rows(1, 40),
        p in 0.01f64..1.0,
        seed in any::<u64>(),
        per_cell in any::<bool>(),
    ) {
        let ds = build(&rows);
        let mode = if per_cell { MaskMode::PerCell } else { MaskMode::RowJoint };
        let out = mask_cells_with(&ds, &["b", "c"], p, mode, &mut RngStream::new(seed, 0)).unwrap();
        for (before, after) in ds.columns().iter().zip(out.columns()) {
            let target = ["b", "c"].contains(&before.name());
            for i in 0..before.len() {
                if after.is_observed(i) {
                    prop_assert!(before.is_observed(i));
                    prop_assert_eq!(before.get(i).unwrap().to_bits(), after.get(i).unwrap().to_bits());
                }
                if !target {
                    prop_assert_eq!(before.is_observed(i), after.is_observed(i));
                }
            }
        }
    }

    #[test]
    fn full_observation_mask_is_identity(rows in raw_rows(1, 40), seed in any::<u64>()) {
        let ds = build(&rows);
        let out = mask_cells_with(&ds, &["a", "d"], 1.0, MaskMode::RowJoint, &mut RngStream::new(seed, 3)).unwrap();
        prop_assert_eq!(out, ds);
    }

    #[test]
    fn kendall_symmetric_and_rank_based(
        pairs in prop::collection::vec((-10i32..10, -10i32..10), 3..60),
    ) {
        let x: Vec<Option<f64>> = pairs.iter().map(|p| Some(p.0 as f64)).collect();
        let y: Vec<Option<f64>> = pairs.iter().map(|p| Some(p.1 as f64)).collect();
        let Ok(t) = kendall_tau(&x, &y) else { return Ok(()) };
        prop_assert!((-1.0..=1.0).contains(&t));
        prop_assert_eq!(kendall_tau(&y, &x).unwrap(), t);
        let fx: Vec<Option<f64>> = x.iter().map(|v| v.map(|v| v.powi(3) + (v / 4.0).exp())).collect();
        let fy: Vec<Option<f64>> = y.iter().map(|v| v.map(|v| 3.0 * v - 7.0)).collect();
        prop_assert!((kendall_tau(&fx, &fy).unwrap() - t).abs() < 1e-12);
    }

    #[test]
    fn nelson_aalen_is_non_negative(
        subjects in prop::collection::vec((0.0f64..5.0, 0.01f64..5.0, any::<bool>()), 1..50),
    ) {
        let entry: Vec<f64> = subjects.iter().map(|s| s.0).collect();
        let exit: Vec<f64> = subjects.iter().map(|s| s.0 + s.1).collect();
        let delta: Vec<f64> = subjects.iter().map(|s| s.2 as u8 as f64).collect();
        let h = nelson_aalen(&entry, &exit, &delta).unwrap();
        prop_assert!(h.iter().all(|v| *v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn pooling_identical_fits_reproduces_fit(est in -10.0f64..10.0, se in 0.001f64..5.0, m in 3usize..30) {
        let p = pool_rubin(&vec![fit(est, se); m]).unwrap();
        prop_assert_eq!(p.estimates[0], est);
        prop_assert_eq!(p.standard_errors[0], se);
    }

    #[test]
    fn rmse_dominates_mae(est in prop::collection::vec(-5.0f64..5.0, 1..40), truth in -2.0f64..2.0) {
        let mae = metric_mae(&est, truth).unwrap();
        let rmse = metric_rmse(&est, truth).unwrap();
        prop_assert!(rmse >= mae - 1e-12);
        let errs: Vec<f64> = est.iter().map(|e| (e - truth).abs()).collect();
        let spread = errs.iter().cloned().fold(f64::MIN, f64::max) - errs.iter().cloned().fold(f64::MAX, f64::min);
        if spread > 1e-6 {
            prop_assert!(rmse > mae);
        }
    }

    #[test]
    fn equal_errors_give_rmse_equal_mae(err in 0.0f64..3.0, signs in prop::collection::vec(any::<bool>(), 1..20)) {
        let est: Vec<f64> = signs.iter().map(|&s| if s { 1.0 + err } else { 1.0 - err }).collect();
        let mae = metric_mae(&est, 1.0).unwrap();
        let rmse = metric_rmse(&est, 1.0).unwrap();
        prop_assert!((rmse - mae).abs() <= 1e-12);
    }

    #[test]
    fn d_invariant_under_rescaling(
        pairs in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..40),
        truth in -1.0f64..1.0,
        c in 0.01f64..100.0,
    ) {
        let mi: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let cca: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        // Exact ties at the comparison are measure zero but rounding can flip
        // near-ties, so only well-separated pairs are compared.
        prop_assume!(pairs.iter().all(|p| ((p.0 - truth).abs() - (p.1 - truth).abs()).abs() > 1e-9));
        let d = metric_d(&mi, &cca, truth).unwrap();
        let smi: Vec<f64> = mi.iter().map(|v| v * c).collect();
        let scca: Vec<f64> = cca.iter().map(|v| v * c).collect();
        prop_assert_eq!(metric_d(&smi, &scca, truth * c).unwrap(), d);
    }
}

fn observed_values(ds: &Dataset, name: &str) -> BTreeSet<u64> {
    let col = ds.column(name).unwrap();
    (0..col.len()).filter_map(|i| col.get(i)).map(f64::to_bits).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn fcs_respects_data(rows in raw_rows(20, 60), seed in any::<u64>(), cart in any::<bool>()) {
        let ds = build(&rows);
        prop_assume!(usable(&ds));
        let family = if cart { ModelFamily::Cart } else { ModelFamily::Glm };
        let cfg = ImputationConfig::auto(&ds, family, TtePredictor::None, 3, 3).unwrap();
        let rng = RngStream::new(seed, 1);
        let (imps, trace) = fcs_impute(&ds, &cfg, &rng).unwrap();
        prop_assert_eq!(imps.len(), 3);
        prop_assert!(trace.entries.iter().all(|e| e.mean.is_finite() && e.sd.is_finite()));
        for imp in &imps {
            prop_assert_eq!(imp.n_missing(), 0);
            for (orig, done) in ds.columns().iter().zip(imp.columns()) {
                let donors = observed_values(&ds, orig.name());
                for i in 0..orig.len() {
                    let v = done.get(i).unwrap();
                    match orig.get(i) {
                        Some(o) => prop_assert_eq!(o.to_bits(), v.to_bits()),
                        None => {
                            prop_assert!(v.is_finite());
                            if let Some(levels) = orig.kind().levels() {
                                prop_assert!(v.fract() == 0.0 && v >= 0.0 && (v as usize) < levels.len());
                            }
                            let n_obs = orig.len() - orig.n_missing();
                            if cart && n_obs >= augmi::impute::CART_MIN_OBSERVED {
                                prop_assert!(donors.contains(&v.to_bits()), "{} row {} got non-donor {}", orig.name(), i, v);
                            }
                        }
                    }
                }
            }
        }
        let (again, trace_again) = fcs_impute(&ds, &cfg, &rng).unwrap();
        prop_assert_eq!(again, imps);
        prop_assert_eq!(trace_again, trace);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn weibull_fit_scales_with_time_unit(seed in any::<u64>(), c in 0.2f64..20.0) {
        let mut rng = RngStream::new(seed, 0);
        let n = 300;
        let mut x = Vec::with_capacity(n);
        let mut entry = Vec::with_capacity(n);
        let mut exit = Vec::with_capacity(n);
        let mut delta = Vec::with_capacity(n);
        for _ in 0..n {
            let xi = rng.open01() * 2.0 - 1.0;
            let e = rng.open01() * 2.0;
            // Shape 2, unit scale, hazard ratio exp(0.5 x), truncated at e.
            let u = rng.open01();
            let t = (e * e - u.ln() / (0.5 * xi).exp()).sqrt();
            let censor = 3.0;
            x.push(xi);
            entry.push(e);
            exit.push(t.min(censor));
            delta.push(if t <= censor { 1.0 } else { 0.0 });
        }
        let design = DesignMatrix::new(DMatrix::from_column_slice(n, 1, &x), vec!["x".into()]).unwrap();
        let base = fit_weibull_lt(&design, &entry, &exit, &delta).unwrap();
        let se: Vec<f64> = entry.iter().map(|v| v * c).collect();
        let sx: Vec<f64> = exit.iter().map(|v| v * c).collect();
        let scaled = fit_weibull_lt(&design, &se, &sx, &delta).unwrap();
        let (a0, b0, beta0) = (base.coefficients[0], base.coefficients[1], base.coefficients[2]);
        let (a1, b1, beta1) = (scaled.coefficients[0], scaled.coefficients[1], scaled.coefficients[2]);
        prop_assert!((a1 - a0).abs() < 1e-6 * a0.max(1.0), "shape {} vs {}", a0, a1);
        prop_assert!((b1 / (b0 * c) - 1.0).abs() < 1e-6, "scale {} vs {}", b0 * c, b1);
        prop_assert!((beta1 - beta0).abs() < 1e-6, "beta {} vs {}", beta0, beta1);
    }
}
