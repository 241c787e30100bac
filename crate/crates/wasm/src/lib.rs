//! JSON-in, JSON-out bindings behind the demo page in `www/`.
//!
//! Each export has a plain Rust counterpart so the logic is testable natively.

use augmi::data::complete_rows;
use augmi::estimators::CumulativeHazard;
use augmi::impute::fcs_impute;
use augmi::pooling::pool_rubin;
use augmi::rng::{tags, RngStream};
use augmi::scenario::{fit_analysis, generate_replicate, generating_truth, imputation_config, ScenarioConfig};
use augmi::simgen::{sample_trunc_weibull, trunc_weibull_quantile, WeibullParams};
use augmi::Error;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Histogram {
    /// Bin edges, one more than `density`.
    pub edges: Vec<f64>,
    /// Empirical density per bin.
    pub density: Vec<f64>,
    /// Points of the closed-form truncated density.
    pub curve_t: Vec<f64>,
    pub curve_f: Vec<f64>,
}

/// Draws `n` event ages given survival to `entry` and bins them next to the
/// exact conditional density.
pub fn weibull_histogram(entry: f64, lp: f64, shape: f64, scale: f64, n: usize, bins: usize, seed: u64) -> augmi::Result<Histogram> {
    if n == 0 || bins == 0 {
        return Err(Error::InvalidArgument("need at least one draw and one bin".into()));
    }
    let params = WeibullParams {
        shape,
        scale,
        censor_age: f64::INFINITY,
        entry_high: f64::MAX,
        ..WeibullParams::default()
    };
    params.validate()?;
    let mut rng = RngStream::new(seed, 0);
    let draws = (0..n)
        .map(|_| sample_trunc_weibull(entry, lp, &params, &mut rng))
        .collect::<augmi::Result<Vec<f64>>>()?;
    let hi = trunc_weibull_quantile(entry, lp, shape, scale, 1e-3).max(draws.iter().cloned().fold(entry, f64::max));
    let width = (hi - entry) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| entry + width * k as f64).collect();
    let mut counts = vec![0usize; bins];
    for t in &draws {
        counts[(((t - entry) / width) as usize).min(bins - 1)] += 1;
    }
    let density = counts.iter().map(|&c| c as f64 / (n as f64 * width)).collect();
    let be = scale * (-lp / shape).exp();
    let points = 200;
    let curve_t: Vec<f64> = (0..=points).map(|k| entry + (hi - entry) * k as f64 / points as f64).collect();
    let curve_f = curve_t
        .iter()
        .map(|&t| {
            let z = t / be;
            shape / be * z.powf(shape - 1.0) * (-(z.powf(shape) - (entry / be).powf(shape))).exp()
        })
        .collect();
    Ok(Histogram {
        edges,
        density,
        curve_t,
        curve_f,
    })
}

#[derive(Debug, Serialize)]
pub struct HazardCurve {
    #[serde(flatten)]
    pub hazard: CumulativeHazard,
    /// `H(exit) - H(entry)` for each input row.
    pub per_row: Vec<f64>,
}

/// Parses `entry,exit,delta` lines; blank lines and `#` comments are skipped.
pub fn parse_survival(text: &str) -> augmi::Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let (mut entry, mut exit, mut delta) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split([',', ' ', '\t']).filter(|f| !f.is_empty()).collect();
        let parsed: Vec<f64> = fields
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidArgument(format!("line {}: {e}", i + 1)))?;
        let [e, x, d] = parsed[..] else {
            return Err(Error::InvalidArgument(format!("line {}: expected entry, exit, delta", i + 1)));
        };
        entry.push(e);
        exit.push(x);
        delta.push(d);
    }
    Ok((entry, exit, delta))
}

pub fn hazard_curve(text: &str) -> augmi::Result<HazardCurve> {
    let (entry, exit, delta) = parse_survival(text)?;
    let hazard = CumulativeHazard::estimate(&entry, &exit, &delta)?;
    let per_row = entry.iter().zip(&exit).map(|(&e, &x)| hazard.at(x) - hazard.at(e)).collect();
    Ok(HazardCurve { hazard, per_row })
}

#[derive(Debug, Serialize)]
pub struct TracePoint {
    pub chain: usize,
    pub iteration: usize,
    pub column: String,
    pub mean: f64,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub truth: Vec<f64>,
    pub cca_estimate: Vec<f64>,
    pub cca_se: Vec<f64>,
    pub mi_estimate: Vec<f64>,
    pub mi_se: Vec<f64>,
    pub complete_rows: usize,
    pub trace: Vec<TracePoint>,
}

/// One replicate of a scenario given as JSON (the CLI's config format),
/// with CCA and pooled MI estimates side by side.
pub fn compare_replicate(config_json: &str) -> augmi::Result<Comparison> {
    let cfg = ScenarioConfig::from_json(config_json)?;
    let (_, masked) = generate_replicate(&cfg, 1)?;
    let complete = complete_rows(&masked);
    let cca = fit_analysis(&complete, cfg.outcome)?;
    let ic = imputation_config(&cfg, &masked)?;
    let (imps, trace) = fcs_impute(&masked, &ic, &RngStream::new(cfg.seed, 1).child(tags::IMPUTE))?;
    let fits = imps
        .iter()
        .map(|d| fit_analysis(d, cfg.outcome))
        .collect::<augmi::Result<Vec<_>>>()?;
    let pooled = pool_rubin(&fits)?;
    let truth = generating_truth(cfg.outcome);
    Ok(Comparison {
        truth: cca.labels.iter().map(|l| truth[l]).collect(),
        labels: cca.labels,
        cca_estimate: cca.coefficients,
        cca_se: cca.standard_errors,
        mi_estimate: pooled.estimates,
        mi_se: pooled.standard_errors,
        complete_rows: complete.row_count(),
        trace: trace
            .entries
            .into_iter()
            .map(|e| TracePoint {
                chain: e.chain,
                iteration: e.iteration,
                column: e.column,
                mean: e.mean,
            })
            .collect(),
    })
}

fn to_js<T: Serialize>(r: augmi::Result<T>) -> Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = weibullHistogram)]
pub fn weibull_histogram_js(entry: f64, lp: f64, shape: f64, scale: f64, n: usize, bins: usize, seed: u64) -> Result<String, JsError> {
    to_js(weibull_histogram(entry, lp, shape, scale, n, bins, seed))
}

#[wasm_bindgen(js_name = hazardCurve)]
pub fn hazard_curve_js(text: &str) -> Result<String, JsError> {
    to_js(hazard_curve(text))
}

#[wasm_bindgen(js_name = compareReplicate)]
pub fn compare_replicate_js(config_json: &str) -> Result<String, JsError> {
    to_js(compare_replicate(config_json))
}
