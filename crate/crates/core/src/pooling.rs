//! Rubin's rules and the replicate-level comparison statistics.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::FitResult;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PooledResult {
    pub m: usize,
    pub labels: Vec<String>,
    /// Mean of the per-imputation estimates.
    pub estimates: Vec<f64>,
    /// Mean within-imputation variance.
    pub within: Vec<f64>,
    /// Between-imputation variance (divisor `m - 1`).
    pub between: Vec<f64>,
    /// `within + (1 + 1/m) * between`.
    pub total: Vec<f64>,
    pub standard_errors: Vec<f64>,
}

impl PooledResult {
    pub fn coefficient(&self, label: &str) -> Option<(f64, f64)> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| (self.estimates[i], self.standard_errors[i]))
    }
}

/// Pools `m >= 3` fits of the same model.
pub fn pool_rubin(fits: &[FitResult]) -> Result<PooledResult> {
    let m = fits.len();
    if m < 3 {
        return Err(Error::InvalidArgument(format!("pooling needs at least 3 fits, got {m}")));
    }
    let labels = fits[0].labels.clone();
    if let Some(bad) = fits.iter().find(|f| f.labels != labels) {
        return Err(Error::InvalidArgument(format!(
            "coefficient labels differ across fits: {:?} vs {:?}",
            labels, bad.labels
        )));
    }
    let mf = m as f64;
    let p = labels.len();
    let mut out = PooledResult {
        m,
        labels,
        estimates: vec![0.0; p],
        within: vec![0.0; p],
        between: vec![0.0; p],
        total: vec![0.0; p],
        standard_errors: vec![0.0; p],
    };
    for j in 0..p {
        let q: Vec<f64> = fits.iter().map(|f| f.coefficients[j]).collect();
        let u: Vec<f64> = fits.iter().map(|f| f.standard_errors[j].powi(2)).collect();
        let mean = offset_mean(&q);
        let within = offset_mean(&u);
        let between = q.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (mf - 1.0);
        let total = within + (1.0 + 1.0 / mf) * between;
        out.estimates[j] = mean;
        out.within[j] = within;
        out.between[j] = between;
        out.total[j] = total;
        out.standard_errors[j] = total.sqrt();
    }
    Ok(out)
}

/// Mean taken as offsets from the first value, exact when all values agree.
fn offset_mean(v: &[f64]) -> f64 {
    v[0] + v.iter().map(|x| x - v[0]).sum::<f64>() / v.len() as f64
}

fn check_nonempty(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidArgument("no estimates".into()));
    }
    Ok(())
}

/// Fraction of replicates in which `mi` is strictly closer to `truth`
/// than `cca`.
pub fn metric_d(mi: &[f64], cca: &[f64], truth: f64) -> Result<f64> {
    metric_d_paired(mi, cca, &vec![truth; mi.len()])
}

pub fn metric_mae(estimates: &[f64], truth: f64) -> Result<f64> {
    metric_mae_paired(estimates, &vec![truth; estimates.len()])
}

pub fn metric_rmse(estimates: &[f64], truth: f64) -> Result<f64> {
    metric_rmse_paired(estimates, &vec![truth; estimates.len()])
}

/// As [`metric_d`] with a separate truth per replicate.
pub fn metric_d_paired(mi: &[f64], cca: &[f64], truth: &[f64]) -> Result<f64> {
    if mi.len() != cca.len() || mi.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} MI, {} CCA, {} truth",
            mi.len(),
            cca.len(),
            truth.len()
        )));
    }
    check_nonempty(mi)?;
    let wins = (0..mi.len())
        .filter(|&k| (mi[k] - truth[k]).abs() < (cca[k] - truth[k]).abs())
        .count();
    Ok(wins as f64 / mi.len() as f64)
}

pub fn metric_mae_paired(estimates: &[f64], truth: &[f64]) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(Error::InvalidArgument("length mismatch".into()));
    }
    check_nonempty(estimates)?;
    Ok(estimates.iter().zip(truth).map(|(e, t)| (t - e).abs()).sum::<f64>() / estimates.len() as f64)
}

pub fn metric_rmse_paired(estimates: &[f64], truth: &[f64]) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(Error::InvalidArgument("length mismatch".into()));
    }
    check_nonempty(estimates)?;
    let mse = estimates.iter().zip(truth).map(|(e, t)| (t - e).powi(2)).sum::<f64>() / estimates.len() as f64;
    Ok(mse.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    pub d: f64,
    pub mae: f64,
    pub rmse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub cca: MetricCell,
    pub mi: MetricCell,
}

/// Per-coefficient estimates across successful replicates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CoefficientSeries {
    pub label: String,
    pub truth: Vec<f64>,
    pub cca: Vec<f64>,
    pub mi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Successful replicates the metrics are computed over.
    pub replicates: usize,
    pub failed: usize,
    /// Truth per coefficient; the replicate mean when truth varies by replicate.
    pub truth: BTreeMap<String, f64>,
    pub metrics: BTreeMap<String, MethodMetrics>,
}

impl MetricsReport {
    pub fn from_series(series: &[CoefficientSeries], failed: usize) -> Result<Self> {
        let replicates = series.first().map_or(0, |s| s.mi.len());
        let mut truth = BTreeMap::new();
        let mut metrics = BTreeMap::new();
        for s in series {
            if s.mi.len() != replicates {
                return Err(Error::InvalidArgument(format!("coefficient `{}` has a different replicate count", s.label)));
            }
            truth.insert(s.label.clone(), s.truth.iter().sum::<f64>() / s.truth.len().max(1) as f64);
            let cell = |est: &[f64], other: &[f64]| -> Result<MetricCell> {
                Ok(MetricCell {
                    d: metric_d_paired(est, other, &s.truth)?,
                    mae: metric_mae_paired(est, &s.truth)?,
                    rmse: metric_rmse_paired(est, &s.truth)?,
                })
            };
            metrics.insert(
                s.label.clone(),
                MethodMetrics {
                    cca: cell(&s.cca, &s.mi)?,
                    mi: cell(&s.mi, &s.cca)?,
                },
            );
        }
        Ok(MetricsReport {
            replicates,
            failed,
            truth,
            metrics,
        })
    }

    pub fn get(&self, label: &str) -> Option<&MethodMetrics> {
        self.metrics.get(label)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Flat layout: `coefficient,method,truth,d,mae,rmse`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["coefficient", "method", "truth", "d", "mae", "rmse"])?;
        for (label, mm) in &self.metrics {
            for (method, c) in [("cca", &mm.cca), ("mi", &mm.mi)] {
                w.write_record([
                    label.clone(),
                    method.to_string(),
                    self.truth[label].to_string(),
                    c.d.to_string(),
                    c.mae.to_string(),
                    c.rmse.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

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

    #[test]
    fn worked_three_imputation_case() {
        let p = pool_rubin(&[fit(1.0, 0.5), fit(1.2, 0.5), fit(1.4, 0.5)]).unwrap();
        assert!((p.estimates[0] - 1.2).abs() < 1e-12);
        assert!((p.within[0] - 0.25).abs() < 1e-12);
        assert!((p.between[0] - 0.04).abs() < 1e-12);
        assert!((p.total[0] - (0.25 + 4.0 / 3.0 * 0.04)).abs() < 1e-12);
        assert!((p.standard_errors[0] - 0.550757).abs() < 1e-6);
    }

    #[test]
    fn identical_fits_have_no_between_variance() {
        let p = pool_rubin(&[fit(2.0, 0.3), fit(2.0, 0.3), fit(2.0, 0.3), fit(2.0, 0.3)]).unwrap();
        assert_eq!(p.between[0], 0.0);
        assert_eq!(p.estimates[0], 2.0);
        assert!((p.standard_errors[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn pooling_errors() {
        assert!(pool_rubin(&[fit(1.0, 1.0), fit(1.0, 1.0)]).is_err());
        let mut odd = fit(1.0, 1.0);
        odd.labels = vec!["c".into()];
        assert!(pool_rubin(&[fit(1.0, 1.0), fit(1.0, 1.0), odd]).is_err());
    }

    #[test]
    fn d_examples() {
        assert!((metric_d(&[1.1, 0.8, 1.3], &[1.2, 1.3, 1.25], 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(metric_d(&[1.0; 4], &[1.5, 0.2, 3.0, -1.0], 1.0).unwrap(), 1.0);
        assert_eq!(metric_d(&[0.3, 2.0], &[0.3, 2.0], 1.0).unwrap(), 0.0);
        assert!(metric_d(&[1.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn mae_rmse_examples() {
        assert_eq!(metric_mae(&[0.0, 2.0], 1.0).unwrap(), 1.0);
        assert_eq!(metric_rmse(&[0.0, 2.0], 1.0).unwrap(), 1.0);
        assert_eq!(metric_mae(&[0.0, 4.0], 1.0).unwrap(), 2.0);
        assert!((metric_rmse(&[0.0, 4.0], 1.0).unwrap() - 5f64.sqrt()).abs() < 1e-12);
        assert_eq!(metric_mae(&[3.0; 3], 3.0).unwrap(), 0.0);
        assert!(metric_mae(&[], 1.0).is_err());
    }

    #[test]
    fn report_layout() {
        let s = CoefficientSeries {
            label: "x4".into(),
            truth: vec![1.0; 3],
            cca: vec![1.2, 1.3, 1.25],
            mi: vec![1.1, 0.8, 1.3],
        };
        let r = MetricsReport::from_series(&[s], 1).unwrap();
        assert_eq!(r.replicates, 3);
        let m = r.get("x4").unwrap();
        assert!((m.mi.d - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.cca.d - 1.0 / 3.0).abs() < 1e-12);
        let json: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert!(json["metrics"]["x4"]["mi"]["rmse"].is_number());
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("coefficient,method,truth,d,mae,rmse\n"));
    }
}
