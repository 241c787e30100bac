//! Left-truncated, right-censored Weibull proportional-hazards regression.
//!
//! Hazard `a/b (t/b)^(a-1) exp(lp)` with `lp = x'beta` and no intercept in
//! `x` (the baseline level is carried by `b`). A subject entering at age `e`
//! and leaving at `t` with indicator `d` contributes
//!
//! ```text
//! d * [log a - a log b + (a - 1) log t + lp] - exp(lp) * [(t/b)^a - (e/b)^a]
//! ```
//!
//! Optimization runs on `(log a, log b, beta)`, so no bounds are needed.

use nalgebra::{DMatrix, DVector};

use super::newton::{max_abs, maximize, spd_inverse, Evaluation, NewtonOptions};
use super::{weighted_gram, DesignMatrix, FitResult};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WeibullFitOptions {
    /// Holds the shape at this value instead of estimating it.
    pub fixed_shape: Option<f64>,
}

/// The log-likelihood over `(log a, log b, beta)`.
pub struct WeibullLikelihood<'a> {
    x: &'a DMatrix<f64>,
    delta: &'a [f64],
    log_exit: Vec<f64>,
    /// `None` for subjects entering at age zero.
    log_entry: Vec<Option<f64>>,
}

impl<'a> WeibullLikelihood<'a> {
    pub fn new(x: &'a DesignMatrix, entry: &[f64], exit: &[f64], delta: &'a [f64]) -> Result<Self> {
        let n = x.nrows();
        if entry.len() != n || exit.len() != n || delta.len() != n {
            return Err(Error::InvalidArgument("survival vectors differ in length from design".into()));
        }
        for i in 0..n {
            if !(entry[i] >= 0.0 && entry[i] < exit[i]) {
                return Err(Error::InvalidArgument(format!(
                    "row {i}: entry {} must be non-negative and before exit {}",
                    entry[i], exit[i]
                )));
            }
            if delta[i] != 0.0 && delta[i] != 1.0 {
                return Err(Error::InvalidArgument(format!("row {i}: indicator {} not 0/1", delta[i])));
            }
        }
        Ok(WeibullLikelihood {
            x: x.matrix(),
            delta,
            log_exit: exit.iter().map(|t| t.ln()).collect(),
            log_entry: entry.iter().map(|&e| (e > 0.0).then(|| e.ln())).collect(),
        })
    }

    pub fn n_params(&self) -> usize {
        2 + self.x.ncols()
    }

    pub fn loglik(&self, theta: &[f64]) -> f64 {
        self.evaluate(&DVector::from_column_slice(theta)).loglik
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        self.evaluate(&DVector::from_column_slice(theta)).score.iter().copied().collect()
    }

    /// Log-likelihood, gradient and negative Hessian at
    /// `theta = (log a, log b, beta)`.
    pub(crate) fn evaluate(&self, theta: &DVector<f64>) -> Evaluation {
        let p = self.x.ncols();
        let (alpha, gamma) = (theta[0], theta[1]);
        let a = alpha.exp();
        let beta = theta.rows(2, p);
        let lp = self.x * beta;
        let n = lp.len();
        let mut loglik = 0.0;
        let (mut g_a, mut g_g) = (0.0, 0.0);
        let (mut h_aa, mut h_ag, mut h_gg) = (0.0, 0.0, 0.0);
        let mut w_b = vec![0.0; n]; // d l_i / d lp_i
        let mut w_ab = vec![0.0; n]; // d2 l_i / d alpha d lp_i
        let mut w_gb = vec![0.0; n]; // d2 l_i / d gamma d lp_i
        let mut w_bb = vec![0.0; n]; // -d2 l_i / d lp_i^2
        for i in 0..n {
            let d = self.delta[i];
            let r = lp[i].exp();
            let big_a = a * (self.log_exit[i] - gamma);
            let ua = big_a.exp();
            let (big_b, va) = match self.log_entry[i] {
                Some(le) => {
                    let b = a * (le - gamma);
                    (b, b.exp())
                }
                None => (0.0, 0.0),
            };
            let cum = r * (ua - va);
            loglik += d * (alpha + big_a - self.log_exit[i] + lp[i]) - cum;
            let a_u_b_v = big_a * ua - big_b * va;
            g_a += d * (1.0 + big_a) - r * a_u_b_v;
            g_g += -d * a + a * cum;
            w_b[i] = d - cum;
            h_aa += d * big_a - r * ((big_a + big_a * big_a) * ua - (big_b + big_b * big_b) * va);
            h_ag += -d * a + r * a * ((1.0 + big_a) * ua - (1.0 + big_b) * va);
            h_gg += -a * a * cum;
            w_ab[i] = -r * a_u_b_v;
            w_gb[i] = a * cum;
            w_bb[i] = cum;
        }
        let k = 2 + p;
        let mut score = DVector::zeros(k);
        score[0] = g_a;
        score[1] = g_g;
        let wb = DVector::from_vec(w_b);
        score.rows_mut(2, p).copy_from(&self.x.tr_mul(&wb));
        let mut info = DMatrix::zeros(k, k);
        info[(0, 0)] = -h_aa;
        info[(0, 1)] = -h_ag;
        info[(1, 0)] = -h_ag;
        info[(1, 1)] = -h_gg;
        let hab = self.x.tr_mul(&DVector::from_vec(w_ab));
        let hgb = self.x.tr_mul(&DVector::from_vec(w_gb));
        for j in 0..p {
            info[(0, 2 + j)] = -hab[j];
            info[(2 + j, 0)] = -hab[j];
            info[(1, 2 + j)] = -hgb[j];
            info[(2 + j, 1)] = -hgb[j];
        }
        info.view_mut((2, 2), (p, p)).copy_from(&weighted_gram(self.x, &w_bb));
        Evaluation {
            loglik,
            score,
            information: info,
        }
    }

    /// Profile start: best `(log a, log b)` over a shape grid with `beta = 0`.
    fn start(&self, fixed_shape: Option<f64>) -> DVector<f64> {
        let grid: Vec<f64> = match fixed_shape {
            Some(a) => vec![a],
            None => vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0],
        };
        let events: f64 = self.delta.iter().sum();
        let p = self.x.ncols();
        let mut best: Option<(f64, DVector<f64>)> = None;
        for a in grid {
            // b^a = sum(t^a - e^a) / events, computed on the log scale
            let log_terms: Vec<f64> = self.log_exit.iter().map(|lt| a * lt).collect();
            let shift = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = (0..self.log_exit.len())
                .map(|i| {
                    let u = (log_terms[i] - shift).exp();
                    let v = self.log_entry[i].map_or(0.0, |le| (a * le - shift).exp());
                    u - v
                })
                .sum();
            let gamma = (shift + (s / events).ln()) / a;
            let mut theta = DVector::zeros(2 + p);
            theta[0] = a.ln();
            theta[1] = gamma;
            let l = self.evaluate(&theta).loglik;
            if l.is_finite() && best.as_ref().is_none_or(|(bl, _)| l > *bl) {
                best = Some((l, theta));
            }
        }
        best.map(|(_, t)| t).unwrap_or_else(|| DVector::zeros(2 + p))
    }
}

pub fn fit_weibull_lt(x: &DesignMatrix, entry: &[f64], exit: &[f64], delta: &[f64]) -> Result<FitResult> {
    fit_weibull_lt_with(x, entry, exit, delta, &WeibullFitOptions::default())
}

/// Labels are `shape`, `scale` and then the design labels; shape and scale
/// are reported on their natural scale with delta-method standard errors.
pub fn fit_weibull_lt_with(
    x: &DesignMatrix,
    entry: &[f64],
    exit: &[f64],
    delta: &[f64],
    opts: &WeibullFitOptions,
) -> Result<FitResult> {
    let lik = WeibullLikelihood::new(x, entry, exit, delta)?;
    if !delta.iter().any(|&d| d == 1.0) {
        return Err(Error::AllCensored);
    }
    x.check_rank()?;
    let p = x.ncols();
    let theta0 = lik.start(opts.fixed_shape);
    let newton = NewtonOptions {
        max_iter: 100,
        ..NewtonOptions::default()
    };
    // With a fixed shape the free parameters are (log b, beta).
    let (theta, eval, iterations, converged, trace, free) = match opts.fixed_shape {
        None => {
            let out = maximize(theta0, |t| lik.evaluate(t), newton);
            (out.theta, out.eval, out.iterations, out.converged, out.loglik_trace, 0)
        }
        Some(a) => {
            let alpha = a.ln();
            let sub = |t: &DVector<f64>| {
                let mut full = DVector::zeros(2 + p);
                full[0] = alpha;
                full.rows_mut(1, 1 + p).copy_from(t);
                let e = lik.evaluate(&full);
                Evaluation {
                    loglik: e.loglik,
                    score: e.score.rows(1, 1 + p).into_owned(),
                    information: e.information.view((1, 1), (1 + p, 1 + p)).into_owned(),
                }
            };
            let out = maximize(theta0.rows(1, 1 + p).into_owned(), sub, newton);
            let mut full = DVector::zeros(2 + p);
            full[0] = alpha;
            full.rows_mut(1, 1 + p).copy_from(&out.theta);
            (full, out.eval, out.iterations, out.converged, out.loglik_trace, 1)
        }
    };
    if !converged {
        return Err(Error::NotConverged {
            iterations,
            score: max_abs(&eval.score),
        });
    }
    let cov_log = spd_inverse(&eval.information).ok_or(Error::RankDeficient)?;
    // Jacobian of (a, b, beta) with respect to (log a, log b, beta), free part only.
    let natural: Vec<f64> = (free..2 + p)
        .map(|j| if j < 2 { theta[j].exp() } else { theta[j] })
        .collect();
    let jac: Vec<f64> = (free..2 + p).map(|j| if j < 2 { theta[j].exp() } else { 1.0 }).collect();
    let k = natural.len();
    let cov = DMatrix::from_fn(k, k, |i, j| jac[i] * jac[j] * cov_log[(i, j)]);
    let mut labels: Vec<String> = ["shape", "scale"][free..].iter().map(|s| s.to_string()).collect();
    labels.extend(x.labels().iter().cloned());
    Ok(FitResult {
        labels,
        coefficients: natural,
        standard_errors: cov.diagonal().iter().map(|v| v.sqrt()).collect(),
        covariance: cov,
        loglik: eval.loglik,
        converged,
        iterations,
        loglik_trace: trace,
    })
}
