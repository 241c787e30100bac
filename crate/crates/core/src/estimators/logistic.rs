use nalgebra::{DMatrix, DVector};

use super::newton::{max_abs, maximize, spd_inverse, Evaluation, NewtonOptions};
use super::{ridge_scale, weighted_gram, DesignMatrix, FitResult, GlmOptions, SEPARATION_THRESHOLD};
use crate::error::{Error, Result};

/// `log(1 + exp(eta))` without overflow.
pub(crate) fn log1p_exp(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

pub fn fit_logistic(x: &DesignMatrix, y: &[f64]) -> Result<FitResult> {
    fit_logistic_with(x, y, &GlmOptions::default())
}

/// Logistic regression by Newton-Raphson (IRLS) with step halving. With
/// `opts.ridge > 0` the penalized likelihood is maximized and neither
/// separation nor rank deficiency is an error.
pub fn fit_logistic_with(x: &DesignMatrix, y: &[f64], opts: &GlmOptions) -> Result<FitResult> {
    let xm = x.matrix();
    let (n, p) = (xm.nrows(), xm.ncols());
    if y.len() != n {
        return Err(Error::InvalidArgument(format!("{} outcomes for {n} rows", y.len())));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidArgument("logistic outcome must be 0/1".into()));
    }
    let penalized = opts.ridge > 0.0;
    if !penalized {
        if n <= p {
            return Err(Error::InvalidArgument(format!("{n} rows for {p} coefficients")));
        }
        let ones = y.iter().filter(|&&v| v == 1.0).count();
        if ones == 0 || ones == n {
            return Err(Error::Separation {
                max_abs_coef: f64::INFINITY,
            });
        }
        x.check_rank()?;
    }
    let scale = ridge_scale(xm);
    let yv = DVector::from_column_slice(y);
    let eval = |beta: &DVector<f64>| logistic_eval(xm, &yv, beta, opts.ridge, &scale);
    let out = maximize(
        DVector::zeros(p),
        eval,
        NewtonOptions {
            max_iter: opts.max_iter,
            ..NewtonOptions::default()
        },
    );
    let max_coef = max_abs(&out.theta);
    if !penalized && max_coef > SEPARATION_THRESHOLD {
        return Err(Error::Separation { max_abs_coef: max_coef });
    }
    if !out.converged {
        if !penalized && max_coef > 0.5 * SEPARATION_THRESHOLD {
            return Err(Error::Separation { max_abs_coef: max_coef });
        }
        return Err(Error::NotConverged {
            iterations: out.iterations,
            score: max_abs(&out.eval.score),
        });
    }
    let cov = spd_inverse(&out.eval.information).ok_or(Error::RankDeficient)?;
    Ok(FitResult {
        labels: x.labels().to_vec(),
        coefficients: out.theta.iter().copied().collect(),
        standard_errors: cov.diagonal().iter().map(|v| v.sqrt()).collect(),
        covariance: cov,
        loglik: out.eval.loglik,
        converged: true,
        iterations: out.iterations,
        loglik_trace: out.loglik_trace,
    })
}

fn logistic_eval(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, ridge: f64, scale: &[f64]) -> Evaluation {
    let eta = x * beta;
    let mut loglik = 0.0;
    let mut resid = DVector::zeros(eta.len());
    let mut w = vec![0.0; eta.len()];
    for i in 0..eta.len() {
        let e = eta[i];
        loglik += y[i] * e - log1p_exp(e);
        let pr = crate::simgen::inv_logit(e);
        resid[i] = y[i] - pr;
        w[i] = pr * (1.0 - pr);
    }
    let mut score = x.tr_mul(&resid);
    let mut information = weighted_gram(x, &w);
    if ridge > 0.0 {
        for j in 0..beta.len() {
            loglik -= 0.5 * ridge * scale[j] * beta[j] * beta[j];
            score[j] -= ridge * scale[j] * beta[j];
            information[(j, j)] += ridge * scale[j];
        }
    }
    Evaluation {
        loglik,
        score,
        information,
    }
}
