use nalgebra::{DMatrix, DVector};

use super::newton::{max_abs, maximize, spd_inverse, Evaluation, NewtonOptions};
use super::{ridge_scale, weighted_gram, DesignMatrix, FitResult, GlmOptions, SEPARATION_THRESHOLD};
use crate::error::{Error, Result};

pub fn fit_multinomial(x: &DesignMatrix, y: &[f64], levels: &[String], ref_level: &str) -> Result<FitResult> {
    fit_multinomial_with(x, y, levels, ref_level, &GlmOptions::default())
}

/// Baseline-category logit model. `y` holds level indices into `levels`.
/// Coefficients are laid out block by block, one block of `x.ncols()` per
/// non-reference level (in level order), labelled `"<level>:<column>"`.
pub fn fit_multinomial_with(
    x: &DesignMatrix,
    y: &[f64],
    levels: &[String],
    ref_level: &str,
    opts: &GlmOptions,
) -> Result<FitResult> {
    let xm = x.matrix();
    let (n, p) = (xm.nrows(), xm.ncols());
    let k = levels.len();
    if y.len() != n {
        return Err(Error::InvalidArgument(format!("{} outcomes for {n} rows", y.len())));
    }
    if k < 2 {
        return Err(Error::InvalidArgument("multinomial outcome needs at least two levels".into()));
    }
    let reference = levels
        .iter()
        .position(|l| l == ref_level)
        .ok_or_else(|| Error::InvalidArgument(format!("reference level `{ref_level}` not among levels")))?;
    let mut counts = vec![0usize; k];
    for &v in y {
        let c = v as usize;
        if v.fract() != 0.0 || v < 0.0 || c >= k {
            return Err(Error::InvalidArgument(format!("{v} is not a level index")));
        }
        counts[c] += 1;
    }
    let penalized = opts.ridge > 0.0;
    if !penalized {
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyCategory(levels[empty].clone()));
        }
        if n <= p {
            return Err(Error::InvalidArgument(format!("{n} rows for {p} coefficients")));
        }
        x.check_rank()?;
    }
    // Non-reference levels in order; block b models level others[b].
    let others: Vec<usize> = (0..k).filter(|&l| l != reference).collect();
    let codes: Vec<usize> = y.iter().map(|&v| v as usize).collect();
    let scale = ridge_scale(xm);
    let eval = |theta: &DVector<f64>| multinomial_eval(xm, &codes, &others, theta, opts.ridge, &scale);
    let out = maximize(
        DVector::zeros(p * others.len()),
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
    let labels = others
        .iter()
        .flat_map(|&l| x.labels().iter().map(move |c| format!("{}:{c}", levels[l])))
        .collect();
    Ok(FitResult {
        labels,
        coefficients: out.theta.iter().copied().collect(),
        standard_errors: cov.diagonal().iter().map(|v| v.sqrt()).collect(),
        covariance: cov,
        loglik: out.eval.loglik,
        converged: true,
        iterations: out.iterations,
        loglik_trace: out.loglik_trace,
    })
}

/// Category probabilities for each row (columns indexed by level).
pub(crate) fn multinomial_probabilities(
    x: &DMatrix<f64>,
    others: &[usize],
    n_levels: usize,
    theta: &DVector<f64>,
) -> DMatrix<f64> {
    let p = x.ncols();
    let n = x.nrows();
    let mut eta = DMatrix::zeros(n, n_levels);
    for (b, &l) in others.iter().enumerate() {
        let beta = theta.rows(b * p, p);
        eta.set_column(l, &(x * beta));
    }
    for i in 0..n {
        let mut row = eta.row_mut(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            s += *v;
        }
        row /= s;
    }
    eta
}

fn multinomial_eval(
    x: &DMatrix<f64>,
    codes: &[usize],
    others: &[usize],
    theta: &DVector<f64>,
    ridge: f64,
    scale: &[f64],
) -> Evaluation {
    let (n, p) = (x.nrows(), x.ncols());
    let k = others.len() + 1;
    let probs = multinomial_probabilities(x, others, k, theta);
    let loglik: f64 = codes.iter().enumerate().map(|(i, &c)| probs[(i, c)].max(1e-300).ln()).sum();
    let q = others.len();
    let mut score = DVector::zeros(p * q);
    let mut information = DMatrix::zeros(p * q, p * q);
    for (b, &l) in others.iter().enumerate() {
        let resid = DVector::from_fn(n, |i, _| f64::from(codes[i] == l) - probs[(i, l)]);
        score.rows_mut(b * p, p).copy_from(&x.tr_mul(&resid));
        for (b2, &l2) in others.iter().enumerate().skip(b) {
            let w: Vec<f64> = (0..n)
                .map(|i| {
                    let pl = probs[(i, l)];
                    if l == l2 {
                        pl * (1.0 - pl)
                    } else {
                        -pl * probs[(i, l2)]
                    }
                })
                .collect();
            let block = weighted_gram(x, &w);
            information.view_mut((b * p, b2 * p), (p, p)).copy_from(&block);
            if b2 != b {
                information.view_mut((b2 * p, b * p), (p, p)).copy_from(&block.transpose());
            }
        }
    }
    let mut loglik = loglik;
    if ridge > 0.0 {
        for b in 0..q {
            for j in 0..p {
                let t = theta[b * p + j];
                loglik -= 0.5 * ridge * scale[j] * t * t;
                score[b * p + j] -= ridge * scale[j] * t;
                information[(b * p + j, b * p + j)] += ridge * scale[j];
            }
        }
    }
    Evaluation {
        loglik,
        score,
        information,
    }
}
