//! Posterior-predictive draws from GLM conditional models.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::data::ColumnKind;
use crate::error::{Error, Result};
use crate::estimators::multinomial::multinomial_probabilities;
use crate::estimators::{fit_logistic_with, fit_multinomial_with, ols, DesignMatrix, FitResult, GlmOptions};
use crate::rng::RngStream;
use crate::simgen::{draw_category, inv_logit};

/// Ridge weight used when an unpenalized conditional fit fails.
pub const RIDGE_FALLBACK: f64 = 1e-4;

fn check_shapes(obs: &DesignMatrix, y: &[f64], mis: &DesignMatrix) -> Result<()> {
    if obs.nrows() != y.len() {
        return Err(Error::InvalidArgument(format!("{} targets for {} rows", y.len(), obs.nrows())));
    }
    if obs.ncols() != mis.ncols() {
        return Err(Error::InvalidArgument("observed and missing designs differ in width".into()));
    }
    if y.is_empty() {
        return Err(Error::InvalidArgument("no observed rows to fit".into()));
    }
    Ok(())
}

/// `mean + chol(cov) z`; a covariance that is not numerically PD is
/// treated as diagonal.
fn gaussian_draw(mean: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut RngStream) -> DVector<f64> {
    let z = DVector::from_fn(mean.len(), |_, _| StandardNormal.sample(rng));
    match Cholesky::new(cov.clone()) {
        Some(ch) => mean + ch.l() * z,
        None => mean + z.component_mul(&cov.diagonal().map(|v| v.max(0.0).sqrt())),
    }
}

/// Bayesian linear-regression draw: `sigma^2` from its scaled inverse
/// chi-square posterior, `beta` from its Gaussian posterior given
/// `sigma`, then predictions plus noise.
pub fn impute_norm(obs: &DesignMatrix, y: &[f64], mis: &DesignMatrix, rng: &mut RngStream) -> Result<Vec<f64>> {
    check_shapes(obs, y, mis)?;
    let p = obs.ncols();
    let fit = if y.len() >= p + 2 {
        ols(obs, y, 0.0).or_else(|_| ols(obs, y, RIDGE_FALLBACK))?
    } else {
        ols(obs, y, RIDGE_FALLBACK)?
    };
    let df = fit.df.max(1) as f64;
    let sigma = if fit.rss > 0.0 {
        let chi: f64 = ChiSquared::new(df).expect("positive df").sample(rng);
        (fit.rss / chi).sqrt()
    } else {
        0.0
    };
    let beta = if sigma > 0.0 {
        gaussian_draw(&fit.beta, &(&fit.xtx_inv * (sigma * sigma)), rng)
    } else {
        fit.beta.clone()
    };
    let pred = mis.matrix() * beta;
    Ok(pred
        .iter()
        .map(|mu| {
            if sigma > 0.0 {
                let e: f64 = StandardNormal.sample(rng);
                mu + sigma * e
            } else {
                *mu
            }
        })
        .collect())
}

fn with_fallback(fit: impl Fn(&GlmOptions) -> Result<FitResult>) -> Result<FitResult> {
    fit(&GlmOptions::default()).or_else(|_| fit(&GlmOptions::ridge(RIDGE_FALLBACK)))
}

/// Logistic draw for a 0/1 target: `beta` from the normal approximation
/// at the MLE, then Bernoulli outcomes.
pub fn impute_logistic(obs: &DesignMatrix, y: &[f64], mis: &DesignMatrix, rng: &mut RngStream) -> Result<Vec<f64>> {
    check_shapes(obs, y, mis)?;
    let fit = with_fallback(|o| fit_logistic_with(obs, y, o))?;
    let beta = gaussian_draw(&DVector::from_vec(fit.coefficients), &fit.covariance, rng);
    let eta = mis.matrix() * beta;
    Ok(eta.iter().map(|&e| f64::from(rng.open01() < inv_logit(e))).collect())
}

/// Baseline-category logit draw for a target coded `0..n_levels`.
pub fn impute_multinomial(
    obs: &DesignMatrix,
    y: &[f64],
    n_levels: usize,
    mis: &DesignMatrix,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    check_shapes(obs, y, mis)?;
    let levels: Vec<String> = (0..n_levels).map(|l| l.to_string()).collect();
    let fit = with_fallback(|o| fit_multinomial_with(obs, y, &levels, "0", o))?;
    let theta = gaussian_draw(&DVector::from_vec(fit.coefficients), &fit.covariance, rng);
    let others: Vec<usize> = (1..n_levels).collect();
    let probs = multinomial_probabilities(mis.matrix(), &others, n_levels, &theta);
    Ok((0..mis.nrows())
        .map(|i| {
            let row: Vec<f64> = probs.row(i).iter().copied().collect();
            draw_category(&row, rng.open01()) as f64
        })
        .collect())
}

pub(crate) fn n_levels(kind: &ColumnKind) -> usize {
    kind.levels().map_or(0, <[String]>::len)
}
