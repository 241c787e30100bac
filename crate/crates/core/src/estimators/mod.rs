//! Maximum-likelihood analysis models and nonparametric estimators.

mod design;
mod kendall;
mod linear;
mod logistic;
pub(crate) mod multinomial;
mod nelson_aalen;
pub(crate) mod newton;
mod weibull;

use nalgebra::DMatrix;

pub use design::{DesignInput, DesignMatrix, INTERCEPT};
pub use kendall::{kendall_tau, kendall_tau_complete};
pub use linear::{fit_linear, ols, OlsFit};
pub use logistic::{fit_logistic, fit_logistic_with};
pub use multinomial::{fit_multinomial, fit_multinomial_with};
pub use nelson_aalen::{nelson_aalen, CumulativeHazard};
pub use weibull::{fit_weibull_lt, fit_weibull_lt_with, WeibullFitOptions, WeibullLikelihood};

/// Separation is reported once any coefficient exceeds this magnitude.
pub const SEPARATION_THRESHOLD: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlmOptions {
    /// L2 penalty weight; the penalty on coefficient `j` is
    /// `ridge / 2 * n * mean(x_j^2) * beta_j^2`. Zero means plain ML.
    pub ridge: f64,
    pub max_iter: usize,
}

impl Default for GlmOptions {
    fn default() -> Self {
        GlmOptions { ridge: 0.0, max_iter: 50 }
    }
}

impl GlmOptions {
    pub fn ridge(ridge: f64) -> Self {
        GlmOptions { ridge, max_iter: 200 }
    }
}

/// Coefficients, standard errors and covariance from one fit.
#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub labels: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Log-likelihood after each accepted iteration (iterative fitters only).
    pub loglik_trace: Vec<f64>,
}

impl FitResult {
    pub fn coefficient(&self, label: &str) -> Option<(f64, f64)> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| (self.coefficients[i], self.standard_errors[i]))
    }
}

/// Per-coefficient ridge scale `n * mean(x_j^2)`.
pub(crate) fn ridge_scale(x: &DMatrix<f64>) -> Vec<f64> {
    x.column_iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().max(1e-12))
        .collect()
}

/// `X^T diag(w) X`.
pub(crate) fn weighted_gram(x: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut xw = x.clone();
    for mut col in xw.column_iter_mut() {
        for (v, wi) in col.iter_mut().zip(w) {
            *v *= wi;
        }
    }
    x.tr_mul(&xw)
}
