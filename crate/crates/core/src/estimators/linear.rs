use nalgebra::{DMatrix, DVector};

use super::newton::spd_inverse;
use super::{DesignMatrix, FitResult};
use crate::error::{Error, Result};

/// Ordinary least-squares pieces needed both for inference and for
/// posterior draws in the imputation engine.
#[derive(Clone, Debug)]
pub struct OlsFit {
    pub beta: DVector<f64>,
    pub xtx_inv: DMatrix<f64>,
    pub rss: f64,
    /// Residual degrees of freedom `n - p`.
    pub df: usize,
}

/// OLS with an optional ridge `ridge * diag(X^T X)` added to the normal
/// equations. With `ridge == 0` the design must have full column rank.
pub fn ols(x: &DesignMatrix, y: &[f64], ridge: f64) -> Result<OlsFit> {
    let xm = x.matrix();
    let (n, p) = (xm.nrows(), xm.ncols());
    if y.len() != n {
        return Err(Error::InvalidArgument(format!("{} outcomes for {n} rows", y.len())));
    }
    if ridge == 0.0 {
        if n <= p {
            return Err(Error::InvalidArgument(format!("{n} rows for {p} coefficients")));
        }
        x.check_rank()?;
    }
    let mut xtx = xm.tr_mul(xm);
    if ridge > 0.0 {
        for j in 0..p {
            xtx[(j, j)] += ridge * xtx[(j, j)].max(1e-8);
        }
    }
    let xtx_inv = spd_inverse(&xtx).ok_or(Error::RankDeficient)?;
    let yv = DVector::from_column_slice(y);
    let beta = &xtx_inv * xm.tr_mul(&yv);
    let resid = &yv - xm * &beta;
    Ok(OlsFit {
        beta,
        xtx_inv,
        rss: resid.norm_squared(),
        df: n.saturating_sub(p),
    })
}

pub fn fit_linear(x: &DesignMatrix, y: &[f64]) -> Result<FitResult> {
    let fit = ols(x, y, 0.0)?;
    let n = y.len() as f64;
    let sigma2 = fit.rss / fit.df as f64;
    let covariance = &fit.xtx_inv * sigma2;
    let ml_var = fit.rss / n;
    let loglik = if ml_var > 0.0 {
        -0.5 * n * ((2.0 * std::f64::consts::PI * ml_var).ln() + 1.0)
    } else {
        f64::INFINITY
    };
    Ok(FitResult {
        labels: x.labels().to_vec(),
        coefficients: fit.beta.iter().copied().collect(),
        standard_errors: covariance.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect(),
        covariance,
        loglik,
        converged: true,
        iterations: 0,
        loglik_trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::DesignInput;

    fn simple(xs: &[f64]) -> DesignMatrix {
        DesignMatrix::from_inputs(
            &[DesignInput {
                name: "x",
                values: xs,
                levels: None,
            }],
            None,
            true,
        )
    }

    #[test]
    fn three_point_hand_solution() {
        let fit = fit_linear(&simple(&[0.0, 1.0, 2.0]), &[0.0, 1.0, 4.0]).unwrap();
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-9);
        assert!((fit.coefficients[0] + 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn exact_fit_has_zero_residual() {
        let xs = [1.0, 2.0, 3.0, 5.0, 8.0];
        let y: Vec<f64> = xs.iter().map(|v| 3.0 - 0.5 * v).collect();
        let o = ols(&simple(&xs), &y, 0.0).unwrap();
        assert!(o.rss < 1e-20);
        assert!((o.beta[0] - 3.0).abs() < 1e-12 && (o.beta[1] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn row_permutation_invariant() {
        let xs = [0.3, 1.7, 2.2, 4.0, 5.5, 6.1];
        let y = [1.0, 2.5, 2.0, 5.0, 4.2, 7.7];
        let a = fit_linear(&simple(&xs), &y).unwrap();
        let perm = [3, 0, 5, 1, 4, 2];
        let xp: Vec<f64> = perm.iter().map(|&i| xs[i]).collect();
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let b = fit_linear(&simple(&xp), &yp).unwrap();
        for (u, v) in a.coefficients.iter().zip(&b.coefficients) {
            assert!((u - v).abs() < 1e-12);
        }
        for (u, v) in a.standard_errors.iter().zip(&b.standard_errors) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_deficiency() {
        assert!(matches!(
            fit_linear(&simple(&[2.0, 2.0, 2.0]), &[1.0, 2.0, 3.0]),
            Err(Error::RankDeficient)
        ));
        assert!(ols(&simple(&[2.0, 2.0, 2.0]), &[1.0, 2.0, 3.0], 1e-4).is_ok());
    }
}
