//! Damped Newton ascent shared by the likelihood fitters.

use nalgebra::{Cholesky, DMatrix, DVector};

/// Log-likelihood, score and observed information (negative Hessian).
pub(crate) struct Evaluation {
    pub loglik: f64,
    pub score: DVector<f64>,
    pub information: DMatrix<f64>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct NewtonOptions {
    pub max_iter: usize,
    pub score_tol: f64,
    pub rel_loglik_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iter: 50,
            score_tol: 1e-8,
            rel_loglik_tol: 1e-10,
        }
    }
}

pub(crate) struct NewtonOutcome {
    pub theta: DVector<f64>,
    pub eval: Evaluation,
    pub iterations: usize,
    pub converged: bool,
    pub loglik_trace: Vec<f64>,
}

pub(crate) fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `info * step = score`, adding Levenberg damping when `info` is
/// not positive definite.
fn newton_direction(info: &DMatrix<f64>, score: &DVector<f64>) -> DVector<f64> {
    if let Some(ch) = Cholesky::new(info.clone()) {
        return ch.solve(score);
    }
    let scale = info.diagonal().iter().fold(1e-12_f64, |m, v| m.max(v.abs()));
    let mut lambda = 1e-8 * scale;
    loop {
        let mut damped = info.clone();
        for i in 0..damped.nrows() {
            damped[(i, i)] += lambda;
        }
        if let Some(ch) = Cholesky::new(damped) {
            return ch.solve(score);
        }
        lambda *= 10.0;
        if lambda > 1e12 * scale {
            // steepest ascent as a last resort
            return score / scale;
        }
    }
}

/// Full Newton steps allowed once the loglik has stopped moving.
const POLISH_STEPS: usize = 3;
/// Relative loglik drop a polishing step may show from rounding alone.
pub(crate) const POLISH_SLACK: f64 = 1e-12;

/// Maximizes `f` from `theta0`. The log-likelihood never decreases from one
/// iteration to the next (step halving on decrease), apart from polishing
/// steps at the optimum, which may lose up to `POLISH_SLACK` relative to
/// rounding.
pub(crate) fn maximize<F>(theta0: DVector<f64>, mut f: F, opts: NewtonOptions) -> NewtonOutcome
where
    F: FnMut(&DVector<f64>) -> Evaluation,
{
    let mut theta = theta0;
    let mut eval = f(&theta);
    let mut trace = vec![eval.loglik];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        if max_abs(&eval.score) < opts.score_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let dir = newton_direction(&eval.information, &eval.score);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let cand = &theta + &dir * step;
            let e = f(&cand);
            if e.loglik.is_finite() && e.loglik >= eval.loglik {
                accepted = Some((cand, e));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, e)) = accepted else {
            // No ascent possible: at the optimum up to rounding.
            converged = max_abs(&eval.score) < opts.score_tol.sqrt();
            break;
        };
        let rel = (e.loglik - eval.loglik).abs() / eval.loglik.abs().max(1.0);
        theta = cand;
        eval = e;
        trace.push(eval.loglik);
        if rel < opts.rel_loglik_tol {
            // Negligible gain: full steps drive the score to rounding level.
            // The loglik is flat to within summation error here, so a step
            // is judged by the score instead.
            for _ in 0..POLISH_STEPS {
                if max_abs(&eval.score) < opts.score_tol {
                    break;
                }
                let dir = newton_direction(&eval.information, &eval.score);
                let cand = &theta + dir;
                let e = f(&cand);
                let slack = POLISH_SLACK * eval.loglik.abs().max(1.0);
                if !(e.loglik.is_finite()
                    && e.loglik >= eval.loglik - slack
                    && max_abs(&e.score) < max_abs(&eval.score))
                {
                    break;
                }
                theta = cand;
                eval = e;
                trace.push(eval.loglik);
                iterations += 1;
            }
            converged = max_abs(&eval.score) < opts.score_tol.sqrt();
            break;
        }
    }
    if !converged && max_abs(&eval.score) < opts.score_tol {
        converged = true;
    }
    NewtonOutcome {
        theta,
        eval,
        iterations,
        converged,
        loglik_trace: trace,
    }
}

/// Inverse of a symmetric positive definite matrix.
pub(crate) fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    Cholesky::new(m.clone()).map(|c| c.inverse())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maximizes_concave_quadratic() {
        // l(t) = -(t0 - 1)^2 - 2 (t1 + 3)^2
        let f = |t: &DVector<f64>| Evaluation {
            loglik: -(t[0] - 1.0).powi(2) - 2.0 * (t[1] + 3.0).powi(2),
            score: DVector::from_vec(vec![-2.0 * (t[0] - 1.0), -4.0 * (t[1] + 3.0)]),
            information: DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0])),
        };
        let out = maximize(DVector::zeros(2), f, NewtonOptions::default());
        assert!(out.converged);
        assert!((out.theta[0] - 1.0).abs() < 1e-12 && (out.theta[1] + 3.0).abs() < 1e-12);
    }
}
