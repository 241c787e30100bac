//! Synthetic covariates and outcomes for the augmented-survey simulation.
//!
//! Covariates: `x1 ~ N(2, 1)`, `x2 ~ N(-2, 1)`, `x3 | x1,x2 ~ N(0.5 x1 + 0.5 x2, 2^2)`,
//! `x4 | x1..x3 ~ N(0.3 (x1 + x2 + x3), 2^2)` and a four-level `x5` from a
//! multinomial logit. Outcomes are either a logistic binary `y` or a
//! delayed-entry, right-censored Weibull proportional-hazards age at event.

use rand_distr::{Distribution, StandardNormal};

use crate::data::{Column, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const X1: &str = "x1";
pub const X2: &str = "x2";
pub const X3: &str = "x3";
pub const X4: &str = "x4";
pub const X5: &str = "x5";
pub const Y: &str = "y";
pub const ENTRY: &str = "xt";
pub const EXIT: &str = "t";
pub const EVENT: &str = "delta";

pub const X5_LEVELS: [&str; 4] = ["1", "2", "3", "4"];
pub const Y_LEVELS: [&str; 2] = ["0", "1"];

/// Covariates only collected in the survey sample.
pub const SURVEY_COVARIATES: [&str; 3] = [X3, X4, X5];
pub const ANALYSIS_COVARIATES: [&str; 5] = [X1, X2, X3, X4, X5];

/// Intercepts of the non-reference `x5` logits (levels 2, 3, 4).
const X5_INTERCEPTS: [f64; 3] = [-2.0, 0.0, -2.0];
/// Shared slopes of the `x5` logits on `x1..x4`.
const X5_SLOPES: [f64; 4] = [0.5, 0.2, 0.1, 0.2];

/// Category probabilities of `x5` given `x1..x4`.
pub fn x5_probabilities(x: [f64; 4]) -> [f64; 4] {
    let slope: f64 = X5_SLOPES.iter().zip(&x).map(|(b, v)| b * v).sum();
    let mut logits = [0.0; 4];
    for (l, c) in logits[1..].iter_mut().zip(X5_INTERCEPTS) {
        *l = c + slope;
    }
    softmax4(logits)
}

fn softmax4(l: [f64; 4]) -> [f64; 4] {
    let max = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = l.map(|v| (v - max).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

/// Generating coefficients of the `x5` multinomial logit, in
/// [`crate::estimators::fit_multinomial`] label order:
/// `(level, [intercept, x1, x2, x3, x4])` for levels 2..4.
pub fn x5_true_coefficients() -> Vec<(String, [f64; 5])> {
    X5_LEVELS[1..]
        .iter()
        .zip(X5_INTERCEPTS)
        .map(|(lvl, c)| {
            (
                lvl.to_string(),
                [c, X5_SLOPES[0], X5_SLOPES[1], X5_SLOPES[2], X5_SLOPES[3]],
            )
        })
        .collect()
}

pub fn gen_covariates(n: usize, rng: &mut RngStream) -> Result<Dataset> {
    if n < 1 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let mut cols: [Vec<f64>; 4] = Default::default();
    let mut x5 = Vec::with_capacity(n);
    for _ in 0..n {
        let z: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let x1 = 2.0 + z[0];
        let x2 = -2.0 + z[1];
        let x3 = 0.5 * x1 + 0.5 * x2 + 2.0 * z[2];
        let x4 = 0.3 * (x1 + x2 + x3) + 2.0 * z[3];
        let p = x5_probabilities([x1, x2, x3, x4]);
        x5.push(draw_category(&p, rng.open01()));
        for (c, v) in cols.iter_mut().zip([x1, x2, x3, x4]) {
            c.push(v);
        }
    }
    let [c1, c2, c3, c4] = cols;
    Dataset::new(vec![
        Column::continuous(X1, c1)?,
        Column::continuous(X2, c2)?,
        Column::continuous(X3, c3)?,
        Column::continuous(X4, c4)?,
        Column::categorical(X5, &X5_LEVELS, &x5)?,
    ])
}

pub(crate) fn draw_category(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, pk) in p.iter().enumerate() {
        acc += pk;
        if u < acc {
            return k;
        }
    }
    p.len() - 1
}

/// Effects shared by the logistic and the Weibull linear predictor.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CovariateEffects {
    /// Slopes on `x1..x4`.
    pub beta: [f64; 4],
    /// Log odds (or log hazard) ratios of `x5` levels 2, 3, 4 against level 1.
    pub category: [f64; 3],
}

impl Default for CovariateEffects {
    fn default() -> Self {
        CovariateEffects {
            beta: [0.05, 0.2, 0.1, 0.02],
            category: [5f64.ln(), 2f64.ln(), 1.5f64.ln()],
        }
    }
}

impl CovariateEffects {
    pub fn zero() -> Self {
        CovariateEffects {
            beta: [0.0; 4],
            category: [0.0; 3],
        }
    }

    pub fn linear_predictor(&self, x: [f64; 4], x5_code: usize) -> f64 {
        let mut lp: f64 = self.beta.iter().zip(&x).map(|(b, v)| b * v).sum();
        if x5_code > 0 {
            lp += self.category[x5_code - 1];
        }
        lp
    }

    /// Coefficient labels in design-matrix order (no intercept).
    pub fn labels() -> Vec<String> {
        let mut l: Vec<String> = [X1, X2, X3, X4].iter().map(|s| s.to_string()).collect();
        l.extend(X5_LEVELS[1..].iter().map(|lvl| format!("{X5}_{lvl}")));
        l
    }

    pub fn values(&self) -> Vec<f64> {
        self.beta.iter().chain(&self.category).copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BinaryOutcomeParams {
    pub intercept: f64,
    pub effects: CovariateEffects,
}

impl Default for BinaryOutcomeParams {
    fn default() -> Self {
        BinaryOutcomeParams {
            intercept: -1.0,
            effects: CovariateEffects::default(),
        }
    }
}

impl BinaryOutcomeParams {
    pub fn logit(&self, x: [f64; 4], x5_code: usize) -> f64 {
        self.intercept + self.effects.linear_predictor(x, x5_code)
    }

    pub fn event_probability(&self, x: [f64; 4], x5_code: usize) -> f64 {
        inv_logit(self.logit(x, x5_code))
    }

    /// `(label, value)` pairs matching the logistic analysis model.
    pub fn truth(&self) -> Vec<(String, f64)> {
        std::iter::once(("(Intercept)".to_string(), self.intercept))
            .chain(CovariateEffects::labels().into_iter().zip(self.effects.values()))
            .collect()
    }
}

pub fn inv_logit(l: f64) -> f64 {
    if l >= 0.0 {
        1.0 / (1.0 + (-l).exp())
    } else {
        let e = l.exp();
        e / (1.0 + e)
    }
}

/// Reads `x1..x4` and the `x5` code of one row of a fully observed dataset.
pub(crate) struct CovariateRows<'a> {
    x: [&'a [f64]; 4],
    x5: &'a [f64],
}

impl<'a> CovariateRows<'a> {
    pub(crate) fn new(ds: &'a Dataset) -> Result<Self> {
        Ok(CovariateRows {
            x: [
                ds.column(X1)?.complete_values()?,
                ds.column(X2)?.complete_values()?,
                ds.column(X3)?.complete_values()?,
                ds.column(X4)?.complete_values()?,
            ],
            x5: ds.column(X5)?.complete_values()?,
        })
    }

    pub(crate) fn row(&self, i: usize) -> ([f64; 4], usize) {
        (self.x.map(|c| c[i]), self.x5[i] as usize)
    }
}

pub fn gen_binary_outcome(ds: &Dataset, params: &BinaryOutcomeParams, rng: &mut RngStream) -> Result<Dataset> {
    let rows = CovariateRows::new(ds)?;
    let y: Vec<usize> = (0..ds.row_count())
        .map(|i| {
            let (x, c) = rows.row(i);
            usize::from(rng.open01() < params.event_probability(x, c))
        })
        .collect();
    ds.clone().with_column(Column::categorical(Y, &Y_LEVELS, &y)?)
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeibullParams {
    pub shape: f64,
    pub scale: f64,
    pub effects: CovariateEffects,
    pub censor_age: f64,
    pub entry_low: f64,
    pub entry_high: f64,
}

impl Default for WeibullParams {
    fn default() -> Self {
        WeibullParams {
            shape: 7.5,
            scale: 84.0,
            effects: CovariateEffects::default(),
            censor_age: 100.0,
            entry_low: 0.0,
            entry_high: 50.0,
        }
    }
}

impl WeibullParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.shape > 0.0
            && self.scale > 0.0
            && self.entry_low >= 0.0
            && self.entry_low < self.entry_high
            && self.entry_high < self.censor_age;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid Weibull parameters {self:?}")))
        }
    }

    /// Scale of the Weibull for a subject with linear predictor `lp`.
    pub fn subject_scale(&self, lp: f64) -> f64 {
        self.scale * (-lp / self.shape).exp()
    }

    /// `S(c | T > entry)` for a subject with linear predictor `lp`.
    pub fn conditional_survival(&self, c: f64, entry: f64, lp: f64) -> f64 {
        let be = self.subject_scale(lp);
        (-((c / be).powf(self.shape) - (entry / be).powf(self.shape))).exp()
    }

    /// `(label, value)` pairs matching the Weibull analysis model.
    pub fn truth(&self) -> Vec<(String, f64)> {
        [("shape".to_string(), self.shape), ("scale".to_string(), self.scale)]
            .into_iter()
            .chain(CovariateEffects::labels().into_iter().zip(self.effects.values()))
            .collect()
    }
}

/// Inverse-CDF draw of `T | T > entry` for `T ~ Weibull(shape, scale e^{-lp/shape})`
/// at a fixed uniform `u` in (0, 1).
pub fn trunc_weibull_quantile(entry: f64, lp: f64, shape: f64, scale: f64, u: f64) -> f64 {
    let be = scale * (-lp / shape).exp();
    be * ((entry / be).powf(shape) - u.ln()).powf(1.0 / shape)
}

pub fn sample_trunc_weibull(entry: f64, lp: f64, params: &WeibullParams, rng: &mut RngStream) -> Result<f64> {
    if !(entry >= 0.0 && entry < params.censor_age) {
        return Err(Error::InvalidArgument(format!(
            "entry age {entry} outside [0, {})",
            params.censor_age
        )));
    }
    if !lp.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite linear predictor {lp}")));
    }
    loop {
        let t = trunc_weibull_quantile(entry, lp, params.shape, params.scale, rng.open01());
        // u within ~1e-16 of 1 rounds back onto the entry age
        if t > entry {
            return Ok(t);
        }
    }
}

pub fn gen_tte_outcome(ds: &Dataset, params: &WeibullParams, rng: &mut RngStream) -> Result<Dataset> {
    params.validate()?;
    let rows = CovariateRows::new(ds)?;
    let n = ds.row_count();
    let (mut entry, mut exit, mut delta) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let width = params.entry_high - params.entry_low;
    for i in 0..n {
        let (x, c) = rows.row(i);
        let lp = params.effects.linear_predictor(x, c);
        let xt = params.entry_low + width * rng.open01();
        let t_star = sample_trunc_weibull(xt, lp, params, rng)?;
        entry.push(xt);
        exit.push(t_star.min(params.censor_age));
        delta.push(if t_star <= params.censor_age { 1.0 } else { 0.0 });
    }
    ds.clone()
        .with_column(Column::of_kind(ENTRY, ColumnKind::EntryTime, entry)?)?
        .with_column(Column::of_kind(EXIT, ColumnKind::EventTime, exit)?)?
        .with_column(Column::of_kind(EVENT, ColumnKind::EventIndicator, delta)?)
}
