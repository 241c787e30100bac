//! Chained-equations multiple imputation.

mod cart;
mod draws;
mod fcs;
mod predictors;

use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};

pub use cart::{impute_cart, CartControls, RegressionTree};
pub use draws::{impute_logistic, impute_multinomial, impute_norm, RIDGE_FALLBACK};
pub use fcs::{fcs_impute, write_imputations, TraceEntry, TraceStats};
pub use predictors::{build_tte_predictors, derived_tte_column, select_predictors};

/// Fewer observed rows than this and a CART model falls back to the GLM draw.
pub const CART_MIN_OBSERVED: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    NormDraw,
    LogisticDraw,
    MultinomialDraw,
    CartDonor,
}

impl Method {
    /// The GLM draw matching a column kind.
    pub fn glm_for(kind: &ColumnKind) -> Result<Method> {
        match kind {
            ColumnKind::Continuous => Ok(Method::NormDraw),
            ColumnKind::Categorical { levels } if levels.len() == 2 => Ok(Method::LogisticDraw),
            ColumnKind::Categorical { levels } if levels.len() > 2 => Ok(Method::MultinomialDraw),
            other => Err(Error::InvalidArgument(format!("no imputation model for a {other:?} column"))),
        }
    }

    pub fn compatible_with(self, kind: &ColumnKind) -> bool {
        match self {
            Method::CartDonor => matches!(kind, ColumnKind::Continuous | ColumnKind::Categorical { .. }),
            m => Method::glm_for(kind).is_ok_and(|g| g == m),
        }
    }
}

/// Survival-derived predictor added to imputation models.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TtePredictor {
    #[default]
    NelsonAalen,
    Time,
    LogTime,
    None,
}

impl TtePredictor {
    /// Name of the derived column, if any.
    pub fn column_name(self) -> Option<&'static str> {
        match self {
            TtePredictor::NelsonAalen => Some("na_hazard"),
            TtePredictor::Time => Some("followup"),
            TtePredictor::LogTime => Some("log_followup"),
            TtePredictor::None => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorSelection {
    All,
    /// Keep candidates with `|tau| >= threshold` against the outcome.
    KendallTau(f64),
}

impl PredictorSelection {
    pub const DEFAULT_THRESHOLD: f64 = 0.05;
}

impl Default for PredictorSelection {
    fn default() -> Self {
        PredictorSelection::KendallTau(Self::DEFAULT_THRESHOLD)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    Glm,
    Cart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImputationModelSpec {
    pub target: String,
    pub method: Method,
    pub predictors: Vec<String>,
    pub tte_predictor: TtePredictor,
}

impl ImputationModelSpec {
    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        let kind = ds.column(&self.target)?.kind();
        if !self.method.compatible_with(kind) {
            return Err(Error::InvalidArgument(format!(
                "method {:?} cannot impute column `{}` of kind {kind:?}",
                self.method, self.target
            )));
        }
        for p in &self.predictors {
            if p == &self.target {
                return Err(Error::InvalidArgument(format!("`{p}` is both target and predictor")));
            }
            ds.column(p)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImputationConfig {
    pub specs: Vec<ImputationModelSpec>,
    pub m: usize,
    pub iterations: usize,
    pub predictor_selection: PredictorSelection,
    pub cart: CartControls,
    /// Outcome column used for Kendall-tau selection when the data carry
    /// no survival columns.
    pub outcome: Option<String>,
}

impl ImputationConfig {
    /// One spec per incomplete column. Every other column is a predictor
    /// except the raw exit time, which enters only through `tte`. Selection
    /// starts as `All` since no outcome column is known here.
    pub fn auto(
        ds: &Dataset,
        family: ModelFamily,
        tte: TtePredictor,
        m: usize,
        iterations: usize,
    ) -> Result<Self> {
        let mut specs = Vec::new();
        for col in ds.columns().iter().filter(|c| c.n_missing() > 0) {
            let method = match family {
                ModelFamily::Glm => Method::glm_for(col.kind())?,
                ModelFamily::Cart => {
                    Method::glm_for(col.kind())?;
                    Method::CartDonor
                }
            };
            let predictors = ds
                .columns()
                .iter()
                .filter(|c| c.name() != col.name() && *c.kind() != ColumnKind::EventTime)
                .map(|c| c.name().to_string())
                .collect();
            specs.push(ImputationModelSpec {
                target: col.name().to_string(),
                method,
                predictors,
                tte_predictor: tte,
            });
        }
        if specs.is_empty() {
            return Err(Error::NothingToImpute);
        }
        Ok(ImputationConfig {
            specs,
            m,
            iterations,
            predictor_selection: PredictorSelection::All,
            cart: CartControls::default(),
            outcome: None,
        })
    }

    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        if self.m < 3 {
            return Err(Error::config("m", format!("need at least 3 imputations, got {}", self.m)));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations", "must be positive"));
        }
        if let PredictorSelection::KendallTau(t) = self.predictor_selection {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::config("predictor_selection", format!("threshold {t} outside [0, 1]")));
            }
        }
        self.cart.validate()?;
        for spec in &self.specs {
            spec.validate(ds)?;
        }
        Ok(())
    }
}
