//! Declarative simulation scenarios: configuration, replicate execution and
//! output files.

mod records;
mod run;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::MaskMode;
use crate::error::{Error, Result};
use crate::impute::{CartControls, ModelFamily, PredictorSelection, TtePredictor};

pub use records::{
    read_records, report_from_records, write_records, CoefficientRecord, Failure, RecordWriter, ReplicateRecord,
};
pub use run::{
    fit_analysis, generate_replicate, generating_truth, imputation_config, run_replicate, run_scenario, ReplicateOutput,
    ScenarioOutput,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeKind {
    Binary,
    Tte,
}

/// Imputation method as named in scenario files.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioMethod {
    #[default]
    Glm,
    Cart,
    Transformation,
    NelsonAalen,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthMode {
    /// The parameter values the data were generated from.
    #[default]
    Generating,
    /// The analysis model fitted to the replicate before masking.
    FullData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MiSettings {
    pub m: usize,
    pub iterations: usize,
    pub method: ScenarioMethod,
    pub predictor_selection: PredictorSelection,
    pub cart: CartControls,
    /// Overrides the survival predictor implied by `method`.
    pub tte_predictor: Option<TtePredictor>,
}

impl Default for MiSettings {
    fn default() -> Self {
        MiSettings {
            m: 25,
            iterations: 15,
            method: ScenarioMethod::Glm,
            predictor_selection: PredictorSelection::default(),
            cart: CartControls::default(),
            tte_predictor: None,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub outcome: OutcomeKind,
    pub n: usize,
    pub observed_fraction: f64,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub mi: MiSettings,
    /// Worker threads; `None` means all available cores.
    #[serde(default)]
    pub parallelism: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub masking: MaskMode,
    #[serde(default)]
    pub truth_mode: TruthMode,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n", "must be positive"));
        }
        if !(self.observed_fraction > 0.0 && self.observed_fraction <= 1.0) {
            return Err(Error::config(
                "observed_fraction",
                format!("must lie in (0, 1], got {}", self.observed_fraction),
            ));
        }
        if self.replicates == 0 {
            return Err(Error::config("replicates", "must be positive"));
        }
        if self.mi.m < 3 {
            return Err(Error::config("mi.m", format!("need at least 3 imputations, got {}", self.mi.m)));
        }
        if self.mi.iterations == 0 {
            return Err(Error::config("mi.iterations", "must be positive"));
        }
        if self.parallelism == Some(0) {
            return Err(Error::config("parallelism", "must be positive"));
        }
        if let PredictorSelection::KendallTau(t) = self.mi.predictor_selection {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::config("mi.predictor_selection", format!("threshold {t} outside [0, 1]")));
            }
        }
        self.mi.cart.validate()?;
        if self.outcome == OutcomeKind::Binary {
            if matches!(self.mi.method, ScenarioMethod::Transformation | ScenarioMethod::NelsonAalen) {
                return Err(Error::config(
                    "mi.method",
                    format!("{:?} needs a time-to-event outcome", self.mi.method),
                ));
            }
            if self.mi.tte_predictor.is_some() {
                return Err(Error::config("mi.tte_predictor", "only valid for a time-to-event outcome"));
            }
        }
        Ok(())
    }

    /// Fills `parallelism` with the available core count.
    pub fn resolved(mut self) -> Self {
        if self.parallelism.is_none() {
            self.parallelism = Some(std::thread::available_parallelism().map_or(1, |n| n.get()));
        }
        self
    }

    /// Desk-scale settings: n = 20,000, 50 replicates, m = 10, 10 sweeps.
    pub fn apply_desk_preset(&mut self) {
        self.n = 20_000;
        self.replicates = 50;
        self.mi.m = 10;
        self.mi.iterations = 10;
    }

    /// Model family and survival predictor used by the imputation models.
    pub fn imputation_models(&self) -> (ModelFamily, TtePredictor) {
        let (family, implied) = match (self.outcome, self.mi.method) {
            (OutcomeKind::Binary, ScenarioMethod::Cart) => (ModelFamily::Cart, TtePredictor::None),
            (OutcomeKind::Binary, _) => (ModelFamily::Glm, TtePredictor::None),
            (OutcomeKind::Tte, ScenarioMethod::Glm) => (ModelFamily::Glm, TtePredictor::Time),
            (OutcomeKind::Tte, ScenarioMethod::Transformation) => (ModelFamily::Glm, TtePredictor::LogTime),
            (OutcomeKind::Tte, ScenarioMethod::NelsonAalen) => (ModelFamily::Glm, TtePredictor::NelsonAalen),
            (OutcomeKind::Tte, ScenarioMethod::Cart) => (ModelFamily::Cart, TtePredictor::NelsonAalen),
        };
        (family, self.mi.tte_predictor.unwrap_or(implied))
    }
}

/// Reads and validates a scenario file.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    ScenarioConfig::from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"outcome": "binary", "n": 1000, "observed_fraction": 0.05, "replicates": 4, "seed": 7}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ScenarioConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.mi.m, 25);
        assert_eq!(cfg.mi.iterations, 15);
        assert_eq!(cfg.mi.method, ScenarioMethod::Glm);
        assert_eq!(cfg.masking, MaskMode::RowJoint);
        assert_eq!(cfg.truth_mode, TruthMode::Generating);
        assert!(cfg.parallelism.is_none());
        assert!(cfg.resolved().parallelism.unwrap() >= 1);
    }

    #[test]
    fn zero_fraction_names_field() {
        let err = ScenarioConfig::from_json(&MINIMAL.replace("0.05", "0")).unwrap_err();
        assert!(matches!(&err, Error::Config { field, .. } if field == "observed_fraction"), "{err}");
    }

    #[test]
    fn method_compatibility() {
        let tte = MINIMAL.replace("\"binary\"", "\"tte\"").replace("\"seed\": 7", "\"seed\": 7, \"mi\": {\"method\": \"nelson-aalen\"}");
        let cfg = ScenarioConfig::from_json(&tte).unwrap();
        assert_eq!(cfg.imputation_models(), (ModelFamily::Glm, TtePredictor::NelsonAalen));
        let bin = tte.replace("\"tte\"", "\"binary\"");
        assert!(matches!(ScenarioConfig::from_json(&bin), Err(Error::Config { .. })));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ScenarioConfig::from_json(&MINIMAL.replace("\"seed\"", "\"sede\": 1, \"seed\"")).is_err());
        let nested = MINIMAL.replace("\"seed\": 7", "\"seed\": 7, \"mi\": {\"mm\": 3}");
        assert!(ScenarioConfig::from_json(&nested).is_err());
    }

    #[test]
    fn selection_syntax() {
        let cfg = ScenarioConfig::from_json(
            &MINIMAL.replace("\"seed\": 7", "\"seed\": 7, \"mi\": {\"predictor_selection\": {\"kendall-tau\": 0.05}}"),
        )
        .unwrap();
        assert_eq!(cfg.mi.predictor_selection, PredictorSelection::KendallTau(0.05));
    }

    #[test]
    fn desk_preset() {
        let mut cfg = ScenarioConfig::from_json(MINIMAL).unwrap();
        cfg.apply_desk_preset();
        assert_eq!((cfg.n, cfg.replicates, cfg.mi.m, cfg.mi.iterations), (20_000, 50, 10, 10));
    }
}
