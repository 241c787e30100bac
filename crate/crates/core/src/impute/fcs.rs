use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cart::impute_cart;
use super::draws::{impute_logistic, impute_multinomial, impute_norm, n_levels};
use super::predictors::{derived_tte_column, select_predictors};
use super::{ImputationConfig, Method, PredictorSelection, TtePredictor, CART_MIN_OBSERVED};
use crate::data::{Column, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::estimators::{DesignInput, DesignMatrix};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// 1-based chain index.
    pub chain: usize,
    /// 1-based sweep index.
    pub iteration: usize,
    pub column: String,
    pub mean: f64,
    pub sd: f64,
}

/// Mean and standard deviation of the imputed cells of each target after
/// every sweep of every chain.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceStats {
    pub entries: Vec<TraceEntry>,
}

impl TraceStats {
    pub fn get(&self, chain: usize, iteration: usize, column: &str) -> Option<&TraceEntry> {
        self.entries
            .iter()
            .find(|e| e.chain == chain && e.iteration == iteration && e.column == column)
    }

    /// Long format: `chain,iteration,column,mean,sd`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        if self.entries.is_empty() {
            w.write_record(["chain", "iteration", "column", "mean", "sd"])?;
        }
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let entries = r.deserialize().collect::<std::result::Result<_, _>>()?;
        Ok(TraceStats { entries })
    }
}

/// Writes `<stem>_imp<j>.csv` for `j = 1..=m` into `dir`.
pub fn write_imputations(datasets: &[Dataset], dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    datasets
        .iter()
        .enumerate()
        .map(|(j, ds)| {
            let path = dir.join(format!("{stem}_imp{}.csv", j + 1));
            ds.write_csv(std::fs::File::create(&path)?)?;
            Ok(path)
        })
        .collect()
}

/// A resolved conditional model.
struct Plan {
    target: usize,
    method: Method,
    kind: ColumnKind,
    predictors: Vec<usize>,
    observed: Vec<usize>,
    missing: Vec<usize>,
}

struct Survival {
    entry: Option<String>,
    exit: String,
    event: String,
}

fn find_survival(ds: &Dataset) -> Option<Survival> {
    let by_kind = |k: ColumnKind| ds.columns().iter().find(|c| *c.kind() == k).map(|c| c.name().to_string());
    Some(Survival {
        entry: by_kind(ColumnKind::EntryTime),
        exit: by_kind(ColumnKind::EventTime)?,
        event: by_kind(ColumnKind::EventIndicator)?,
    })
}

/// Runs `config.m` independent chains and returns the completed datasets
/// together with per-sweep trace statistics.
pub fn fcs_impute(ds: &Dataset, config: &ImputationConfig, rng: &RngStream) -> Result<(Vec<Dataset>, TraceStats)> {
    if ds.n_missing() == 0 {
        return Err(Error::NothingToImpute);
    }
    config.validate(ds)?;
    for col in ds.columns().iter().filter(|c| c.n_missing() > 0) {
        if !config.specs.iter().any(|s| s.target == col.name()) {
            return Err(Error::InvalidArgument(format!(
                "incomplete column `{}` has no imputation model",
                col.name()
            )));
        }
    }

    let (work, survival) = augment(ds, config)?;
    let plans = resolve(&work, config, survival.as_ref())?;

    let chains: Vec<usize> = (0..config.m).collect();
    let results = crate::par_map(&chains, |&c| run_chain(&work, &plans, config, c, rng.child(c as u64)));
    let mut imputations = Vec::with_capacity(config.m);
    let mut trace = TraceStats::default();
    for r in results {
        let (state, entries) = r?;
        trace.entries.extend(entries);
        let columns = ds
            .columns()
            .iter()
            .enumerate()
            .map(|(j, col)| {
                if col.n_missing() == 0 {
                    Ok(col.clone())
                } else {
                    Column::from_parts(col.name(), col.kind().clone(), state[j].clone(), vec![true; col.len()])
                }
            })
            .collect::<Result<Vec<_>>>()?;
        imputations.push(Dataset::new(columns)?);
    }
    trace.entries.sort_by_key(|e| e.chain);
    Ok((imputations, trace))
}

/// Appends the derived survival predictors the plans need.
fn augment(ds: &Dataset, config: &ImputationConfig) -> Result<(Dataset, Option<Survival>)> {
    let Some(surv) = find_survival(ds) else {
        return Ok((ds.clone(), None));
    };
    let exit = ds.column(&surv.exit)?.complete_values()?.to_vec();
    let delta = ds.column(&surv.event)?.complete_values()?.to_vec();
    let entry = match &surv.entry {
        Some(e) => ds.column(e)?.complete_values()?.to_vec(),
        None => vec![0.0; exit.len()],
    };
    let mut choices: Vec<TtePredictor> = config.specs.iter().map(|s| s.tte_predictor).collect();
    if matches!(config.predictor_selection, PredictorSelection::KendallTau(_)) {
        choices.push(TtePredictor::NelsonAalen);
    }
    let mut work = ds.clone();
    for choice in choices {
        if let Some(name) = choice.column_name() {
            if !work.has_column(name) {
                let col = derived_tte_column(&entry, &exit, &delta, choice)?.expect("named predictor");
                work = work.with_column(col)?;
            }
        }
    }
    Ok((work, Some(surv)))
}

fn resolve(work: &Dataset, config: &ImputationConfig, survival: Option<&Survival>) -> Result<Vec<Plan>> {
    let mut plans = Vec::new();
    for spec in &config.specs {
        let target = work.column_index(&spec.target)?;
        let col = &work.columns()[target];
        if col.n_missing() == 0 {
            continue;
        }
        let mut names = spec.predictors.clone();
        if survival.is_some() {
            if let Some(d) = spec.tte_predictor.column_name() {
                if !names.iter().any(|n| n == d) {
                    names.push(d.to_string());
                }
            }
        }
        if let PredictorSelection::KendallTau(threshold) = config.predictor_selection {
            let outcome_cols: Vec<String> = match survival {
                Some(s) => {
                    let mut v = vec![TtePredictor::NelsonAalen.column_name().unwrap().to_string(), s.event.clone()];
                    v.extend(s.entry.clone());
                    v.extend(spec.tte_predictor.column_name().map(str::to_string));
                    v
                }
                None => match &config.outcome {
                    Some(o) => vec![o.clone()],
                    None => {
                        return Err(Error::config(
                            "predictor_selection",
                            "Kendall-tau selection needs an outcome column",
                        ))
                    }
                },
            };
            names = select_predictors(work, &spec.target, &names, &outcome_cols, threshold)?;
        }
        let predictors = names.iter().map(|n| work.column_index(n)).collect::<Result<Vec<_>>>()?;
        let (observed, missing): (Vec<usize>, Vec<usize>) = (0..work.row_count()).partition(|&i| col.is_observed(i));
        if observed.is_empty() {
            return Err(Error::InvalidData {
                column: spec.target.clone(),
                reason: "no observed values to impute from".into(),
            });
        }
        plans.push(Plan {
            target,
            method: spec.method,
            kind: col.kind().clone(),
            predictors,
            observed,
            missing,
        });
    }
    // Increasing missingness; stable, so ties keep spec order.
    plans.sort_by_key(|p| p.missing.len());
    Ok(plans)
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

type ChainOutput = (Vec<Vec<f64>>, Vec<TraceEntry>);

fn run_chain(work: &Dataset, plans: &[Plan], config: &ImputationConfig, chain: usize, mut rng: RngStream) -> Result<ChainOutput> {
    let mut state: Vec<Vec<f64>> = work.columns().iter().map(|c| c.raw_values().to_vec()).collect();
    for plan in plans {
        let col = &mut state[plan.target];
        for &i in &plan.missing {
            col[i] = col[plan.observed[rng.random_range(0..plan.observed.len())]];
        }
    }
    let mut trace = Vec::with_capacity(plans.len() * config.iterations);
    for sweep in 1..=config.iterations {
        for plan in plans {
            let values = impute_column(work, &state, plan, config, &mut rng).map_err(|e| Error::Imputation {
                chain: chain + 1,
                sweep,
                column: work.columns()[plan.target].name().to_string(),
                source: Box::new(e),
            })?;
            if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
                return Err(Error::Imputation {
                    chain: chain + 1,
                    sweep,
                    column: work.columns()[plan.target].name().to_string(),
                    source: Box::new(Error::InvalidArgument(format!("non-finite imputed value {bad}"))),
                });
            }
            let (mean, sd) = mean_sd(&values);
            trace.push(TraceEntry {
                chain: chain + 1,
                iteration: sweep,
                column: work.columns()[plan.target].name().to_string(),
                mean,
                sd,
            });
            let col = &mut state[plan.target];
            for (&i, v) in plan.missing.iter().zip(values) {
                col[i] = v;
            }
        }
    }
    Ok((state, trace))
}

fn impute_column(
    work: &Dataset,
    state: &[Vec<f64>],
    plan: &Plan,
    config: &ImputationConfig,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let inputs: Vec<DesignInput<'_>> = plan
        .predictors
        .iter()
        .map(|&j| {
            let col = &work.columns()[j];
            DesignInput {
                name: col.name(),
                values: &state[j],
                levels: col.kind().levels(),
            }
        })
        .collect();
    let target = &state[plan.target];
    let y: Vec<f64> = plan.observed.iter().map(|&i| target[i]).collect();
    let cart = plan.method == Method::CartDonor && plan.observed.len() >= CART_MIN_OBSERVED;
    let obs = DesignMatrix::from_inputs(&inputs, Some(&plan.observed), !cart);
    let mis = DesignMatrix::from_inputs(&inputs, Some(&plan.missing), !cart);
    let levels = n_levels(&plan.kind);
    if cart {
        return impute_cart(&obs, &y, (levels > 0).then_some(levels), &mis, rng, config.cart);
    }
    let method = match plan.method {
        Method::CartDonor => Method::glm_for(&plan.kind)?,
        m => m,
    };
    match method {
        Method::NormDraw => impute_norm(&obs, &y, &mis, rng),
        Method::LogisticDraw => impute_logistic(&obs, &y, &mis, rng),
        Method::MultinomialDraw => impute_multinomial(&obs, &y, levels, &mis, rng),
        Method::CartDonor => unreachable!(),
    }
}
