use log::warn;

use super::TtePredictor;
use crate::data::{Column, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::estimators::{kendall_tau, nelson_aalen};

/// The derived survival predictor for `choice`, or `None` for
/// [`TtePredictor::None`].
pub fn derived_tte_column(entry: &[f64], exit: &[f64], delta: &[f64], choice: TtePredictor) -> Result<Option<Column>> {
    let Some(name) = choice.column_name() else {
        return Ok(None);
    };
    if entry.len() != exit.len() || delta.len() != exit.len() {
        return Err(Error::InvalidArgument("survival vectors differ in length".into()));
    }
    let values = match choice {
        TtePredictor::NelsonAalen => nelson_aalen(entry, exit, delta)?,
        TtePredictor::Time => entry.iter().zip(exit).map(|(e, x)| x - e).collect(),
        TtePredictor::LogTime => entry
            .iter()
            .zip(exit)
            .enumerate()
            .map(|(i, (e, x))| {
                let f = x - e;
                if f > 0.0 {
                    Ok(f.ln())
                } else {
                    Err(Error::InvalidArgument(format!("row {i}: non-positive follow-up {f}")))
                }
            })
            .collect::<Result<_>>()?,
        TtePredictor::None => unreachable!(),
    };
    Column::continuous(name, values).map(Some)
}

/// The event indicator followed by the derived predictor for `choice`.
pub fn build_tte_predictors(entry: &[f64], exit: &[f64], delta: &[f64], choice: TtePredictor) -> Result<Vec<Column>> {
    let mut out = vec![Column::of_kind("delta", ColumnKind::EventIndicator, delta.to_vec())?];
    out.extend(derived_tte_column(entry, exit, delta, choice)?);
    Ok(out)
}

/// Filters `candidates` by `|tau|` with the first of `outcome_cols`.
/// Columns listed in `outcome_cols` are always kept; order is preserved.
pub fn select_predictors(
    ds: &Dataset,
    target: &str,
    candidates: &[String],
    outcome_cols: &[String],
    threshold: f64,
) -> Result<Vec<String>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside [0, 1]")));
    }
    if threshold == 0.0 {
        return Ok(candidates.iter().filter(|c| *c != target).cloned().collect());
    }
    let reference = outcome_cols
        .first()
        .ok_or_else(|| Error::InvalidArgument("no outcome column for predictor selection".into()))?;
    let outcome = cells(ds.column(reference)?);
    let mut kept = Vec::new();
    for cand in candidates.iter().filter(|c| *c != target) {
        if outcome_cols.contains(cand) {
            kept.push(cand.clone());
            continue;
        }
        match kendall_tau(&cells(ds.column(cand)?), &outcome) {
            Ok(tau) if tau.abs() >= threshold => kept.push(cand.clone()),
            Ok(_) => {}
            Err(e) => warn!("skipping predictor `{cand}` for `{target}`: {e}"),
        }
    }
    Ok(kept)
}

fn cells(col: &Column) -> Vec<Option<f64>> {
    (0..col.len()).map(|i| col.get(i)).collect()
}
