use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pooling::{CoefficientSeries, MetricsReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub label: String,
    pub truth: f64,
    pub cca_estimate: f64,
    pub cca_se: f64,
    pub mi_estimate: f64,
    pub mi_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    /// Pipeline step that failed: `generate`, `cca`, `mi` or `truth`.
    pub stage: String,
    /// Stable error tag from [`Error::class`].
    pub class: String,
    pub message: String,
}

/// Outcome of one replicate.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateRecord {
    /// 1-based replicate index.
    pub replicate: usize,
    pub result: std::result::Result<Vec<CoefficientRecord>, Failure>,
    pub cca_converged: bool,
    pub mi_converged: bool,
    /// False when the masked data had no missing cells and MI reused the CCA fit.
    pub mi_imputed: bool,
}

impl ReplicateRecord {
    pub fn failed(replicate: usize, stage: &str, err: &Error) -> Self {
        ReplicateRecord {
            replicate,
            result: Err(Failure {
                stage: stage.to_string(),
                class: err.class().to_string(),
                message: err.to_string(),
            }),
            cca_converged: false,
            mi_converged: false,
            mi_imputed: false,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.result.is_ok()
    }

    pub fn coefficient(&self, label: &str) -> Option<&CoefficientRecord> {
        self.result.as_ref().ok()?.iter().find(|c| c.label == label)
    }
}

/// One CSV row; successful replicates take one row per coefficient.
#[derive(Debug, Serialize, Deserialize)]
struct Row {
    replicate: usize,
    status: String,
    stage: Option<String>,
    error_class: Option<String>,
    error: Option<String>,
    coefficient: Option<String>,
    truth: Option<f64>,
    cca_estimate: Option<f64>,
    cca_se: Option<f64>,
    mi_estimate: Option<f64>,
    mi_se: Option<f64>,
    cca_converged: bool,
    mi_converged: bool,
    mi_imputed: bool,
}

fn rows(r: &ReplicateRecord) -> Vec<Row> {
    let base = |status: &str| Row {
        replicate: r.replicate,
        status: status.to_string(),
        stage: None,
        error_class: None,
        error: None,
        coefficient: None,
        truth: None,
        cca_estimate: None,
        cca_se: None,
        mi_estimate: None,
        mi_se: None,
        cca_converged: r.cca_converged,
        mi_converged: r.mi_converged,
        mi_imputed: r.mi_imputed,
    };
    match &r.result {
        Ok(coefs) => coefs
            .iter()
            .map(|c| Row {
                coefficient: Some(c.label.clone()),
                truth: Some(c.truth),
                cca_estimate: Some(c.cca_estimate),
                cca_se: Some(c.cca_se),
                mi_estimate: Some(c.mi_estimate),
                mi_se: Some(c.mi_se),
                ..base("ok")
            })
            .collect(),
        Err(f) => vec![Row {
            stage: Some(f.stage.clone()),
            error_class: Some(f.class.clone()),
            error: Some(f.message.clone()),
            ..base("failed")
        }],
    }
}

/// Streams records as CSV rows; the header is written once.
pub struct RecordWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(writer: W) -> Self {
        RecordWriter {
            inner: csv::Writer::from_writer(writer),
        }
    }

    pub fn append(&mut self, record: &ReplicateRecord) -> Result<()> {
        for row in rows(record) {
            self.inner.serialize(row)?;
        }
        self.inner.flush()?;
        Ok(())
    }
}

pub fn write_records<W: Write>(records: &[ReplicateRecord], writer: W) -> Result<()> {
    let mut w = RecordWriter::new(writer);
    if records.is_empty() {
        w.inner.write_record([
            "replicate", "status", "stage", "error_class", "error", "coefficient", "truth", "cca_estimate", "cca_se",
            "mi_estimate", "mi_se", "cca_converged", "mi_converged", "mi_imputed",
        ])?;
    }
    for r in records {
        w.append(r)?;
    }
    Ok(())
}

/// Reads records written by [`write_records`], sorted by replicate.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<ReplicateRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut by_rep: BTreeMap<usize, ReplicateRecord> = BTreeMap::new();
    for row in rdr.deserialize() {
        let row: Row = row?;
        let entry = by_rep.entry(row.replicate).or_insert_with(|| ReplicateRecord {
            replicate: row.replicate,
            result: Ok(Vec::new()),
            cca_converged: row.cca_converged,
            mi_converged: row.mi_converged,
            mi_imputed: row.mi_imputed,
        });
        let bad = |what: &str| Error::InvalidData {
            column: what.to_string(),
            reason: format!("missing in ok row of replicate {}", row.replicate),
        };
        match row.status.as_str() {
            "ok" => {
                let coef = CoefficientRecord {
                    label: row.coefficient.clone().ok_or_else(|| bad("coefficient"))?,
                    truth: row.truth.ok_or_else(|| bad("truth"))?,
                    cca_estimate: row.cca_estimate.ok_or_else(|| bad("cca_estimate"))?,
                    cca_se: row.cca_se.ok_or_else(|| bad("cca_se"))?,
                    mi_estimate: row.mi_estimate.ok_or_else(|| bad("mi_estimate"))?,
                    mi_se: row.mi_se.ok_or_else(|| bad("mi_se"))?,
                };
                match &mut entry.result {
                    Ok(v) => v.push(coef),
                    Err(_) => {
                        return Err(Error::InvalidArgument(format!(
                            "replicate {} is both failed and ok",
                            row.replicate
                        )))
                    }
                }
            }
            "failed" => {
                entry.result = Err(Failure {
                    stage: row.stage.unwrap_or_default(),
                    class: row.error_class.unwrap_or_default(),
                    message: row.error.unwrap_or_default(),
                });
            }
            other => return Err(Error::InvalidArgument(format!("unknown record status `{other}`"))),
        }
    }
    Ok(by_rep.into_values().collect())
}

/// Metrics over the successful records. `truth` replaces the per-record
/// truth values when given.
pub fn report_from_records(records: &[ReplicateRecord], truth: Option<&BTreeMap<String, f64>>) -> Result<MetricsReport> {
    let ok: Vec<&Vec<CoefficientRecord>> = records.iter().filter_map(|r| r.result.as_ref().ok()).collect();
    let failed = records.len() - ok.len();
    let Some(first) = ok.first() else {
        return Ok(MetricsReport {
            replicates: 0,
            failed,
            truth: BTreeMap::new(),
            metrics: BTreeMap::new(),
        });
    };
    let mut series: Vec<CoefficientSeries> = first
        .iter()
        .map(|c| CoefficientSeries {
            label: c.label.clone(),
            ..Default::default()
        })
        .collect();
    for coefs in &ok {
        if coefs.len() != series.len() || coefs.iter().zip(&series).any(|(c, s)| c.label != s.label) {
            return Err(Error::InvalidArgument("coefficient labels differ across replicates".into()));
        }
        for (c, s) in coefs.iter().zip(series.iter_mut()) {
            let t = match truth {
                Some(map) => *map
                    .get(&c.label)
                    .ok_or_else(|| Error::InvalidArgument(format!("no truth for coefficient `{}`", c.label)))?,
                None => c.truth,
            };
            s.truth.push(t);
            s.cca.push(c.cca_estimate);
            s.mi.push(c.mi_estimate);
        }
    }
    MetricsReport::from_series(&series, failed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<ReplicateRecord> {
        let coef = |label: &str, k: f64| CoefficientRecord {
            label: label.into(),
            truth: 0.1,
            cca_estimate: 0.1 + 0.01 * k,
            cca_se: 0.02,
            mi_estimate: 0.1 - 0.003 * k,
            mi_se: 0.015,
        };
        vec![
            ReplicateRecord {
                replicate: 1,
                result: Ok(vec![coef("x3", 1.0), coef("x4", 2.0)]),
                cca_converged: true,
                mi_converged: true,
                mi_imputed: true,
            },
            ReplicateRecord::failed(2, "cca", &Error::Separation { max_abs_coef: 40.0 }),
            ReplicateRecord {
                replicate: 3,
                result: Ok(vec![coef("x3", -1.0), coef("x4", 0.1 / 3.0)]),
                cca_converged: true,
                mi_converged: true,
                mi_imputed: true,
            },
        ]
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let recs = sample();
        let mut buf = Vec::new();
        write_records(&recs, &mut buf).unwrap();
        let back = read_records(&buf[..]).unwrap();
        assert_eq!(back, recs);
        let a = report_from_records(&recs, None).unwrap();
        let b = report_from_records(&back, None).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.replicates, 2);
        assert_eq!(a.failed, 1);
    }

    #[test]
    fn truth_override() {
        let recs = sample();
        let truth: BTreeMap<String, f64> = [("x3".to_string(), 0.0), ("x4".to_string(), 0.0)].into();
        let r = report_from_records(&recs, Some(&truth)).unwrap();
        assert_eq!(r.truth["x3"], 0.0);
        let partial: BTreeMap<String, f64> = [("x3".to_string(), 0.0)].into();
        assert!(report_from_records(&recs, Some(&partial)).is_err());
    }
}
