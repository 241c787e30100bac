use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use super::records::{report_from_records, write_records, CoefficientRecord, RecordWriter, ReplicateRecord};
use super::{OutcomeKind, ScenarioConfig, TruthMode};
use crate::data::{complete_rows, mask_cells_with, Dataset};
use crate::error::{Error, Result};
use crate::estimators::{fit_logistic, fit_weibull_lt, DesignMatrix, FitResult};
use crate::impute::{fcs_impute, ImputationConfig, TraceStats};
use crate::pooling::{pool_rubin, MetricsReport};
use crate::rng::{tags, RngStream};
use crate::simgen::{
    gen_binary_outcome, gen_covariates, gen_tte_outcome, BinaryOutcomeParams, WeibullParams, ANALYSIS_COVARIATES,
    ENTRY, EVENT, EXIT, SURVEY_COVARIATES, Y,
};

pub struct ReplicateOutput {
    pub record: ReplicateRecord,
    pub trace: Option<TraceStats>,
    pub seconds: f64,
}

pub struct ScenarioOutput {
    /// Sorted by replicate index.
    pub records: Vec<ReplicateRecord>,
    pub report: MetricsReport,
    /// Trace statistics of replicate 1, when it got as far as imputing.
    pub trace: Option<TraceStats>,
    pub timings: Vec<(usize, f64)>,
}

impl ScenarioOutput {
    pub fn success_fraction(&self) -> f64 {
        let ok = self.records.iter().filter(|r| r.is_ok()).count();
        ok as f64 / self.records.len().max(1) as f64
    }
}

/// Generating values keyed by analysis-model label.
pub fn generating_truth(outcome: OutcomeKind) -> BTreeMap<String, f64> {
    match outcome {
        OutcomeKind::Binary => BinaryOutcomeParams::default().truth().into_iter().collect(),
        OutcomeKind::Tte => WeibullParams::default().truth().into_iter().collect(),
    }
}

/// The full and the masked dataset of replicate `k`.
pub fn generate_replicate(config: &ScenarioConfig, k: usize) -> Result<(Dataset, Dataset)> {
    let root = RngStream::new(config.seed, k as u64);
    let cov = gen_covariates(config.n, &mut root.child(tags::COVARIATES))?;
    let mut out_rng = root.child(tags::OUTCOME);
    let full = match config.outcome {
        OutcomeKind::Binary => gen_binary_outcome(&cov, &BinaryOutcomeParams::default(), &mut out_rng)?,
        OutcomeKind::Tte => gen_tte_outcome(&cov, &WeibullParams::default(), &mut out_rng)?,
    };
    let masked = mask_cells_with(
        &full,
        &SURVEY_COVARIATES,
        config.observed_fraction,
        config.masking,
        &mut root.child(tags::MASK),
    )?;
    Ok((full, masked))
}

/// Logistic model for `y` or left-truncated Weibull model for `(xt, t, delta)`
/// on `x1..x5`; `ds` must be fully observed in those columns.
pub fn fit_analysis(ds: &Dataset, outcome: OutcomeKind) -> Result<FitResult> {
    match outcome {
        OutcomeKind::Binary => {
            let x = DesignMatrix::from_dataset(ds, &ANALYSIS_COVARIATES, true)?;
            fit_logistic(&x, ds.column(Y)?.complete_values()?)
        }
        OutcomeKind::Tte => {
            let x = DesignMatrix::from_dataset(ds, &ANALYSIS_COVARIATES, false)?;
            fit_weibull_lt(
                &x,
                ds.column(ENTRY)?.complete_values()?,
                ds.column(EXIT)?.complete_values()?,
                ds.column(EVENT)?.complete_values()?,
            )
        }
    }
}

/// The imputation setup `config` implies for the masked replicate `masked`.
pub fn imputation_config(config: &ScenarioConfig, masked: &Dataset) -> Result<ImputationConfig> {
    let (family, tte) = config.imputation_models();
    let mut ic = ImputationConfig::auto(masked, family, tte, config.mi.m, config.mi.iterations)?;
    ic.predictor_selection = config.mi.predictor_selection;
    ic.cart = config.mi.cart;
    if config.outcome == OutcomeKind::Binary {
        ic.outcome = Some(Y.to_string());
    }
    Ok(ic)
}

/// Runs replicate `k` (1-based). Failures are captured in the record.
pub fn run_replicate(config: &ScenarioConfig, k: usize, keep_trace: bool) -> ReplicateOutput {
    let start = Instant::now();
    let mut trace = None;
    let record = replicate_inner(config, k, keep_trace, &mut trace);
    ReplicateOutput {
        record,
        trace,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn replicate_inner(config: &ScenarioConfig, k: usize, keep_trace: bool, trace: &mut Option<TraceStats>) -> ReplicateRecord {
    let (full, masked) = match generate_replicate(config, k) {
        Ok(d) => d,
        Err(e) => return ReplicateRecord::failed(k, "generate", &e),
    };
    let cca = match fit_analysis(&complete_rows(&masked), config.outcome) {
        Ok(f) => f,
        Err(e) => return ReplicateRecord::failed(k, "cca", &e),
    };
    let root = RngStream::new(config.seed, k as u64);
    let (mi_est, mi_se, mi_imputed) = if masked.n_missing() == 0 {
        (cca.coefficients.clone(), cca.standard_errors.clone(), false)
    } else {
        let pooled = imputation_config(config, &masked)
            .and_then(|ic| fcs_impute(&masked, &ic, &root.child(tags::IMPUTE)))
            .and_then(|(imps, tr)| {
                if keep_trace {
                    *trace = Some(tr);
                }
                let fits = imps
                    .iter()
                    .map(|d| fit_analysis(d, config.outcome))
                    .collect::<Result<Vec<_>>>()?;
                pool_rubin(&fits)
            });
        match pooled {
            Ok(p) if p.labels == cca.labels => (p.estimates, p.standard_errors, true),
            Ok(_) => {
                let e = Error::InvalidArgument("MI and CCA coefficient labels differ".into());
                return ReplicateRecord::failed(k, "mi", &e);
            }
            Err(e) => return ReplicateRecord::failed(k, "mi", &e),
        }
    };
    let truth: Vec<f64> = match config.truth_mode {
        TruthMode::Generating => {
            let t = generating_truth(config.outcome);
            cca.labels.iter().map(|l| t[l]).collect()
        }
        TruthMode::FullData => match fit_analysis(&full, config.outcome) {
            Ok(f) => f.coefficients,
            Err(e) => return ReplicateRecord::failed(k, "truth", &e),
        },
    };
    let coefs = cca
        .labels
        .iter()
        .enumerate()
        .map(|(j, label)| CoefficientRecord {
            label: label.clone(),
            truth: truth[j],
            cca_estimate: cca.coefficients[j],
            cca_se: cca.standard_errors[j],
            mi_estimate: mi_est[j],
            mi_se: mi_se[j],
        })
        .collect();
    ReplicateRecord {
        replicate: k,
        result: Ok(coefs),
        cca_converged: cca.converged,
        mi_converged: true,
        mi_imputed,
    }
}

struct Sinks {
    records: RecordWriter<File>,
    timings: File,
}

fn with_pool<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
        Ok(pool.install(f))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        Ok(f())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs all replicates. With `out`, records are appended to
/// `out/records.csv` as they finish and every artifact is written at the end.
pub fn run_scenario(config: &ScenarioConfig, out: Option<&Path>) -> Result<ScenarioOutput> {
    config.validate()?;
    let config = config.clone().resolved();
    let workers = config.parallelism.unwrap_or(1);
    let sinks = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            write_atomic(
                &dir.join("config_resolved.json"),
                (serde_json::to_string_pretty(&config)? + "\n").as_bytes(),
            )?;
            let mut timings = File::create(dir.join("timings.csv"))?;
            writeln!(timings, "replicate,seconds")?;
            Some(Mutex::new(Sinks {
                records: RecordWriter::new(File::create(dir.join("records.csv"))?),
                timings,
            }))
        }
        None => None,
    };
    let reps: Vec<usize> = (1..=config.replicates).collect();
    let outputs: Vec<Result<ReplicateOutput>> = with_pool(workers, || {
        crate::par_map(&reps, |&k| {
            let o = run_replicate(&config, k, k == 1);
            if let Some(s) = &sinks {
                let mut s = s.lock().unwrap_or_else(|p| p.into_inner());
                s.records.append(&o.record)?;
                writeln!(s.timings, "{k},{}", o.seconds)?;
            }
            Ok(o)
        })
    })?;
    let mut records = Vec::with_capacity(outputs.len());
    let mut timings = Vec::with_capacity(outputs.len());
    let mut trace = None;
    for o in outputs {
        let o = o?;
        timings.push((o.record.replicate, o.seconds));
        if o.trace.is_some() {
            trace = o.trace;
        }
        records.push(o.record);
    }
    let report = report_from_records(&records, None)?;
    if let Some(dir) = out {
        drop(sinks);
        let mut buf = Vec::new();
        write_records(&records, &mut buf)?;
        write_atomic(&dir.join("records.csv"), &buf)?;
        let mut t = String::from("replicate,seconds\n");
        for (k, s) in &timings {
            t.push_str(&format!("{k},{s}\n"));
        }
        write_atomic(&dir.join("timings.csv"), t.as_bytes())?;
        write_atomic(&dir.join("metrics.json"), report.to_json()?.as_bytes())?;
        let mut csv_buf = Vec::new();
        report.write_csv(&mut csv_buf)?;
        write_atomic(&dir.join("metrics.csv"), &csv_buf)?;
        let mut trace_buf = Vec::new();
        trace.clone().unwrap_or_default().write_csv(&mut trace_buf)?;
        write_atomic(&dir.join("trace_rep1.csv"), &trace_buf)?;
        write_atomic(
            &dir.join("truth.json"),
            (serde_json::to_string_pretty(&generating_truth(config.outcome))? + "\n").as_bytes(),
        )?;
    }
    Ok(ScenarioOutput {
        records,
        report,
        trace,
        timings,
    })
}
