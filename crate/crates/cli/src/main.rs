use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use augmi::scenario::{parse_config, read_records, report_from_records, run_scenario, ScenarioOutput};
use augmi::{Error, Result};
use clap::{Parser, Subcommand, ValueEnum};

/// Replicates that must succeed for a zero exit status.
const SUCCESS_THRESHOLD: f64 = 0.95;

#[derive(Parser)]
#[command(name = "augmi", version, about = "Complete-case vs multiple-imputation simulation runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// n = 20,000, 50 replicates, m = 10, 10 sweeps
    Desk,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write records, metrics and traces.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (overrides AUGMI_WORKERS and the config).
        #[arg(long, env = "AUGMI_WORKERS")]
        workers: Option<usize>,
    },
    /// Recompute metrics from a records file.
    Metrics {
        #[arg(long)]
        records: PathBuf,
        /// JSON object of coefficient label to true value. Without it the
        /// truth stored in each record is used.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Write metrics.json and metrics.csv here instead of printing JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_summary(out: &ScenarioOutput) {
    let r = &out.report;
    println!("replicates ok: {}  failed: {}", r.replicates, r.failed);
    println!("{:<14} {:>8} {:>10} {:>10} {:>10} {:>10}", "coefficient", "d(MI)", "MAE cca", "MAE mi", "RMSE cca", "RMSE mi");
    for (label, m) in &r.metrics {
        println!(
            "{:<14} {:>8.3} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
            label, m.mi.d, m.cca.mae, m.mi.mae, m.cca.rmse, m.mi.rmse
        );
    }
}

fn simulate(config: &Path, preset: Option<Preset>, out: Option<PathBuf>, workers: Option<usize>) -> Result<bool> {
    let mut cfg = parse_config(config)?;
    if let Some(Preset::Desk) = preset {
        cfg.apply_desk_preset();
    }
    if let Some(w) = workers {
        cfg.parallelism = Some(w);
    }
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    let result = run_scenario(&cfg, Some(&dir))?;
    print_summary(&result);
    let ok = result.success_fraction() >= SUCCESS_THRESHOLD;
    if !ok {
        eprintln!(
            "only {:.1}% of replicates succeeded; see {}",
            100.0 * result.success_fraction(),
            dir.join("records.csv").display()
        );
    }
    Ok(ok)
}

fn metrics(records: &Path, truth: Option<&Path>, out: Option<&Path>) -> Result<bool> {
    let recs = read_records(File::open(records)?)?;
    let truth: Option<BTreeMap<String, f64>> = match truth {
        Some(p) => Some(serde_json::from_reader(File::open(p)?)?),
        None => None,
    };
    let report = report_from_records(&recs, truth.as_ref())?;
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("metrics.json"), report.to_json()?)?;
            report.write_csv(File::create(dir.join("metrics.csv"))?)?;
        }
        None => print!("{}", report.to_json()?),
    }
    let total = recs.len().max(1) as f64;
    Ok(report.replicates as f64 / total >= SUCCESS_THRESHOLD)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate {
            config,
            preset,
            out,
            workers,
        } => simulate(&config, preset, out, workers),
        Command::Metrics { records, truth, out } => metrics(&records, truth.as_deref(), out.as_deref()),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } | Error::Json(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
