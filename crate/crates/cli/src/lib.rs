//! Command-line front end for `covdet-core` experiments.
//!
//! Each subcommand reads a config file, runs one experiment and writes a CSV
//! plus a manifest into the output directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use covdet_core::experiment::{self, ExperimentPlan, SnrPoint};
use covdet_core::ProjectionKind;

pub use config::{echo_config, parse_config, parse_config_str};
pub use error::CliError;
use output::{RunManifest, Table};

/// Named value lists that shaped a run, recorded in the manifest.
pub type Grids = Vec<(String, Vec<f64>)>;

/// Environment variable capping worker threads (0 = one per core).
pub const WORKERS_ENV: &str = "COVDET_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "covdet",
    version,
    about = "Detection of correlated events from MAC-compressed sensor data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Covariance-ratio threshold at each effective noise power
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Effective noise powers in dB
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            default_value = "-10,-5,0,5,10"
        )]
        noise_db: Vec<f64>,
    },
    /// ROC curve of the covariance detector
    Roc {
        #[command(flatten)]
        common: Common,
    },
    /// False-alarm and detection rates of every configured detector
    Rates {
        #[command(flatten)]
        common: Common,
    },
    /// Rates over a grid of SNR values, varying the sensor noise power
    SweepSnr {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        snr: SnrGrid,
    },
    /// Covariance detection rate over SNR for several projection sparsities
    SweepSparsity {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        snr: SnrGrid,
        /// Sparsity parameters (default: 1, sqrt(L), L)
        #[arg(long, value_delimiter = ',')]
        s0: Option<Vec<f64>>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config file
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed in the config
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads; overrides COVDET_WORKERS (0 = one per core)
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SnrGrid {
    /// SNR grid in dB
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "-6,-4,-2,0,2"
    )]
    pub snr_db: Vec<f64>,
    /// Sensor noise power used to calibrate the covariance threshold
    #[arg(long, default_value_t = 0.5)]
    pub reference_sigma_v2: f64,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Calibrate { .. } => "calibrate",
            Command::Roc { .. } => "roc",
            Command::Rates { .. } => "rates",
            Command::SweepSnr { .. } => "sweep-snr",
            Command::SweepSparsity { .. } => "sweep-sparsity",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Calibrate { common, .. }
            | Command::Roc { common }
            | Command::Rates { common }
            | Command::SweepSnr { common, .. }
            | Command::SweepSparsity { common, .. } => common,
        }
    }
}

fn workers_from_env() -> Result<usize, CliError> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v.trim().parse().map_err(|_| CliError::BadArgument {
            flag: WORKERS_ENV,
            reason: format!("expected a non-negative integer, got `{v}`"),
        }),
    }
}

fn load_plan(common: &Common) -> Result<ExperimentPlan, CliError> {
    let mut plan = parse_config(&common.config)?;
    if let Some(seed) = common.seed {
        plan.seed = seed;
    }
    plan.workers = match common.workers {
        Some(w) => w,
        None => workers_from_env()?,
    };
    Ok(plan)
}

fn sensor_noise_grid(plan: &ExperimentPlan, snr_db: &[f64]) -> Result<Vec<f64>, CliError> {
    if snr_db.is_empty() {
        return Err(CliError::BadArgument {
            flag: "--snr-db",
            reason: "grid is empty".into(),
        });
    }
    snr_db
        .iter()
        .map(|&g| {
            experiment::sensor_noise_for_snr(&plan.scenario, g).ok_or_else(|| CliError::BadArgument {
                flag: "--snr-db",
                reason: format!("{g} dB is unreachable with sigma_s2 and sigma_w2 fixed"),
            })
        })
        .collect()
}

fn rate_rows(table: &mut Table, points: &[SnrPoint]) {
    for p in points {
        for (spec, r) in &p.report.results {
            table.push(vec![
                p.gamma0_db.into(),
                spec.label().into(),
                r.pf.into(),
                r.pd.into(),
                r.pf_halfwidth.into(),
                r.pd_halfwidth.into(),
            ]);
        }
    }
}

/// Runs the experiment for `command` and returns its result table along with
/// the grids that shaped it.
pub fn execute(command: &Command, plan: &ExperimentPlan) -> Result<(Table, Grids), CliError> {
    let mut grids = Vec::new();
    let table = match command {
        Command::Calibrate { noise_db, .. } => {
            if noise_db.is_empty() {
                return Err(CliError::BadArgument {
                    flag: "--noise-db",
                    reason: "grid is empty".into(),
                });
            }
            grids.push(("noise_db".to_string(), noise_db.clone()));
            let mut t = Table::new(&["noise_db", "tau_c"]);
            for (db, tau) in experiment::calibrate_over_noise(plan, noise_db)? {
                t.push(vec![db.into(), tau.into()]);
            }
            t
        }
        Command::Roc { .. } => {
            let roc = experiment::roc_curve(plan)?;
            let mut t = Table::new(&["pf", "pd"]);
            for &(pf, pd) in &roc.points {
                t.push(vec![pf.into(), pd.into()]);
            }
            t
        }
        Command::Rates { .. } => {
            let tau_c = experiment::calibrate_threshold(plan)?;
            let report = experiment::estimate_rates(plan, tau_c)?;
            let mut t = Table::new(&["detector", "tau", "pf", "pf_hw", "pd", "pd_hw"]);
            for (spec, r) in &report.results {
                t.push(vec![
                    spec.label().into(),
                    r.threshold_used.into(),
                    r.pf.into(),
                    r.pf_halfwidth.into(),
                    r.pd.into(),
                    r.pd_halfwidth.into(),
                ]);
            }
            t
        }
        Command::SweepSnr { snr, .. } => {
            let grid = sensor_noise_grid(plan, &snr.snr_db)?;
            grids.push(("snr_db".to_string(), snr.snr_db.clone()));
            grids.push(("reference_sigma_v2".to_string(), vec![snr.reference_sigma_v2]));
            let points = experiment::sweep_snr(plan, &grid, snr.reference_sigma_v2)?;
            let mut t = Table::new(&["gamma0_db", "detector", "pf", "pd", "pf_hw", "pd_hw"]);
            rate_rows(&mut t, &points);
            t
        }
        Command::SweepSparsity { snr, s0, .. } => {
            let grid = sensor_noise_grid(plan, &snr.snr_db)?;
            let l = plan.scenario.num_sensors as f64;
            let s0 = s0.clone().unwrap_or_else(|| vec![1.0, l.sqrt(), l]);
            grids.push(("snr_db".to_string(), snr.snr_db.clone()));
            grids.push(("reference_sigma_v2".to_string(), vec![snr.reference_sigma_v2]));
            grids.push(("s0".to_string(), s0.clone()));
            let mut t = Table::new(&["s0", "gamma0_db", "pd", "pd_hw"]);
            for (kind, points) in experiment::sweep_sparsity(plan, &s0, &grid, snr.reference_sigma_v2)? {
                let label: output::Cell = match kind {
                    ProjectionKind::SparseTernary { s0 } => s0.into(),
                    ProjectionKind::OrthonormalRows => "orthonormal".into(),
                };
                for p in &points {
                    let r = p.report.covariance().expect("covariance detector is always configured");
                    t.push(vec![
                        label.clone(),
                        p.gamma0_db.into(),
                        r.pd.into(),
                        r.pd_halfwidth.into(),
                    ]);
                }
            }
            t
        }
    };
    Ok((table, grids))
}

fn run_command(command: &Command) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let common = command.common();
    let plan = load_plan(common)?;
    let (table, grids) = execute(command, &plan)?;

    let name = command.name();
    let csv_path = common.out_dir.join(format!("{name}.csv"));
    output::write_atomic(&csv_path, &table.to_csv())?;
    let manifest = RunManifest {
        subcommand: name.to_string(),
        seed: plan.seed,
        duration: start.elapsed(),
        outputs: vec![csv_path],
        grids,
        config_echo: echo_config(&plan),
    };
    output::write_atomic(&manifest_path(&common.out_dir, name), &manifest.render())?;
    Ok(manifest)
}

/// Location of the manifest written by subcommand `name`.
pub fn manifest_path(out_dir: &Path, name: &str) -> PathBuf {
    out_dir.join(format!("{name}.manifest.toml"))
}

/// Parses `argv` (including the program name), runs it and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run_command(&cli.command) {
        Ok(manifest) => {
            for p in &manifest.outputs {
                println!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("covdet {}: error: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
