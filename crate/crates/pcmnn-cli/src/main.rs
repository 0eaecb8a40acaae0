//! Command-line driver for the pest-dynamics modeling pipeline.
//!
//! Subcommands: `preprocess`, `prefit`, `train`, `verify`, `forecast`,
//! `evaluate`, `synth`. Each writes its outputs plus a `manifest.txt`
//! (config snapshot, seed, version, input checksums) into the run directory.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
//! Every failure also prints one machine-parsable line on stderr:
//! `error kind=<usage|data|numeric> msg="..."`.

mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use manifest::Manifest;
use pcmnn::evaluate::{forecast, metrics, verify_backsolve, MetricsLabel};
use pcmnn::ingest::{composite, load_csv, window, DailyRecord};
use pcmnn::pinn::{extract_alpha, fitted_series, load_checkpoint, save_checkpoint, train};
use pcmnn::prefit::{fit_logistic_with, to_params, X0Mode};
use pcmnn::report;
use pcmnn::synth::{generate, Scenario};
use pcmnn::Error;

#[derive(Parser)]
#[command(
    name = "pcmnn",
    version,
    about = "Climate-coupled pest population modeling: preprocessing, training, verification, forecasting"
)]
struct Cli {
    /// Flat key=value config file applied before flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for run artifacts.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,

    /// RNG seed (flag > PCMNN_SEED env > config file > default).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TrainOpts {
    /// Composite series CSV (day_index,date,population,temp_c,rh_pct).
    #[arg(long)]
    composite: PathBuf,
    /// Optimizer iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Number of ODE collocation points.
    #[arg(long)]
    n_colloc: Option<usize>,
    /// Data-loss weight.
    #[arg(long)]
    lambda_data: Option<f64>,
    /// ODE-loss weight.
    #[arg(long)]
    lambda_ode: Option<f64>,
    /// Train only on the first N days of the series.
    #[arg(long)]
    train_days: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Load raw monitoring CSVs, window and composite them across years.
    Preprocess {
        /// Raw CSV files (year,month,day,male_count,temp_c,rh_pct).
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        /// Years to composite, e.g. 2020-2023 or 2020,2021,2022.
        #[arg(long)]
        years: String,
    },
    /// Nonlinear least-squares fit of the logistic parameters A and B.
    Prefit {
        #[arg(long)]
        composite: PathBuf,
        /// Pin the initial value to the first observation instead of fitting it.
        #[arg(long)]
        fixed_x0: bool,
    },
    /// Train the joint state/modulation networks.
    Train(TrainOpts),
    /// Re-integrate the model with the inferred modulation and score it.
    Verify {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        composite: PathBuf,
    },
    /// Integrate forward from an initial value over supplied future climate.
    Forecast {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Future climate CSV (t_day,temp_c,rh_pct).
        #[arg(long)]
        climate: PathBuf,
        /// Observed population on the forecast's first day.
        #[arg(long)]
        x0: f64,
        /// Days to integrate.
        #[arg(long)]
        horizon: usize,
        /// Day the forecast starts from (default: start of the training window).
        #[arg(long)]
        start_day: Option<f64>,
    },
    /// Metrics between two trajectory CSVs.
    Evaluate {
        /// Reference trajectory CSV (t_day,population).
        #[arg(long)]
        truth: PathBuf,
        /// Predicted trajectory CSV (t_day,population).
        #[arg(long)]
        pred: PathBuf,
        /// Row label: fit, back-solve or forecast.
        #[arg(long, default_value = "fit")]
        label: String,
    },
    /// Generate a synthetic dataset with known ground truth.
    Synth {
        /// Scenario description file (key = value).
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, kind) = classify(&e);
            eprintln!("error kind={kind} msg={:?}", e.to_string());
            ExitCode::from(code)
        }
    }
}

fn classify(e: &Error) -> (u8, &'static str) {
    match e {
        Error::Config(_) => (1, "usage"),
        Error::NonFinite { .. } | Error::Blowup { .. } => (3, "numeric"),
        _ => (2, "data"),
    }
}

fn run(cli: Cli) -> pcmnn::Result<()> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    cfg.apply_env()?;
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }

    std::fs::create_dir_all(&cli.out)?;
    let out = cli.out.clone();

    match &cli.command {
        Command::Preprocess { input, years } => cmd_preprocess(&out, &cfg, input, years),
        Command::Prefit { composite, fixed_x0 } => cmd_prefit(&out, &cfg, composite, *fixed_x0),
        Command::Train(opts) => cmd_train(&out, cfg, opts),
        Command::Verify { checkpoint, composite } => cmd_verify(&out, &cfg, checkpoint, composite),
        Command::Forecast {
            checkpoint,
            climate,
            x0,
            horizon,
            start_day,
        } => cmd_forecast(&out, &cfg, checkpoint, climate, *x0, *horizon, *start_day),
        Command::Evaluate { truth, pred, label } => cmd_evaluate(&out, &cfg, truth, pred, label),
        Command::Synth { scenario } => cmd_synth(&out, &cfg, scenario),
    }
}

fn parse_years(spec: &str) -> pcmnn::Result<Vec<i32>> {
    let spec = spec.trim();
    if let Some((a, b)) = spec.split_once('-') {
        let lo: i32 = a.trim().parse().map_err(|_| Error::config(format!("bad year `{a}`")))?;
        let hi: i32 = b.trim().parse().map_err(|_| Error::config(format!("bad year `{b}`")))?;
        if hi < lo {
            return Err(Error::config(format!("empty year range {lo}-{hi}")));
        }
        return Ok((lo..=hi).collect());
    }
    spec.split(',')
        .map(|y| {
            y.trim()
                .parse::<i32>()
                .map_err(|_| Error::config(format!("bad year `{y}`")))
        })
        .collect()
}

fn cmd_preprocess(out: &Path, cfg: &RunConfig, inputs: &[PathBuf], years: &str) -> pcmnn::Result<()> {
    let years = parse_years(years)?;
    let mut manifest = Manifest::new("preprocess");
    let mut records: Vec<DailyRecord> = Vec::new();
    for path in inputs {
        manifest.input(path)?;
        records.extend(load_csv(path)?);
    }
    let windowed = window(&records)?;
    let series = composite(&windowed, &years)?;
    report::write_composite_csv(out.join("composite.csv"), &series)?;
    manifest.note("records_loaded", records.len());
    manifest.note("records_in_window", windowed.len());
    manifest.note("years", years.iter().map(|y| y.to_string()).collect::<Vec<_>>().join(","));
    manifest.write(out, cfg)?;
    println!("composite written: {} days over {} years", series.len(), series.n_years);
    Ok(())
}

fn cmd_prefit(out: &Path, cfg: &RunConfig, composite_path: &Path, fixed_x0: bool) -> pcmnn::Result<()> {
    let mut manifest = Manifest::new("prefit");
    manifest.input(composite_path)?;
    let series = report::read_composite_csv(composite_path)?;
    let mode = if fixed_x0 { X0Mode::FixedFirstObservation } else { X0Mode::Free };
    let fit = fit_logistic_with(&series, (cfg.prefit_day_start, cfg.prefit_day_end), mode)?;

    std::fs::write(out.join("prefit.txt"), report::prefit_text(&fit))?;
    report::write_prefit_csv(out.join("prefit.csv"), &fit)?;

    // fitted curve over the full series for plotting
    let params = to_params(&fit, &cfg.params)?;
    let rows: Vec<(f64, f64, f64)> = series
        .day_index
        .iter()
        .zip(&series.population)
        .map(|(&d, &x_obs)| {
            let t = (d as f64) - cfg.prefit_day_start as f64;
            let x_fit = pcmnn::dynamics::logistic_closed_form(&params, fit.x0_hat, t)?;
            Ok((d as f64, x_obs, x_fit))
        })
        .collect::<pcmnn::Result<_>>()?;
    report::write_fit_csv(out.join("prefit_curve.csv"), &rows)?;

    manifest.note("converged", fit.converged);
    manifest.write(out, cfg)?;
    print!("{}", report::prefit_text(&fit));
    Ok(())
}

fn cmd_train(out: &Path, mut cfg: RunConfig, opts: &TrainOpts) -> pcmnn::Result<()> {
    if let Some(v) = opts.iterations {
        cfg.train.iterations = v;
    }
    if let Some(v) = opts.learning_rate {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = opts.n_colloc {
        cfg.train.n_colloc = v;
    }
    if let Some(v) = opts.lambda_data {
        cfg.train.lambda_data = v;
    }
    if let Some(v) = opts.lambda_ode {
        cfg.train.lambda_ode = v;
    }
    cfg.validate()?;

    let mut manifest = Manifest::new("train");
    manifest.input(&opts.composite)?;
    let mut series = report::read_composite_csv(&opts.composite)?;
    if let Some(days) = opts.train_days {
        if days < 2 || days > series.len() {
            return Err(Error::config(format!(
                "train_days must be within 2..={}, got {days}",
                series.len()
            )));
        }
        series = series.prefix(days);
    }

    let state = train(&series, &cfg.params, &cfg.train)?;

    save_checkpoint(&state, out.join("checkpoint.txt"))?;
    report::write_loss_history_csv(out.join("loss_history.csv"), &state.loss_history)?;
    report::write_fit_csv(out.join("fit.csv"), &fitted_series(&state, &series)?)?;
    let climate = series.climate()?;
    let grid: Vec<f64> = series.day_index.iter().map(|&d| d as f64).collect();
    let alpha = extract_alpha(&state, &climate, &grid)?;
    report::write_alpha_csv(out.join("alpha.csv"), &alpha)?;

    manifest.note("final_loss", state.loss_history.last().map(|r| r.total).unwrap_or(f64::NAN));
    manifest.note("converged", state.converged);
    manifest.write(out, &cfg)?;
    let last = state.loss_history.last().unwrap();
    println!(
        "trained {} iterations: loss_data = {}, loss_ode = {}, total = {}",
        state.iteration, last.loss_data, last.loss_ode, last.total
    );
    Ok(())
}

fn cmd_verify(out: &Path, cfg: &RunConfig, checkpoint: &Path, composite_path: &Path) -> pcmnn::Result<()> {
    let mut manifest = Manifest::new("verify");
    manifest.input(checkpoint)?;
    manifest.input(composite_path)?;
    let state = load_checkpoint(checkpoint)?;
    let series = report::read_composite_csv(composite_path)?;
    let result = verify_backsolve(&state, &series, cfg.rk4_step)?;

    report::write_trajectory_csv(out.join("backsolve.csv"), &result.trajectory)?;
    report::write_metrics_csv(out.join("metrics_backsolve.csv"), &[result.metrics])?;
    manifest.write(out, cfg)?;
    print!("{}", report::metrics_table(&[result.metrics]));
    Ok(())
}

fn cmd_forecast(
    out: &Path,
    cfg: &RunConfig,
    checkpoint: &Path,
    climate_path: &Path,
    x0: f64,
    horizon: usize,
) -> pcmnn::Result<()> {
    let mut manifest = Manifest::new("forecast");
    manifest.input(checkpoint)?;
    manifest.input(climate_path)?;
    let state = load_checkpoint(checkpoint)?;
    let climate = report::read_climate_csv(climate_path)?;
    let traj = forecast(&state, x0, &climate, horizon, cfg.rk4_step)?;
    report::write_trajectory_csv(out.join("forecast.csv"), &traj)?;
    manifest.note("horizon_days", horizon);
    manifest.write(out, cfg)?;
    println!("forecast written: {} daily points", traj.t_days.len());
    Ok(())
}

fn cmd_evaluate(out: &Path, cfg: &RunConfig, truth: &Path, pred: &Path, label: &str) -> pcmnn::Result<()> {
    let label = match label {
        "fit" => MetricsLabel::Fit,
        "back-solve" => MetricsLabel::BackSolve,
        "forecast" => MetricsLabel::Forecast,
        other => {
            return Err(Error::config(format!(
                "label must be fit, back-solve or forecast, got `{other}`"
            )))
        }
    };
    let mut manifest = Manifest::new("evaluate");
    manifest.input(truth)?;
    manifest.input(pred)?;
    let t = report::read_trajectory_csv(truth)?;
    let p = report::read_trajectory_csv(pred)?;
    let m = metrics(label, &t.population, &p.population)?;
    report::write_metrics_csv(out.join("metrics.csv"), &[m])?;
    manifest.write(out, cfg)?;
    print!("{}", report::metrics_table(&[m]));
    Ok(())
}

fn cmd_synth(out: &Path, cfg: &RunConfig, scenario_path: &Path) -> pcmnn::Result<()> {
    let mut manifest = Manifest::new("synth");
    manifest.input(scenario_path)?;
    let scenario = Scenario::from_file(scenario_path)?;
    let data = generate(&scenario)?;
    report::write_composite_csv(out.join("composite.csv"), &data.series)?;
    report::write_truth_csv(out.join("truth.csv"), &data)?;
    report::write_climate_csv(out.join("climate.csv"), &data.climate)?;
    report::write_raw_csv(out.join("raw.csv"), &data.series, 2021)?;
    manifest.note("days", scenario.days);
    manifest.note("scenario_seed", scenario.seed);
    manifest.write(out, cfg)?;
    println!("synthetic dataset written: {} days", scenario.days);
    Ok(())
}
