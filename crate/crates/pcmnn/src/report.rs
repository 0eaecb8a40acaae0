//! Plot-ready CSV and plain-text output formats.
//!
//! All floats are written with Rust's shortest-roundtrip formatting, so
//! identical values produce identical bytes and a rerun with the same seed
//! yields byte-identical files.
//!
//! Formats:
//! - composite series: `day_index,date,population,temp_c,rh_pct`
//! - trajectory:       `t_day,population`
//! - fitted series:    `t_day,x_obs,x_fit`
//! - modulation:       `t_day,alpha_hat`
//! - loss history:     `iteration,loss_data,loss_ode,total`
//! - metrics:          `label,n,mse,mae,r2` (undefined R² written as `nan`)
//! - climate:          `t_day,temp_c,rh_pct`
//! - ground truth:     `t_day,x_true,alpha_true`

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dynamics::{Climate, SignDiagnostic, Trajectory};
use crate::error::{Error, Result};
use crate::ingest::CompositeSeries;
use crate::pinn::{AlphaSeries, LossRecord};
use crate::evaluate::MetricsReport;
use crate::prefit::PrefitResult;
use crate::synth::SynthData;

pub fn write_composite_csv(path: impl AsRef<Path>, series: &CompositeSeries) -> Result<()> {
    let mut out = String::from("day_index,date,population,temp_c,rh_pct\n");
    for i in 0..series.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            series.day_index[i],
            CompositeSeries::date_label(series.day_index[i]),
            series.population[i],
            series.temperature[i],
            series.humidity[i],
        );
    }
    fs::write(path, out).map_err(Error::from)
}

pub fn read_composite_csv(path: impl AsRef<Path>) -> Result<CompositeSeries> {
    let rows = read_csv(path.as_ref(), &["day_index", "date", "population", "temp_c", "rh_pct"])?;
    let mut day_index = Vec::with_capacity(rows.len());
    let mut population = Vec::with_capacity(rows.len());
    let mut temperature = Vec::with_capacity(rows.len());
    let mut humidity = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        day_index.push(parse_field::<u32>(&row[0], "day_index", line)?);
        population.push(parse_field::<f64>(&row[2], "population", line)?);
        temperature.push(parse_field::<f64>(&row[3], "temp_c", line)?);
        humidity.push(parse_field::<f64>(&row[4], "rh_pct", line)?);
    }
    // n_years is not carried by the CSV; 0 marks it unknown
    CompositeSeries::from_columns(day_index, population, temperature, humidity, 0)
}

pub fn write_trajectory_csv(path: impl AsRef<Path>, traj: &Trajectory) -> Result<()> {
    let mut out = String::from("t_day,population\n");
    for (t, x) in traj.t_days.iter().zip(&traj.population) {
        let _ = writeln!(out, "{t},{x}");
    }
    fs::write(path, out).map_err(Error::from)
}

pub fn read_trajectory_csv(path: impl AsRef<Path>) -> Result<Trajectory> {
    let rows = read_csv(path.as_ref(), &["t_day", "population"])?;
    let mut t_days = Vec::with_capacity(rows.len());
    let mut population = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        t_days.push(parse_field::<f64>(&row[0], "t_day", line)?);
        population.push(parse_field::<f64>(&row[1], "population", line)?);
    }
    Ok(Trajectory {
        t_days,
        population,
        clipped_steps: 0,
    })
}

/// `t_day,x_obs,x_fit` rows (the fitted-series figure content).
pub fn write_fit_csv(path: impl AsRef<Path>, rows: &[(f64, f64, f64)]) -> Result<()> {
    let mut out = String::from("t_day,x_obs,x_fit\n");
    for (t, x_obs, x_fit) in rows {
        let _ = writeln!(out, "{t},{x_obs},{x_fit}");
    }
    fs::write(path, out).map_err(Error::from)
}

pub fn write_alpha_csv(path: impl AsRef<Path>, series: &AlphaSeries) -> Result<()> {
    let mut out = String::from("t_day,alpha_hat\n");
    for (t, a) in series.t_days.iter().zip(&series.alpha_hat) {
        let _ = writeln!(out, "{t},{a}");
    }
    fs::write(path, out).map_err(Error::from)
}

pub fn write_loss_history_csv(path: impl AsRef<Path>, history: &[LossRecord]) -> Result<()> {
    let mut out = String::from("iteration,loss_data,loss_ode,total\n");
    for (i, rec) in history.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{},{}", rec.loss_data, rec.loss_ode, rec.total);
    }
    fs::write(path, out).map_err(Error::from)
}

fn r2_text(r2: Option<f64>) -> String {
    match r2 {
        Some(v) => v.to_string(),
        None => "nan".to_string(),
    }
}

pub fn write_metrics_csv(path: impl AsRef<Path>, reports: &[MetricsReport]) -> Result<()> {
    let mut out = String::from("label,n,mse,mae,r2\n");
    for m in reports {
        let _ = writeln!(out, "{},{},{},{},{}", m.label, m.n, m.mse, m.mae, r2_text(m.r2));
    }
    fs::write(path, out).map_err(Error::from)
}

/// Aligned plain-text metrics table.
pub fn metrics_table(reports: &[MetricsReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<12} {:>6} {:>14} {:>14} {:>10}", "label", "n", "mse", "mae", "r2");
    for m in reports {
        let _ = writeln!(
            out,
            "{:<12} {:>6} {:>14.6} {:>14.6} {:>10}",
            m.label.as_str(),
            m.n,
            m.mse,
            m.mae,
            match m.r2 {
                Some(v) => format!("{v:.6}"),
                None => "undefined".to_string(),
            }
        );
    }
    out
}

pub fn write_climate_csv(path: impl AsRef<Path>, climate: &Climate) -> Result<()> {
    let mut out = String::from("t_day,temp_c,rh_pct\n");
    for ((t, temp), rh) in climate.t_days().iter().zip(climate.temp_c()).zip(climate.rh_pct()) {
        let _ = writeln!(out, "{t},{temp},{rh}");
    }
    fs::write(path, out).map_err(Error::from)
}

pub fn read_climate_csv(path: impl AsRef<Path>) -> Result<Climate> {
    let rows = read_csv(path.as_ref(), &["t_day", "temp_c", "rh_pct"])?;
    let mut t = Vec::with_capacity(rows.len());
    let mut temp = Vec::with_capacity(rows.len());
    let mut rh = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        t.push(parse_field::<f64>(&row[0], "t_day", line)?);
        temp.push(parse_field::<f64>(&row[1], "temp_c", line)?);
        rh.push(parse_field::<f64>(&row[2], "rh_pct", line)?);
    }
    Climate::new(t, temp, rh)
}

/// Ground-truth sidecar for synthetic data.
pub fn write_truth_csv(path: impl AsRef<Path>, data: &SynthData) -> Result<()> {
    let mut out = String::from("t_day,x_true,alpha_true\n");
    for (i, (x, a)) in data.x_true.iter().zip(&data.alpha_true).enumerate() {
        let _ = writeln!(out, "{i},{x},{a}");
    }
    fs::write(path, out).map_err(Error::from)
}

pub fn read_truth_csv(path: impl AsRef<Path>) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows = read_csv(path.as_ref(), &["t_day", "x_true", "alpha_true"])?;
    let mut x = Vec::with_capacity(rows.len());
    let mut a = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        x.push(parse_field::<f64>(&row[1], "x_true", line)?);
        a.push(parse_field::<f64>(&row[2], "alpha_true", line)?);
    }
    Ok((x, a))
}

/// Synthetic observations exported in the raw monitoring schema. Populations
/// are halved and rounded back to integer male counts, so this export is a
/// quantized view; the composite CSV carries the exact values.
pub fn write_raw_csv(path: impl AsRef<Path>, series: &CompositeSeries, year: i32) -> Result<()> {
    let start = chrono::NaiveDate::from_ymd_opt(year, crate::ingest::WINDOW_START.0, crate::ingest::WINDOW_START.1)
        .ok_or_else(|| Error::data(format!("bad export year {year}")))?;
    let mut out = String::from("year,month,day,male_count,temp_c,rh_pct\n");
    for i in 0..series.len() {
        let date = start + chrono::Days::new(series.day_index[i] as u64);
        use chrono::Datelike;
        let males = (series.population[i] / 2.0).round().max(0.0) as u64;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            date.year(),
            date.month(),
            date.day(),
            males,
            series.temperature[i],
            series.humidity[i],
        );
    }
    fs::write(path, out).map_err(Error::from)
}

/// Prefit result as a `key = value` block.
pub fn prefit_text(fit: &PrefitResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "a_hat = {}", fit.a_hat);
    let _ = writeln!(out, "b_hat = {}", fit.b_hat);
    let _ = writeln!(out, "x0_hat = {}", fit.x0_hat);
    let _ = writeln!(out, "k_hat = {}", fit.carrying_capacity());
    let _ = writeln!(out, "sse = {}", fit.sse);
    let _ = writeln!(out, "iterations = {}", fit.iterations);
    let _ = writeln!(out, "converged = {}", fit.converged);
    let _ = writeln!(out, "ill_conditioned = {}", fit.ill_conditioned);
    out
}

/// Prefit result as a one-row CSV.
pub fn write_prefit_csv(path: impl AsRef<Path>, fit: &PrefitResult) -> Result<()> {
    let mut out = String::from("a_hat,b_hat,x0_hat,k_hat,sse,iterations,converged\n");
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{}",
        fit.a_hat,
        fit.b_hat,
        fit.x0_hat,
        fit.carrying_capacity(),
        fit.sse,
        fit.iterations,
        fit.converged
    );
    fs::write(path, out).map_err(Error::from)
}

/// Plain-text report of the facilitation/suppression sign diagnostic.
pub fn sign_report_text(diag: &SignDiagnostic, m1: f64, m2: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "sign-consistency diagnostic (M1 = {m1}, M2 = {m2})");
    let _ = writeln!(out, "days evaluated: {}", diag.n);
    let _ = writeln!(out, "matching fraction: {:.4}", diag.matching_fraction);
    if diag.mismatches.is_empty() {
        let _ = writeln!(out, "mismatching days: none");
    } else {
        let days: Vec<String> = diag.mismatches.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "mismatching days: {}", days.join(" "));
    }
    out
}

/// Shared CSV reader: enforce an exact header, return (line, fields) rows.
fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<(u64, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::data(format!("cannot open {}: {e}", path.display())))?;
    {
        let got = reader
            .headers()
            .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
        let got: Vec<&str> = got.iter().collect();
        if got != header {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header {}, got {}", header.join(","), got.join(",")),
            });
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, got {}", header.len(), record.len()),
            });
        }
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(rows)
}

fn parse_field<T: std::str::FromStr>(text: &str, name: &str, line: u64) -> Result<T> {
    text.parse::<T>().map_err(|_| Error::Parse {
        line,
        message: format!("field `{name}` is not valid: `{text}`"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::{metrics, MetricsLabel};

    #[test]
    fn composite_csv_roundtrip() {
        let series = CompositeSeries::from_columns(
            (0..3).collect(),
            vec![2.5, 3.75, 10.0],
            vec![21.0, 22.5, 23.0],
            vec![84.0, 80.0, 79.5],
            4,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("composite.csv");
        write_composite_csv(&path, &series).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("day_index,date,population,temp_c,rh_pct\n"));
        assert!(text.contains("0,07-25,2.5,21,84"));
        let back = read_composite_csv(&path).unwrap();
        assert_eq!(back.population, series.population);
        assert_eq!(back.day_index, series.day_index);
        assert_eq!(back.n_years, 0);
    }

    #[test]
    fn trajectory_csv_roundtrip_is_bit_exact() {
        let traj = Trajectory {
            t_days: vec![0.0, 1.0, 2.0],
            population: vec![2.0, 0.1 + 0.2, 465.0 / 7.0],
            clipped_steps: 0,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        write_trajectory_csv(&path, &traj).unwrap();
        let back = read_trajectory_csv(&path).unwrap();
        for (a, b) in traj.population.iter().zip(&back.population) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn metrics_csv_marks_undefined_r2() {
        let m = metrics(MetricsLabel::Fit, &[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        write_metrics_csv(&path, &[m]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("fit,3,"));
        assert!(text.trim_end().ends_with("nan"));
    }

    #[test]
    fn metrics_table_is_aligned() {
        let m = metrics(MetricsLabel::BackSolve, &[1.0, 2.0, 3.0], &[1.1, 2.1, 2.9]).unwrap();
        let table = metrics_table(&[m]);
        assert!(table.contains("back-solve"));
        assert!(table.lines().count() == 2);
    }

    #[test]
    fn climate_csv_roundtrip() {
        let climate = Climate::new(vec![0.0, 1.0], vec![21.5, 22.0], vec![80.0, 81.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("climate.csv");
        write_climate_csv(&path, &climate).unwrap();
        let back = read_climate_csv(&path).unwrap();
        assert_eq!(climate, back);
    }

    #[test]
    fn raw_export_quantizes_counts() {
        let series = CompositeSeries::from_columns(
            (0..2).collect(),
            vec![5.0, 7.2], // males 2.5 → 3 (round-half-up), 3.6 → 4
            vec![21.0, 22.0],
            vec![84.0, 83.0],
            1,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw.csv");
        write_raw_csv(&path, &series, 2021).unwrap();
        let records = crate::ingest::load_csv(&path).unwrap();
        assert_eq!(records[0].male_count, 3);
        assert_eq!(records[1].male_count, 4);
        assert_eq!(records[0].doy, 206); // 2021-07-25
    }

    #[test]
    fn prefit_text_is_key_value() {
        let fit = PrefitResult {
            a_hat: 0.372,
            b_hat: 0.0008,
            x0_hat: 2.0,
            sse: 1e-12,
            iterations: 42,
            converged: true,
            ill_conditioned: false,
        };
        let text = prefit_text(&fit);
        assert!(text.contains("a_hat = 0.372"));
        assert!(text.contains("k_hat = 465"));
    }
}
