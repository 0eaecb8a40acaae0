//! Loading and preprocessing of daily monitoring data.
//!
//! The pipeline is: load raw daily CSV files, restrict to the critical
//! phenological window (July 25 – August 23), composite synchronized dates
//! across years into a 30-day interannual average, and normalize inputs for
//! the networks. Trap counts record males only; sexes occur in roughly equal
//! proportion in the field, so the population proxy doubles the male count.
//!
//! All functions are pure over immutable inputs.

use std::path::Path;

use chrono::{Datelike, NaiveDate};

use crate::dynamics::Climate;
use crate::error::{Error, Result};

/// One calendar day of trap counts plus microclimate readings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DailyRecord {
    pub year: i32,
    /// Day of year, 1-based, per the actual calendar of `year`.
    pub doy: u32,
    /// Males per 3 traps per day.
    pub male_count: u32,
    /// Mean daily temperature, °C.
    pub temperature: f64,
    /// Mean relative humidity, %.
    pub humidity: f64,
}

impl DailyRecord {
    pub fn date(&self) -> Result<NaiveDate> {
        NaiveDate::from_yo_opt(self.year, self.doy)
            .ok_or_else(|| Error::data(format!("invalid day-of-year {} for {}", self.doy, self.year)))
    }
}

/// First and last calendar dates of the study window (month, day).
pub const WINDOW_START: (u32, u32) = (7, 25);
pub const WINDOW_END: (u32, u32) = (8, 23);
/// Number of calendar dates in the window.
pub const WINDOW_DAYS: usize = 30;

/// The 30-day interannual composite: per-date means of the doubled adult
/// count, temperature and humidity.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeSeries {
    /// 0-based position within the window; strictly increasing, no gaps.
    pub day_index: Vec<u32>,
    /// Doubled and averaged adult count (never negative).
    pub population: Vec<f64>,
    pub temperature: Vec<f64>,
    pub humidity: Vec<f64>,
    /// Years averaged; 1 for synthetic or single-year series, 0 when unknown
    /// (e.g. a composite read back from CSV).
    pub n_years: usize,
}

impl CompositeSeries {
    pub fn len(&self) -> usize {
        self.day_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.day_index.is_empty()
    }

    /// Calendar label ("07-25", …) for a day index, anchored at the window
    /// start in a non-leap reference year.
    pub fn date_label(day_index: u32) -> String {
        let start = NaiveDate::from_ymd_opt(2021, WINDOW_START.0, WINDOW_START.1).unwrap();
        let d = start + chrono::Days::new(day_index as u64);
        format!("{:02}-{:02}", d.month(), d.day())
    }

    /// The series' temperature/humidity columns as an interpolatable climate.
    pub fn climate(&self) -> Result<Climate> {
        Climate::new(
            self.day_index.iter().map(|&d| d as f64).collect(),
            self.temperature.clone(),
            self.humidity.clone(),
        )
    }

    /// The first `n` days, for train/holdout splits.
    pub fn prefix(&self, n: usize) -> CompositeSeries {
        let n = n.min(self.len());
        CompositeSeries {
            day_index: self.day_index[..n].to_vec(),
            population: self.population[..n].to_vec(),
            temperature: self.temperature[..n].to_vec(),
            humidity: self.humidity[..n].to_vec(),
            n_years: self.n_years,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.day_index.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::data("composite day indices must be consecutive"));
        }
        if self.population.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::data("composite population must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn from_columns(
        day_index: Vec<u32>,
        population: Vec<f64>,
        temperature: Vec<f64>,
        humidity: Vec<f64>,
        n_years: usize,
    ) -> Result<Self> {
        let n = day_index.len();
        if population.len() != n || temperature.len() != n || humidity.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: population.len().min(temperature.len()).min(humidity.len()),
            });
        }
        let s = CompositeSeries {
            day_index,
            population,
            temperature,
            humidity,
            n_years,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Expected header of raw monitoring CSV files.
pub const RAW_CSV_HEADER: [&str; 6] = ["year", "month", "day", "male_count", "temp_c", "rh_pct"];

/// Load a raw daily monitoring CSV (`year,month,day,male_count,temp_c,rh_pct`
/// with a mandatory header). Rows are returned in file order; month/day are
/// converted to day-of-year using the actual calendar.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<DailyRecord>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::data(format!("cannot open {}: {e}", path.display())),
            _ => Error::data(e.to_string()),
        })?;

    {
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
        let got: Vec<&str> = headers.iter().collect();
        if got != RAW_CSV_HEADER {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header {}, got {}", RAW_CSV_HEADER.join(","), got.join(",")),
            });
        }
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        records.push(parse_row(&row, line)?);
    }
    Ok(records)
}

fn parse_row(row: &csv::StringRecord, line: u64) -> Result<DailyRecord> {
    let field = |i: usize, name: &str| -> Result<&str> {
        row.get(i).ok_or_else(|| Error::Parse {
            line,
            message: format!("missing field `{name}`"),
        })
    };
    let parse = |i: usize, name: &str| -> Result<f64> {
        field(i, name)?.parse::<f64>().map_err(|_| Error::Parse {
            line,
            message: format!("field `{name}` is not a number: `{}`", row.get(i).unwrap_or("")),
        })
    };
    if row.len() != 6 {
        return Err(Error::Parse {
            line,
            message: format!("expected 6 fields, got {}", row.len()),
        });
    }

    let year = field(0, "year")?.parse::<i32>().map_err(|_| Error::Parse {
        line,
        message: format!("field `year` is not an integer: `{}`", row.get(0).unwrap_or("")),
    })?;
    let month = parse(1, "month")? as u32;
    let day = parse(2, "day")? as u32;
    let count_raw = field(3, "male_count")?;
    let male_count = count_raw.parse::<i64>().map_err(|_| Error::Parse {
        line,
        message: format!("field `male_count` is not an integer: `{count_raw}`"),
    })?;
    if male_count < 0 {
        return Err(Error::Parse {
            line,
            message: format!("male_count must be nonnegative, got {male_count}"),
        });
    }
    let temperature = parse(4, "temp_c")?;
    let humidity = parse(5, "rh_pct")?;
    if !(0.0..=100.0).contains(&humidity) {
        return Err(Error::Parse {
            line,
            message: format!("rh_pct must be within [0, 100], got {humidity}"),
        });
    }
    let date = NaiveDate::from_ymd_opt(year, month, day).ok_or_else(|| Error::Parse {
        line,
        message: format!("invalid calendar date {year}-{month:02}-{day:02}"),
    })?;
    Ok(DailyRecord {
        year,
        doy: date.ordinal(),
        male_count: male_count as u32,
        temperature,
        humidity,
    })
}

fn in_window(date: NaiveDate) -> bool {
    let md = (date.month(), date.day());
    md >= WINDOW_START && md <= WINDOW_END
}

/// Keep only records whose calendar date falls inside July 25 – August 23,
/// inclusive, for their own year. Years with partial coverage pass through;
/// completeness is checked at compositing.
pub fn window(records: &[DailyRecord]) -> Result<Vec<DailyRecord>> {
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        if in_window(r.date()?) {
            out.push(*r);
        }
    }
    Ok(out)
}

/// The window's calendar dates, as (month, day), in order.
fn window_dates() -> Vec<(u32, u32)> {
    let start = NaiveDate::from_ymd_opt(2021, WINDOW_START.0, WINDOW_START.1).unwrap();
    (0..WINDOW_DAYS as u64)
        .map(|i| {
            let d = start + chrono::Days::new(i);
            (d.month(), d.day())
        })
        .collect()
}

/// Composite synchronized daily records across `years`.
///
/// For each of the 30 window dates the population is the mean over years of
/// twice the male count; temperature and humidity are plain means. Every
/// (year, date) pair must be present exactly once; gaps and duplicates are
/// errors naming the offender. Records outside the window are ignored.
pub fn composite(records: &[DailyRecord], years: &[i32]) -> Result<CompositeSeries> {
    if years.is_empty() {
        return Err(Error::data("no years requested for compositing"));
    }
    let mut years = years.to_vec();
    years.sort_unstable();
    years.dedup();

    use std::collections::HashMap;
    let mut by_key: HashMap<(i32, (u32, u32)), &DailyRecord> = HashMap::new();
    for r in records {
        let date = r.date()?;
        if !in_window(date) {
            continue;
        }
        let key = (r.year, (date.month(), date.day()));
        if by_key.insert(key, r).is_some() {
            return Err(Error::data(format!(
                "duplicate record for {}-{:02}-{:02}",
                key.0, key.1 .0, key.1 .1
            )));
        }
    }

    let dates = window_dates();
    let mut population = Vec::with_capacity(WINDOW_DAYS);
    let mut temperature = Vec::with_capacity(WINDOW_DAYS);
    let mut humidity = Vec::with_capacity(WINDOW_DAYS);
    for &(month, day) in &dates {
        let mut pop_sum = 0.0;
        let mut temp_sum = 0.0;
        let mut hum_sum = 0.0;
        for &year in &years {
            let r = by_key.get(&(year, (month, day))).ok_or_else(|| {
                Error::data(format!("missing record for {year}-{month:02}-{day:02}"))
            })?;
            pop_sum += 2.0 * r.male_count as f64;
            temp_sum += r.temperature;
            hum_sum += r.humidity;
        }
        let n = years.len() as f64;
        population.push(pop_sum / n);
        temperature.push(temp_sum / n);
        humidity.push(hum_sum / n);
    }

    Ok(CompositeSeries {
        day_index: (0..WINDOW_DAYS as u32).collect(),
        population,
        temperature,
        humidity,
        n_years: years.len(),
    })
}

/// Fixed scale applied to squared temperature deviations so typical
/// magnitudes are order one ((30−21)² ≈ 81 → 0.81).
pub const TEMP_DEV_SCALE: f64 = 1e-2;
/// Fixed scale applied to squared humidity deviations ((60−84)² ≈ 576 → 0.576).
pub const HUM_DEV_SCALE: f64 = 1e-3;

/// Affine time map plus the deviation features fed to the modulation network.
///
/// Time is mapped to [0, 1] over the observation window; temperature and
/// humidity enter as scaled squared deviations from the optima, matching the
/// functional form α((T−T*)², (H−H*)², t).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizationSpec {
    pub day_start: f64,
    /// Span of the window in days (last − first); strictly positive.
    pub day_span: f64,
    pub t_star: f64,
    pub h_star: f64,
    pub temp_dev_scale: f64,
    pub hum_dev_scale: f64,
}

impl NormalizationSpec {
    pub fn new(day_start: f64, day_end: f64, t_star: f64, h_star: f64) -> Result<Self> {
        if !(day_end > day_start) {
            return Err(Error::data("normalization window must have positive length"));
        }
        Ok(NormalizationSpec {
            day_start,
            day_span: day_end - day_start,
            t_star,
            h_star,
            temp_dev_scale: TEMP_DEV_SCALE,
            hum_dev_scale: HUM_DEV_SCALE,
        })
    }

    /// Window taken from a series' first and last day index.
    pub fn for_series(series: &CompositeSeries, t_star: f64, h_star: f64) -> Result<Self> {
        if series.len() < 2 {
            return Err(Error::data("series too short to define a time window"));
        }
        Self::new(
            series.day_index[0] as f64,
            *series.day_index.last().unwrap() as f64,
            t_star,
            h_star,
        )
    }

    pub fn t_norm(&self, day: f64) -> f64 {
        (day - self.day_start) / self.day_span
    }

    pub fn day(&self, t_norm: f64) -> f64 {
        self.day_start + t_norm * self.day_span
    }

    /// `[(T−T*)²·s_T, (H−H*)²·s_H, t]` — the modulation network's inputs.
    pub fn alpha_features(&self, temp_c: f64, rh_pct: f64, t_norm: f64) -> [f64; 3] {
        [
            (temp_c - self.t_star).powi(2) * self.temp_dev_scale,
            (rh_pct - self.h_star).powi(2) * self.hum_dev_scale,
            t_norm,
        ]
    }
}

/// A composite series expressed in model coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedSeries {
    pub t_norm: Vec<f64>,
    pub population: Vec<f64>,
    pub alpha_features: Vec<[f64; 3]>,
    pub spec: NormalizationSpec,
}

pub fn normalize(series: &CompositeSeries, spec: &NormalizationSpec) -> NormalizedSeries {
    let t_norm: Vec<f64> = series.day_index.iter().map(|&d| spec.t_norm(d as f64)).collect();
    let alpha_features = t_norm
        .iter()
        .zip(series.temperature.iter().zip(&series.humidity))
        .map(|(&t, (&temp, &hum))| spec.alpha_features(temp, hum, t))
        .collect();
    NormalizedSeries {
        t_norm,
        population: series.population.clone(),
        alpha_features,
        spec: *spec,
    }
}
