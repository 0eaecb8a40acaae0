//! Synthetic-data oracle: generate trap-like datasets from a known ground
//! truth so inference quality is scoreable without field data.
//!
//! A [`Scenario`] fixes the logistic parameters, an analytic modulation
//! function, a climate, an initial population and a noise level. [`generate`]
//! integrates the modulated model, adds clipped Gaussian observation noise
//! and keeps the noiseless truth for scoring.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dynamics::{integrate_rk4, AlphaFunction, Climate, LogisticParams, DEFAULT_RK4_STEP};
use crate::error::{Error, Result};
use crate::evaluate::{metrics, MetricsLabel, MetricsReport};
use crate::ingest::CompositeSeries;
use crate::pinn::{extract_alpha, TrainState};

/// Analytic modulation functions used as ground truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaSpec {
    Zero,
    Constant(f64),
    /// `amplitude · sin(2π·(t + phase)/period)`.
    Sinusoid {
        amplitude: f64,
        period_days: f64,
        phase_days: f64,
    },
}

impl AlphaSpec {
    pub fn eval(&self, t_day: f64) -> f64 {
        match *self {
            AlphaSpec::Zero => 0.0,
            AlphaSpec::Constant(c) => c,
            AlphaSpec::Sinusoid {
                amplitude,
                period_days,
                phase_days,
            } => amplitude * (2.0 * std::f64::consts::PI * (t_day + phase_days) / period_days).sin(),
        }
    }

    /// Largest absolute value the spec can reach; used to validate bounds.
    fn max_abs(&self) -> f64 {
        match *self {
            AlphaSpec::Zero => 0.0,
            AlphaSpec::Constant(c) => c.abs(),
            AlphaSpec::Sinusoid { amplitude, .. } => amplitude.abs(),
        }
    }
}

impl AlphaFunction for AlphaSpec {
    fn alpha(&self, _temp_c: f64, _rh_pct: f64, t_day: f64) -> f64 {
        self.eval(t_day)
    }
}

/// Climate used for synthesis.
#[derive(Clone, Debug, PartialEq)]
pub enum ClimateSpec {
    Constant { temp_c: f64, rh_pct: f64 },
    /// Daily sinusoids around means.
    Sinusoid {
        temp_mean: f64,
        temp_amp: f64,
        rh_mean: f64,
        rh_amp: f64,
        period_days: f64,
    },
    /// A `t_day,temp_c,rh_pct` CSV.
    File(PathBuf),
}

impl ClimateSpec {
    pub fn build(&self, n_days: usize) -> Result<Climate> {
        match self {
            ClimateSpec::Constant { temp_c, rh_pct } => Ok(Climate::constant(n_days, *temp_c, *rh_pct)),
            ClimateSpec::Sinusoid {
                temp_mean,
                temp_amp,
                rh_mean,
                rh_amp,
                period_days,
            } => {
                let t: Vec<f64> = (0..n_days).map(|i| i as f64).collect();
                let w = 2.0 * std::f64::consts::PI / period_days;
                let temp = t.iter().map(|&d| temp_mean + temp_amp * (w * d).sin()).collect();
                let rh = t.iter().map(|&d| rh_mean + rh_amp * (w * d).cos()).collect();
                Climate::new(t, temp, rh)
            }
            ClimateSpec::File(path) => crate::report::read_climate_csv(path),
        }
    }
}

/// Complete description of a synthetic experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub params: LogisticParams,
    pub alpha_true: AlphaSpec,
    pub climate: ClimateSpec,
    /// Number of daily samples (t = 0..days−1).
    pub days: usize,
    pub x0: f64,
    /// Standard deviation of additive Gaussian observation noise, clipped at
    /// zero to keep observations count-like.
    pub noise_sd: f64,
    pub seed: u64,
}

impl Scenario {
    /// The canonical benchmark: calibrated parameters, a ±0.3 sinusoidal
    /// modulation over the 30-day window, constant climate at the optima,
    /// x0 = 2, noise sd = 2, seed 42.
    pub fn benchmark() -> Self {
        Scenario {
            params: LogisticParams::default(),
            alpha_true: AlphaSpec::Sinusoid {
                amplitude: 0.3,
                period_days: 30.0,
                phase_days: 0.0,
            },
            climate: ClimateSpec::Constant {
                temp_c: 21.0,
                rh_pct: 84.0,
            },
            days: 30,
            x0: 2.0,
            noise_sd: 2.0,
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.days < 2 {
            return Err(Error::config("scenario needs at least 2 days"));
        }
        if !(self.x0 > 0.0) {
            return Err(Error::config("scenario x0 must be positive"));
        }
        if self.noise_sd < 0.0 {
            return Err(Error::config("noise_sd must be nonnegative"));
        }
        let reach = self.alpha_true.max_abs();
        if reach > self.params.alpha_max.abs().max(self.params.alpha_min.abs()) {
            return Err(Error::config("alpha_true exceeds the modulation bounds"));
        }
        Ok(())
    }

    /// Parse a plain-text `key = value` scenario description (`#` comments).
    ///
    /// Keys: `a b t_star h_star alpha_min alpha_max`, `alpha` one of
    /// `zero|constant|sin` with `alpha_value` / `alpha_amplitude alpha_period
    /// alpha_phase`, `climate` one of `constant|sin|file` with its fields,
    /// `days x0 noise_sd seed`. Unknown keys are errors.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::data(format!("cannot read scenario {}: {e}", path.as_ref().display())))?;
        Self::from_str_inner(&text)
    }

    fn from_str_inner(text: &str) -> Result<Self> {
        use std::collections::HashMap;
        let mut kv: HashMap<&str, (&str, u64)> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let n = i as u64 + 1;
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: n, message: format!("expected `key = value`, got `{line}`") })?;
            kv.insert(k.trim(), (v.trim(), n));
        }

        fn take_num(kv: &mut HashMap<&str, (&str, u64)>, key: &str, default: f64) -> Result<f64> {
            match kv.remove(key) {
                Some((v, n)) => v.parse::<f64>().map_err(|_| Error::Parse {
                    line: n,
                    message: format!("`{key}` is not a number: `{v}`"),
                }),
                None => Ok(default),
            }
        }

        let defaults = LogisticParams::default();
        let a = take_num(&mut kv, "a", defaults.a)?;
        let b = take_num(&mut kv, "b", defaults.b)?;
        let t_star = take_num(&mut kv, "t_star", defaults.t_star)?;
        let h_star = take_num(&mut kv, "h_star", defaults.h_star)?;
        let alpha_min = take_num(&mut kv, "alpha_min", defaults.alpha_min)?;
        let alpha_max = take_num(&mut kv, "alpha_max", defaults.alpha_max)?;
        let params = LogisticParams::new(a, b, t_star, h_star, alpha_min, alpha_max)?;

        let days = take_num(&mut kv, "days", 30.0)? as usize;
        let x0 = take_num(&mut kv, "x0", 2.0)?;
        let noise_sd = take_num(&mut kv, "noise_sd", 0.0)?;
        let seed = take_num(&mut kv, "seed", 42.0)? as u64;

        let alpha_kind = kv.remove("alpha").map(|(v, _)| v).unwrap_or("zero");
        let alpha_true = match alpha_kind {
            "zero" => AlphaSpec::Zero,
            "constant" => AlphaSpec::Constant(take_num(&mut kv, "alpha_value", 0.0)?),
            "sin" => AlphaSpec::Sinusoid {
                amplitude: take_num(&mut kv, "alpha_amplitude", 0.3)?,
                period_days: take_num(&mut kv, "alpha_period", 30.0)?,
                phase_days: take_num(&mut kv, "alpha_phase", 0.0)?,
            },
            other => return Err(Error::config(format!("unknown alpha kind `{other}`"))),
        };

        let climate_kind = kv.remove("climate").map(|(v, _)| v).unwrap_or("constant");
        let climate = match climate_kind {
            "constant" => ClimateSpec::Constant {
                temp_c: take_num(&mut kv, "temp_c", t_star)?,
                rh_pct: take_num(&mut kv, "rh_pct", h_star)?,
            },
            "sin" => ClimateSpec::Sinusoid {
                temp_mean: take_num(&mut kv, "temp_mean", t_star)?,
                temp_amp: take_num(&mut kv, "temp_amp", 3.0)?,
                rh_mean: take_num(&mut kv, "rh_mean", h_star)?,
                rh_amp: take_num(&mut kv, "rh_amp", 5.0)?,
                period_days: take_num(&mut kv, "climate_period", 15.0)?,
            },
            "file" => {
                let (v, _) = kv
                    .remove("climate_path")
                    .ok_or_else(|| Error::config("climate = file requires climate_path"))?;
                ClimateSpec::File(PathBuf::from(v))
            }
            other => return Err(Error::config(format!("unknown climate kind `{other}`"))),
        };

        if let Some((key, (_, n))) = kv.iter().next() {
            return Err(Error::Parse {
                line: *n,
                message: format!("unknown scenario key `{key}`"),
            });
        }

        let scenario = Scenario {
            params,
            alpha_true,
            climate,
            days,
            x0,
            noise_sd,
            seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Generated observations plus retained ground truth.
#[derive(Clone, Debug)]
pub struct SynthData {
    /// Observation series in the composite format (population = noisy truth).
    pub series: CompositeSeries,
    pub climate: Climate,
    /// Noiseless trajectory at daily points.
    pub x_true: Vec<f64>,
    /// True modulation sampled at daily points.
    pub alpha_true: Vec<f64>,
}

/// Integrate the scenario's model, add clipped Gaussian noise, and keep the
/// truth. Fully reproducible from the scenario seed.
pub fn generate(scenario: &Scenario) -> Result<SynthData> {
    scenario.validate()?;
    let climate = scenario.climate.build(scenario.days)?;
    let grid: Vec<f64> = (0..scenario.days).map(|i| i as f64).collect();
    let traj = integrate_rk4(
        &scenario.params,
        &scenario.alpha_true,
        scenario.x0,
        &climate,
        &grid,
        DEFAULT_RK4_STEP,
    )?;
    let x_true = traj.population;

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let observations: Vec<f64> = x_true
        .iter()
        .map(|&x| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (x + scenario.noise_sd * z).max(0.0)
        })
        .collect();

    let alpha_true: Vec<f64> = grid
        .iter()
        .map(|&t| {
            let (temp, rh) = climate.at(t)?;
            Ok(scenario.alpha_true.alpha(temp, rh, t))
        })
        .collect::<Result<_>>()?;

    let (temps, rhs): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .map(|&t| climate.at(t))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();

    let series = CompositeSeries::from_columns(
        (0..scenario.days as u32).collect(),
        observations,
        temps,
        rhs,
        1,
    )?;

    Ok(SynthData {
        series,
        climate,
        x_true,
        alpha_true,
    })
}

/// How well a trained state recovered the scenario's ground truth.
#[derive(Clone, Debug)]
pub struct RecoveryReport {
    /// Root-mean-square gap between the inferred and true modulation on the
    /// daily grid.
    pub alpha_rmse: f64,
    /// State network against the noiseless truth.
    pub fit: MetricsReport,
    /// Forecast quality when a held-out comparison was supplied.
    pub forecast: Option<MetricsReport>,
}

pub fn score_recovery(state: &TrainState, truth: &SynthData) -> Result<RecoveryReport> {
    let grid: Vec<f64> = truth.series.day_index.iter().map(|&d| d as f64).collect();
    if grid.len() != truth.alpha_true.len() {
        return Err(Error::Dimension {
            expected: truth.alpha_true.len(),
            got: grid.len(),
        });
    }
    let inferred = extract_alpha(state, &truth.climate, &grid)?;
    let alpha_rmse = rmse(&inferred.alpha_hat, &truth.alpha_true);

    let x_fit: Vec<f64> = grid
        .iter()
        .map(|&d| state.state_net.forward_value(&[state.norm.t_norm(d)]))
        .collect::<Result<_>>()?;
    let fit = metrics(MetricsLabel::Fit, &truth.x_true, &x_fit)?;

    Ok(RecoveryReport {
        alpha_rmse,
        fit,
        forecast: None,
    })
}

/// Score a forecast trajectory against the truth from `from_day` onward.
pub fn score_forecast(
    forecast: &crate::dynamics::Trajectory,
    truth: &SynthData,
    from_day: usize,
) -> Result<MetricsReport> {
    let mut y_true = Vec::new();
    let mut y_pred = Vec::new();
    for (&t, &x) in forecast.t_days.iter().zip(&forecast.population) {
        let day = t.round() as usize;
        if day >= from_day && day < truth.x_true.len() && (t - day as f64).abs() < 1e-9 {
            y_true.push(truth.x_true[day]);
            y_pred.push(x);
        }
    }
    metrics(MetricsLabel::Forecast, &y_true, &y_pred)
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()).max(1);
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (ss / n as f64).sqrt()
}
