//! Flat `key = value` run configuration with `#` comments.
//!
//! Resolution order: built-in defaults < config file < `PCMNN_SEED`
//! environment variable (seed only) < command-line flags. Unknown keys in
//! the config file are hard errors.

use std::collections::BTreeMap;
use std::path::Path;

use pcmnn::dynamics::{LogisticParams, DEFAULT_RK4_STEP};
use pcmnn::pinn::{CollocResample, TrainConfig};
use pcmnn::{Error, Result};

/// Every tunable key with its value, kept as a sorted map so config
/// snapshots render deterministically.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub params: LogisticParams,
    pub train: TrainConfig,
    pub rk4_step: f64,
    /// Inclusive day-index range used by the prefit subcommand.
    pub prefit_day_start: usize,
    pub prefit_day_end: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: LogisticParams::default(),
            train: TrainConfig::default(),
            rk4_step: DEFAULT_RK4_STEP,
            prefit_day_start: 0,
            prefit_day_end: 21,
        }
    }
}

impl RunConfig {
    /// Apply a config file on top of the current values.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let n = i + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("{}:{n}: expected `key = value`", path.display())))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::config(format!("{}:{n}: {e}", path.display())))?;
        }
        Ok(())
    }

    /// Seed override from the environment, if present.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(seed) = std::env::var("PCMNN_SEED") {
            let seed = seed
                .parse::<u64>()
                .map_err(|_| Error::config(format!("PCMNN_SEED is not an integer: `{seed}`")))?;
            self.train.seed = seed;
        }
        Ok(())
    }

    /// Set one key; unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| Error::config(format!("`{key}` is not a number: `{value}`")))
        };
        match key {
            "a" => self.params.a = num()?,
            "b" => self.params.b = num()?,
            "t_star" => self.params.t_star = num()?,
            "h_star" => self.params.h_star = num()?,
            "alpha_min" => self.params.alpha_min = num()?,
            "alpha_max" => self.params.alpha_max = num()?,
            "seed" => self.train.seed = num()? as u64,
            "iterations" => self.train.iterations = num()? as usize,
            "n_colloc" => self.train.n_colloc = num()? as usize,
            "lambda_data" => self.train.lambda_data = num()?,
            "lambda_ode" => self.train.lambda_ode = num()?,
            "learning_rate" => self.train.learning_rate = num()?,
            "colloc_resample" => {
                self.train.colloc_resample = match value {
                    "per-iteration" => CollocResample::PerIteration,
                    "fixed-once" => CollocResample::FixedOnce,
                    other => {
                        return Err(Error::config(format!(
                            "colloc_resample must be per-iteration or fixed-once, got `{other}`"
                        )))
                    }
                }
            }
            "rk4_step" => self.rk4_step = num()?,
            "prefit_day_start" => self.prefit_day_start = num()? as usize,
            "prefit_day_end" => self.prefit_day_end = num()? as usize,
            other => return Err(Error::config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Validate the assembled configuration.
    pub fn validate(&self) -> Result<()> {
        LogisticParams::new(
            self.params.a,
            self.params.b,
            self.params.t_star,
            self.params.h_star,
            self.params.alpha_min,
            self.params.alpha_max,
        )?;
        self.train.validate()?;
        if !(self.rk4_step > 0.0) {
            return Err(Error::config("rk4_step must be positive"));
        }
        Ok(())
    }

    /// Deterministic `key = value` snapshot of the effective configuration.
    pub fn snapshot(&self) -> BTreeMap<&'static str, String> {
        let mut map = BTreeMap::new();
        map.insert("a", self.params.a.to_string());
        map.insert("b", self.params.b.to_string());
        map.insert("t_star", self.params.t_star.to_string());
        map.insert("h_star", self.params.h_star.to_string());
        map.insert("alpha_min", self.params.alpha_min.to_string());
        map.insert("alpha_max", self.params.alpha_max.to_string());
        map.insert("seed", self.train.seed.to_string());
        map.insert("iterations", self.train.iterations.to_string());
        map.insert("n_colloc", self.train.n_colloc.to_string());
        map.insert("lambda_data", self.train.lambda_data.to_string());
        map.insert("lambda_ode", self.train.lambda_ode.to_string());
        map.insert("learning_rate", self.train.learning_rate.to_string());
        map.insert(
            "colloc_resample",
            match self.train.colloc_resample {
                CollocResample::PerIteration => "per-iteration".to_string(),
                CollocResample::FixedOnce => "fixed-once".to_string(),
            },
        );
        map.insert("rk4_step", self.rk4_step.to_string());
        map.insert("prefit_day_start", self.prefit_day_start.to_string());
        map.insert("prefit_day_end", self.prefit_day_end.to_string());
        map
    }
}
