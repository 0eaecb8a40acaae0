//! Fit metrics, ODE back-solve verification and forecasting.
//!
//! Back-solve verification substitutes the inferred modulation back into the
//! mechanistic model and re-integrates it from the first observation: if
//! training was consistent, the simulated curve tracks both the data and the
//! state network. Forecasting runs the same integration on caller-supplied
//! future climate.
//!
//! All functions are pure over a frozen training state.

use crate::dynamics::{integrate_rk4, Climate, Trajectory, DEFAULT_RK4_STEP};
use crate::error::{Error, Result};
use crate::ingest::CompositeSeries;
use crate::pinn::{NetworkAlpha, TrainState};

/// Which comparison a metrics row describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricsLabel {
    Fit,
    BackSolve,
    Forecast,
}

impl MetricsLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetricsLabel::Fit => "fit",
            MetricsLabel::BackSolve => "back-solve",
            MetricsLabel::Forecast => "forecast",
        }
    }
}

impl std::fmt::Display for MetricsLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// MSE, MAE and R² of a prediction against a reference series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsReport {
    pub label: MetricsLabel,
    pub n: usize,
    /// Mean of squared errors.
    pub mse: f64,
    /// Mean of absolute errors. The absolute value is applied even though a
    /// signed mean would telescope; "absolute difference" is the definition.
    pub mae: f64,
    /// 1 − SS_res/SS_tot; `None` when the reference is constant and the
    /// denominator vanishes.
    pub r2: Option<f64>,
}

/// Compute MSE = (1/n)Σ(yᵢ−ŷᵢ)², MAE = (1/n)Σ|yᵢ−ŷᵢ| and
/// R² = 1 − Σ(yᵢ−ŷᵢ)²/Σ(yᵢ−ȳ)².
pub fn metrics(label: MetricsLabel, y_true: &[f64], y_pred: &[f64]) -> Result<MetricsReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Dimension {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    let n = y_true.len();
    if n < 2 {
        return Err(Error::data(format!("need at least 2 samples for metrics, got {n}")));
    }
    let nf = n as f64;
    let mut ss_res = 0.0;
    let mut abs_sum = 0.0;
    for (&y, &yh) in y_true.iter().zip(y_pred) {
        let e = y - yh;
        ss_res += e * e;
        abs_sum += e.abs();
    }
    let mean = y_true.iter().sum::<f64>() / nf;
    let ss_tot: f64 = y_true.iter().map(|&y| (y - mean) * (y - mean)).sum();
    let r2 = if ss_tot == 0.0 { None } else { Some(1.0 - ss_res / ss_tot) };
    Ok(MetricsReport {
        label,
        n,
        mse: ss_res / nf,
        mae: abs_sum / nf,
        r2,
    })
}

/// Result of re-integrating the mechanistic model under the inferred
/// modulation.
#[derive(Clone, Debug)]
pub struct BackSolveResult {
    pub trajectory: Trajectory,
    pub metrics: MetricsReport,
    /// The first observation was not positive, so the trajectory is the flat
    /// zero of the absorbing state.
    pub degenerate_x0: bool,
}

/// Integrate the modulated model with α from the trained network, starting at
/// the first observed value, and score the result against the observations.
pub fn verify_backsolve(
    state: &TrainState,
    series: &CompositeSeries,
    substep: f64,
) -> Result<BackSolveResult> {
    if series.len() < 2 {
        return Err(Error::data("series too short for back-solve verification"));
    }
    let climate = series.climate()?;
    let x0 = series.population[0];
    let degenerate_x0 = !(x0 > 0.0);
    if degenerate_x0 {
        eprintln!("warning: back-solve started from a non-positive first observation; trajectory is identically zero");
    }
    let grid: Vec<f64> = series.day_index.iter().map(|&d| d as f64).collect();
    let alpha = NetworkAlpha::new(state);
    let trajectory = integrate_rk4(&state.params, &alpha, x0.max(0.0), &climate, &grid, substep)?;
    let metrics = metrics(MetricsLabel::BackSolve, &series.population, &trajectory.population)?;
    Ok(BackSolveResult {
        trajectory,
        metrics,
        degenerate_x0,
    })
}

/// Forecast by integrating the modulated model forward from `x0` over
/// `horizon_days` with the supplied future climate, sampling daily.
///
/// Starts at the beginning of the training window; see [`forecast_from`]
/// for anchoring at a later observed day (the protocol for forecasting a
/// held-out period from its own first observation).
pub fn forecast(
    state: &TrainState,
    x0: f64,
    climate_future: &Climate,
    horizon_days: usize,
    substep: f64,
) -> Result<Trajectory> {
    forecast_from(state, x0, state.norm.day_start, climate_future, horizon_days, substep)
}

/// Forecast anchored at `start_day`: integrate `horizon_days` forward from
/// the observed value `x0` at that day.
pub fn forecast_from(
    state: &TrainState,
    x0: f64,
    start_day: f64,
    climate_future: &Climate,
    horizon_days: usize,
    substep: f64,
) -> Result<Trajectory> {
    if !(x0 > 0.0) {
        return Err(Error::data(format!("forecast requires a positive initial value, got {x0}")));
    }
    let t_end = start_day + horizon_days as f64;
    if !climate_future.covers(start_day, t_end) {
        let (lo, hi) = climate_future.span();
        return Err(Error::data(format!(
            "climate gap inside forecast horizon: need [{start_day}, {t_end}], have [{lo}, {hi}]"
        )));
    }
    let grid: Vec<f64> = (0..=horizon_days).map(|i| start_day + i as f64).collect();
    if horizon_days == 0 {
        return Ok(Trajectory {
            t_days: grid,
            population: vec![x0],
            clipped_steps: 0,
        });
    }
    let alpha = NetworkAlpha::new(state);
    integrate_rk4(&state.params, &alpha, x0, climate_future, &grid, substep)
}

/// Convenience wrapper using the default RK4 substep.
pub fn forecast_daily(state: &TrainState, x0: f64, climate_future: &Climate, horizon_days: usize) -> Result<Trajectory> {
    forecast(state, x0, climate_future, horizon_days, DEFAULT_RK4_STEP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use crate::autodiff::{MlpNetwork, OutputMap};
    use crate::dynamics::{logistic_closed_form, LogisticParams};
    use crate::pinn::{train, TrainConfig};

    #[test]
    fn golden_example() {
        let m = metrics(MetricsLabel::Fit, &[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap();
        assert!((m.mse - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.mae - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.r2.unwrap() - 0.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_fit() {
        let y = [4.0, 5.5, -2.0, 8.0];
        let m = metrics(MetricsLabel::Fit, &y, &y).unwrap();
        assert_eq!(m.mse, 0.0);
        assert_eq!(m.mae, 0.0);
        assert_eq!(m.r2, Some(1.0));
    }

    #[test]
    fn constant_prediction_scores_zero_r2() {
        let y = [1.0, 2.0, 3.0];
        let mean = 2.0;
        let m = metrics(MetricsLabel::Fit, &y, &[mean, mean, mean]).unwrap();
        assert_relative_eq!(m.r2.unwrap(), 0.0);
    }

    #[test]
    fn constant_truth_has_undefined_r2() {
        let m = metrics(MetricsLabel::Fit, &[3.0, 3.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.r2, None);
    }

    #[test]
    fn mismatched_lengths_fail() {
        assert!(metrics(MetricsLabel::Fit, &[1.0, 2.0], &[1.0]).is_err());
    }

    proptest! {
        /// Cauchy–Schwarz: (mean |e|)² ≤ mean e².
        #[test]
        fn mae_squared_bounded_by_mse(
            ys in proptest::collection::vec(-1e3f64..1e3, 2..40),
            offs in proptest::collection::vec(-1e3f64..1e3, 2..40),
        ) {
            let n = ys.len().min(offs.len());
            let y = &ys[..n];
            let yh: Vec<f64> = y.iter().zip(&offs[..n]).map(|(a, b)| a + b).collect();
            let m = metrics(MetricsLabel::Fit, y, &yh).unwrap();
            prop_assert!(m.mae * m.mae <= m.mse * (1.0 + 1e-12));
        }

        /// Metrics see (y, ŷ) pairs, not their order.
        #[test]
        fn metrics_are_permutation_invariant(seed in 0u64..500) {
            use rand::seq::SliceRandom;
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 12;
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let yh: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let base = metrics(MetricsLabel::Fit, &y, &yh).unwrap();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let yp: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            let yhp: Vec<f64> = idx.iter().map(|&i| yh[i]).collect();
            let perm = metrics(MetricsLabel::Fit, &yp, &yhp).unwrap();
            prop_assert!((base.mse - perm.mse).abs() < 1e-9);
            prop_assert!((base.mae - perm.mae).abs() < 1e-9);
        }
    }

    /// A state whose modulation network is identically zero (identity output
    /// map, zero weights), normalized over `n` days.
    fn zero_alpha_state(params: &LogisticParams, series: &CompositeSeries) -> TrainState {
        let config = TrainConfig { iterations: 1, n_colloc: 1, ..TrainConfig::default() };
        let mut state = train(series, params, &config).unwrap();
        state.alpha_net = MlpNetwork::zeros(&[3, 1], OutputMap::Identity).unwrap();
        state
    }

    fn unmodulated_series(params: &LogisticParams, x0: f64, n: usize) -> CompositeSeries {
        let population: Vec<f64> = (0..n)
            .map(|i| logistic_closed_form(params, x0, i as f64).unwrap())
            .collect();
        CompositeSeries::from_columns(
            (0..n as u32).collect(),
            population,
            vec![21.0; n],
            vec![84.0; n],
            1,
        )
        .unwrap()
    }

    #[test]
    fn backsolve_recovers_unmodulated_logistic() {
        let params = LogisticParams::default();
        let series = unmodulated_series(&params, 2.0, 30);
        let state = zero_alpha_state(&params, &series);
        let result = verify_backsolve(&state, &series, 0.01).unwrap();
        assert!(!result.degenerate_x0);
        assert!(result.metrics.r2.unwrap() >= 0.999, "r2 = {:?}", result.metrics.r2);
    }

    #[test]
    fn backsolve_zero_x0_is_flat_and_flagged() {
        let params = LogisticParams::default();
        let mut series = unmodulated_series(&params, 2.0, 10);
        series.population[0] = 0.0;
        let state = zero_alpha_state(&params, &series);
        let result = verify_backsolve(&state, &series, 0.05).unwrap();
        assert!(result.degenerate_x0);
        assert!(result.trajectory.population.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn backsolve_converges_at_fourth_order_in_substep() {
        // with the true α (zero) and exact x0, halving the substep cuts the
        // gap to the closed form by ~16×
        let params = LogisticParams::default();
        let series = unmodulated_series(&params, 1.0, 23);
        let state = zero_alpha_state(&params, &series);
        let err = |h: f64| -> f64 {
            let r = verify_backsolve(&state, &series, h).unwrap();
            r.trajectory
                .population
                .iter()
                .zip(&series.population)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(0.2) / err(0.1);
        assert!((12.0..=20.0).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn forecast_horizon_zero_is_x0() {
        let params = LogisticParams::default();
        let series = unmodulated_series(&params, 2.0, 10);
        let state = zero_alpha_state(&params, &series);
        let climate = series.climate().unwrap();
        let traj = forecast(&state, 2.0, &climate, 0, 0.01).unwrap();
        assert_eq!(traj.population, vec![2.0]);
    }

    #[test]
    fn forecast_coincides_with_backsolve_on_same_inputs() {
        let params = LogisticParams::default();
        let series = unmodulated_series(&params, 2.0, 20);
        let state = zero_alpha_state(&params, &series);
        let climate = series.climate().unwrap();
        let back = verify_backsolve(&state, &series, 0.01).unwrap();
        let fore = forecast(&state, series.population[0], &climate, 19, 0.01).unwrap();
        for (a, b) in back.trajectory.population.iter().zip(&fore.population) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn forecast_is_deterministic() {
        let params = LogisticParams::default();
        let series = unmodulated_series(&params, 2.0, 15);
        let state = zero_alpha_state(&params, &series);
        let climate = series.climate().unwrap();
        let a = forecast(&state, 2.0, &climate, 14, 0.02).unwrap();
        let b = forecast(&state, 2.0, &climate, 14, 0.02).unwrap();
        for (x, y) in a.population.iter().zip(&b.population) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn forecast_rejects_climate_gap() {
        let params = LogisticParams::default();
        let series = unmodulated_series(&params, 2.0, 10);
        let state = zero_alpha_state(&params, &series);
        let climate = Climate::constant(5, 21.0, 84.0); // covers [0, 4]
        assert!(forecast(&state, 2.0, &climate, 9, 0.01).is_err());
    }

    #[test]
    fn forecast_rejects_nonpositive_x0() {
        let params = LogisticParams::default();
        let series = unmodulated_series(&params, 2.0, 10);
        let state = zero_alpha_state(&params, &series);
        let climate = series.climate().unwrap();
        assert!(forecast(&state, 0.0, &climate, 5, 0.01).is_err());
    }
}
