//! Mechanistic population models: the classical logistic equation and its
//! climate-modulated extension
//!
//! ```text
//! dx/dt = (A + α(T, H, t))·x − B·x²
//! ```
//!
//! with closed-form and fixed-step RK4 solutions. Everything here is pure and
//! reentrant; an [`AlphaFunction`] is evaluated without mutation.

use crate::error::{Error, Result};

/// Parameters of the logistic growth model and the bounds of the modulation
/// function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogisticParams {
    /// Baseline growth rate per day.
    pub a: f64,
    /// Density-inhibition coefficient; the carrying capacity is `a / b`.
    pub b: f64,
    /// Thermal optimum, °C.
    pub t_star: f64,
    /// Hygric optimum, % relative humidity.
    pub h_star: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
}

impl LogisticParams {
    pub fn new(a: f64, b: f64, t_star: f64, h_star: f64, alpha_min: f64, alpha_max: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::config("growth rate A must be positive"));
        }
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::config("density coefficient B must be positive"));
        }
        if !(alpha_min < alpha_max) {
            return Err(Error::config("alpha bounds must satisfy alpha_min < alpha_max"));
        }
        Ok(LogisticParams {
            a,
            b,
            t_star,
            h_star,
            alpha_min,
            alpha_max,
        })
    }

    pub fn carrying_capacity(&self) -> f64 {
        self.a / self.b
    }
}

impl Default for LogisticParams {
    /// Field-calibrated baseline for the soybean pod borer monitoring
    /// campaign: A = 0.372/day, B = 0.0008 (K = 465), optima 21 °C and 84 %,
    /// modulation bounded to [−1.372, 0.628] so that A + α stays in [−1, 1].
    fn default() -> Self {
        LogisticParams {
            a: 0.372,
            b: 0.0008,
            t_star: 21.0,
            h_star: 84.0,
            alpha_min: -1.372,
            alpha_max: 0.628,
        }
    }
}

/// Climatic modulation: a map (temperature, humidity, day) → growth-rate
/// offset. Realized analytically for synthesis or by a trained network.
pub trait AlphaFunction {
    fn alpha(&self, temp_c: f64, rh_pct: f64, t_day: f64) -> f64;
}

impl<F: Fn(f64, f64, f64) -> f64> AlphaFunction for F {
    fn alpha(&self, temp_c: f64, rh_pct: f64, t_day: f64) -> f64 {
        self(temp_c, rh_pct, t_day)
    }
}

/// No modulation; reduces the model to the classical logistic equation.
pub struct ZeroAlpha;

impl AlphaFunction for ZeroAlpha {
    fn alpha(&self, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }
}

/// Daily climate readings with piecewise-linear interpolation between them.
///
/// RK4 substeps fall between daily samples, so temperature and humidity are
/// treated as continuous-time signals.
#[derive(Clone, Debug, PartialEq)]
pub struct Climate {
    t_days: Vec<f64>,
    temp_c: Vec<f64>,
    rh_pct: Vec<f64>,
}

impl Climate {
    pub fn new(t_days: Vec<f64>, temp_c: Vec<f64>, rh_pct: Vec<f64>) -> Result<Self> {
        if t_days.is_empty() {
            return Err(Error::data("climate series is empty"));
        }
        if t_days.len() != temp_c.len() || t_days.len() != rh_pct.len() {
            return Err(Error::Dimension {
                expected: t_days.len(),
                got: temp_c.len().min(rh_pct.len()),
            });
        }
        if t_days.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::data("climate times must be strictly increasing"));
        }
        Ok(Climate { t_days, temp_c, rh_pct })
    }

    /// Constant climate sampled daily on `0..n_days`.
    pub fn constant(n_days: usize, temp_c: f64, rh_pct: f64) -> Self {
        let t: Vec<f64> = (0..n_days.max(1)).map(|i| i as f64).collect();
        let n = t.len();
        Climate {
            t_days: t,
            temp_c: vec![temp_c; n],
            rh_pct: vec![rh_pct; n],
        }
    }

    pub fn t_days(&self) -> &[f64] {
        &self.t_days
    }

    pub fn temp_c(&self) -> &[f64] {
        &self.temp_c
    }

    pub fn rh_pct(&self) -> &[f64] {
        &self.rh_pct
    }

    pub fn span(&self) -> (f64, f64) {
        (self.t_days[0], *self.t_days.last().unwrap())
    }

    pub fn covers(&self, t0: f64, t1: f64) -> bool {
        let (lo, hi) = self.span();
        // tolerance for accumulated step rounding at interval ends
        t0 >= lo - 1e-9 && t1 <= hi + 1e-9
    }

    /// Linearly interpolated (temperature, humidity) at `t` days.
    pub fn at(&self, t: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.span();
        if t < lo - 1e-9 || t > hi + 1e-9 {
            return Err(Error::data(format!(
                "climate not defined at t = {t} (covered range [{lo}, {hi}])"
            )));
        }
        let t = t.clamp(lo, hi);
        // single sample: constant extension
        if self.t_days.len() == 1 {
            return Ok((self.temp_c[0], self.rh_pct[0]));
        }
        let idx = match self.t_days.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
            Ok(i) => return Ok((self.temp_c[i], self.rh_pct[i])),
            Err(i) => i.clamp(1, self.t_days.len() - 1),
        };
        let (t0, t1) = (self.t_days[idx - 1], self.t_days[idx]);
        let w = (t - t0) / (t1 - t0);
        Ok((
            self.temp_c[idx - 1] + w * (self.temp_c[idx] - self.temp_c[idx - 1]),
            self.rh_pct[idx - 1] + w * (self.rh_pct[idx] - self.rh_pct[idx - 1]),
        ))
    }
}

/// Exact solution of `dx/dt = A·x − B·x²`:
///
/// `x(t) = K / (1 + ((K − x0)/x0)·exp(−A·t))` with `K = A/B`.
pub fn logistic_closed_form(params: &LogisticParams, x0: f64, t: f64) -> Result<f64> {
    if !(x0 > 0.0) {
        return Err(Error::data(format!("initial population must be positive, got {x0}")));
    }
    let k = params.carrying_capacity();
    Ok(k / (1.0 + ((k - x0) / x0) * (-params.a * t).exp()))
}

/// Right-hand side of the modulated model: `(A + α(T,H,t))·x − B·x²`.
pub fn rhs(params: &LogisticParams, alpha: &dyn AlphaFunction, x: f64, temp_c: f64, rh_pct: f64, t_day: f64) -> f64 {
    (params.a + alpha.alpha(temp_c, rh_pct, t_day)) * x - params.b * x * x
}

/// Population trajectory sampled on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub t_days: Vec<f64>,
    pub population: Vec<f64>,
    /// Number of substeps on which the state was clipped up to zero.
    pub clipped_steps: usize,
}

/// Default RK4 substep, in days.
pub const DEFAULT_RK4_STEP: f64 = 0.01;

/// Classical fourth-order Runge–Kutta on a fixed substep.
///
/// Each grid interval is split into equal substeps no longer than `substep`,
/// so the trajectory is sampled exactly at the grid points. The state is
/// clipped at zero from below; an inferred α near its lower bound can push a
/// coarse step transiently negative, which is counted rather than fatal.
pub fn integrate_rk4(
    params: &LogisticParams,
    alpha: &dyn AlphaFunction,
    x0: f64,
    climate: &Climate,
    t_grid: &[f64],
    substep: f64,
) -> Result<Trajectory> {
    if t_grid.is_empty() {
        return Err(Error::data("time grid is empty"));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::data("time grid must be strictly increasing"));
    }
    if !(substep > 0.0) {
        return Err(Error::config("RK4 substep must be positive"));
    }
    let (t_first, t_last) = (t_grid[0], *t_grid.last().unwrap());
    if !climate.covers(t_first, t_last) {
        let (lo, hi) = climate.span();
        return Err(Error::data(format!(
            "climate [{lo}, {hi}] does not cover the integration window [{t_first}, {t_last}]"
        )));
    }

    let f = |x: f64, t: f64| -> Result<f64> {
        let (temp, rh) = climate.at(t)?;
        Ok(rhs(params, alpha, x, temp, rh, t))
    };

    let mut clipped = 0usize;
    let mut x = x0.max(0.0);
    if x0 < 0.0 {
        clipped += 1;
    }
    let mut population = Vec::with_capacity(t_grid.len());
    population.push(x);

    for win in t_grid.windows(2) {
        let (t0, t1) = (win[0], win[1]);
        let n_sub = ((t1 - t0) / substep).ceil().max(1.0) as usize;
        let h = (t1 - t0) / n_sub as f64;
        let mut t = t0;
        for i in 0..n_sub {
            let k1 = f(x, t)?;
            let k2 = f(x + 0.5 * h * k1, t + 0.5 * h)?;
            let k3 = f(x + 0.5 * h * k2, t + 0.5 * h)?;
            let k4 = f(x + h * k3, t + h)?;
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !x.is_finite() {
                return Err(Error::Blowup { t_day: t + h });
            }
            if x < 0.0 {
                x = 0.0;
                clipped += 1;
            }
            t = t0 + (i + 1) as f64 * h;
        }
        population.push(x);
    }

    Ok(Trajectory {
        t_days: t_grid.to_vec(),
        population,
        clipped_steps: clipped,
    })
}

/// Post-hoc diagnostic for the sign structure of an inferred modulation:
/// growth facilitation (α ≥ 0) is expected when both squared deviations from
/// the optima stay below the user-supplied thresholds, suppression (α < 0)
/// otherwise. Reported, never enforced during training.
#[derive(Clone, Debug, PartialEq)]
pub struct SignDiagnostic {
    pub matching_fraction: f64,
    pub n: usize,
    /// Days (by grid position) where the sign disagreed with the criterion.
    pub mismatches: Vec<usize>,
}

pub fn sign_consistency(
    alpha_values: &[f64],
    climate: &Climate,
    t_grid: &[f64],
    params: &LogisticParams,
    m1: f64,
    m2: f64,
) -> Result<SignDiagnostic> {
    if alpha_values.len() != t_grid.len() {
        return Err(Error::Dimension {
            expected: t_grid.len(),
            got: alpha_values.len(),
        });
    }
    let mut mismatches = Vec::new();
    for (i, (&a, &t)) in alpha_values.iter().zip(t_grid).enumerate() {
        let (temp, rh) = climate.at(t)?;
        let within = (temp - params.t_star).powi(2) <= m1 && (rh - params.h_star).powi(2) <= m2;
        let matches = if within { a >= 0.0 } else { a < 0.0 };
        if !matches {
            mismatches.push(i);
        }
    }
    let n = t_grid.len();
    Ok(SignDiagnostic {
        matching_fraction: (n - mismatches.len()) as f64 / n as f64,
        n,
        mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn daily_grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64).collect()
    }

    #[test]
    fn closed_form_at_zero_is_x0() {
        let p = LogisticParams::default();
        assert_relative_eq!(logistic_closed_form(&p, 7.0, 0.0).unwrap(), 7.0);
    }

    #[test]
    fn carrying_capacity_is_a_fixed_point() {
        let p = LogisticParams::default();
        let k = p.carrying_capacity();
        for t in [0.0, 1.0, 10.0, 100.0] {
            assert_relative_eq!(logistic_closed_form(&p, k, t).unwrap(), k, max_relative = 1e-12);
        }
    }

    #[test]
    fn closed_form_reference_value() {
        // A = 0.372, B = 0.0008 (K = 465), x0 = 1, t = 10:
        // 465 / (1 + 464·e^{-3.72}) = 37.975...
        let p = LogisticParams::default();
        let x = logistic_closed_form(&p, 1.0, 10.0).unwrap();
        let expected = 465.0 / (1.0 + 464.0 * (-3.72f64).exp());
        assert_relative_eq!(x, expected, max_relative = 1e-14);
        assert!((x - 37.98).abs() < 0.01, "got {x}");
    }

    #[test]
    fn nonpositive_x0_is_rejected() {
        let p = LogisticParams::default();
        assert!(logistic_closed_form(&p, 0.0, 1.0).is_err());
        assert!(logistic_closed_form(&p, -2.0, 1.0).is_err());
    }

    #[test]
    fn rhs_equilibrium_and_absorbing_state() {
        let p = LogisticParams::default();
        let k = p.carrying_capacity();
        assert_relative_eq!(rhs(&p, &ZeroAlpha, k, 21.0, 84.0, 0.0), 0.0, epsilon = 1e-12);
        assert_eq!(rhs(&p, &ZeroAlpha, 0.0, 21.0, 84.0, 0.0), 0.0);
    }

    #[test]
    fn rhs_with_alpha_cancelling_a_is_pure_decay() {
        let p = LogisticParams::default();
        let cancel = |_: f64, _: f64, _: f64| -p.a;
        for x in [1.0, 50.0, 465.0] {
            assert_relative_eq!(
                rhs(&p, &cancel, x, 20.0, 80.0, 3.0),
                -p.b * x * x,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn rhs_sign_structure() {
        let p = LogisticParams::default();
        // positive at small x when A + α > 0
        assert!(rhs(&p, &ZeroAlpha, 1.0, 21.0, 84.0, 0.0) > 0.0);
        // negative above the effective capacity
        let x_above = (p.a + 0.0) / p.b * 1.1;
        assert!(rhs(&p, &ZeroAlpha, x_above, 21.0, 84.0, 0.0) < 0.0);
    }

    #[test]
    fn climate_interpolation_hits_samples_and_midpoints() {
        let c = Climate::new(vec![0.0, 1.0, 2.0], vec![20.0, 22.0, 26.0], vec![80.0, 84.0, 80.0]).unwrap();
        assert_eq!(c.at(1.0).unwrap(), (22.0, 84.0));
        let (t, h) = c.at(1.5).unwrap();
        assert_relative_eq!(t, 24.0);
        assert_relative_eq!(h, 82.0);
        assert!(c.at(2.5).is_err());
    }

    #[test]
    fn climate_requires_increasing_times() {
        assert!(Climate::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn rk4_matches_closed_form_without_modulation() {
        let p = LogisticParams::default();
        let climate = Climate::constant(23, 21.0, 84.0);
        let grid: Vec<f64> = daily_grid(23); // t ∈ [0, 22]
        let traj = integrate_rk4(&p, &ZeroAlpha, 1.0, &climate, &grid, 0.01).unwrap();
        let mut max_err = 0.0f64;
        for (&t, &x) in grid.iter().zip(&traj.population) {
            let exact = logistic_closed_form(&p, 1.0, t).unwrap();
            max_err = max_err.max((x - exact).abs());
        }
        assert!(max_err < 1e-6, "max abs error {max_err}");
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        let p = LogisticParams::default();
        let climate = Climate::constant(23, 21.0, 84.0);
        let grid = daily_grid(23);
        let err = |h: f64| -> f64 {
            let traj = integrate_rk4(&p, &ZeroAlpha, 1.0, &climate, &grid, h).unwrap();
            grid.iter()
                .zip(&traj.population)
                .map(|(&t, &x)| (x - logistic_closed_form(&p, 1.0, t).unwrap()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(0.2) / err(0.1);
        assert!((12.0..=20.0).contains(&ratio), "order-4 ratio {ratio}");
    }

    #[test]
    fn rk4_zero_initial_state_stays_zero() {
        let p = LogisticParams::default();
        let climate = Climate::constant(10, 21.0, 84.0);
        let traj = integrate_rk4(&p, &ZeroAlpha, 0.0, &climate, &daily_grid(10), 0.05).unwrap();
        assert!(traj.population.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rk4_trajectories_stay_in_unit_interval_of_k() {
        let p = LogisticParams::default();
        let k = p.carrying_capacity();
        let climate = Climate::constant(30, 21.0, 84.0);
        let grid = daily_grid(30);
        for x0 in [0.5, 10.0, 200.0, k] {
            let traj = integrate_rk4(&p, &ZeroAlpha, x0, &climate, &grid, 0.01).unwrap();
            let mut prev = traj.population[0];
            for &x in &traj.population[1..] {
                assert!(x > 0.0 && x <= k * (1.0 + 1e-9), "x = {x} left (0, K]");
                // monotone toward K
                assert!(x >= prev - 1e-9, "trajectory not monotone: {prev} -> {x}");
                prev = x;
            }
        }
    }

    #[test]
    fn rk4_reports_climate_gap() {
        let p = LogisticParams::default();
        let climate = Climate::constant(5, 21.0, 84.0); // covers [0, 4]
        let err = integrate_rk4(&p, &ZeroAlpha, 1.0, &climate, &daily_grid(10), 0.1);
        assert!(err.is_err());
    }

    #[test]
    fn sign_consistency_counts_matches() {
        let p = LogisticParams::default();
        let climate = Climate::new(
            vec![0.0, 1.0, 2.0, 3.0],
            vec![21.0, 21.0, 30.0, 30.0],
            vec![84.0, 84.0, 84.0, 84.0],
        )
        .unwrap();
        let grid = vec![0.0, 1.0, 2.0, 3.0];
        // optimum on days 0-1 (expect α ≥ 0), hot on days 2-3 (expect α < 0)
        let alpha = vec![0.1, -0.05, -0.2, 0.3];
        let diag = sign_consistency(&alpha, &climate, &grid, &p, 4.0, 4.0).unwrap();
        assert_eq!(diag.n, 4);
        assert_eq!(diag.mismatches, vec![1, 3]);
        assert_relative_eq!(diag.matching_fraction, 0.5);
    }
}
