//! Joint training of the state network x(t) and the modulation network
//! α(T, H, t) against a composite loss:
//!
//! ```text
//! Loss = λ_data·(1/N_d)·Σ |x(tᵢ) − x_obs(tᵢ)|²
//!      + λ_ode ·(1/N_e)·Σ |dx/dt(tᵢ) − [(A + α)·x − B·x²](tᵢ)|²
//! ```
//!
//! with the residual evaluated at collocation times drawn uniformly from the
//! window. The time derivative of the state network is propagated as a taped
//! tangent, so parameter gradients flow through dx/dt exactly. The modulation
//! network's output is squashed into [α_min, α_max] by construction.
//!
//! Training is a single deterministic thread: fixed seed in, identical loss
//! history out.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{AdamState, BoundNet, Dual, MlpNetwork, OutputMap, Tape};
use crate::dynamics::{AlphaFunction, Climate, LogisticParams};
use crate::error::{Error, Result};
use crate::ingest::{normalize, CompositeSeries, NormalizationSpec};

/// Hidden layout of the state network x(t): 5 hidden layers × 32 neurons.
pub const STATE_NET_LAYERS: [usize; 7] = [1, 32, 32, 32, 32, 32, 1];
/// Hidden layout of the modulation network α: 3 hidden layers × 64 neurons.
pub const ALPHA_NET_LAYERS: [usize; 5] = [3, 64, 64, 64, 1];

/// When collocation points are redrawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CollocResample {
    /// Fresh uniform draws every iteration (default).
    PerIteration,
    /// One fixed set drawn up front; useful for exact reproducibility studies.
    FixedOnce,
}

/// Training knobs. The observation count N_d is taken from the series itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    /// Number of ODE residual points N_e.
    pub n_colloc: usize,
    pub lambda_data: f64,
    pub lambda_ode: f64,
    pub iterations: usize,
    pub seed: u64,
    pub colloc_resample: CollocResample,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_colloc: 100,
            lambda_data: 1.0,
            lambda_ode: 1.0,
            iterations: 10_000,
            seed: 42,
            colloc_resample: CollocResample::PerIteration,
            learning_rate: 1e-3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("iterations must be positive"));
        }
        if self.n_colloc == 0 {
            return Err(Error::config("n_colloc must be at least 1"));
        }
        if self.lambda_data < 0.0 || self.lambda_ode < 0.0 {
            return Err(Error::config("loss weights must be nonnegative"));
        }
        if self.lambda_data == 0.0 && self.lambda_ode == 0.0 {
            return Err(Error::config("at least one loss weight must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        Ok(())
    }
}

/// Per-iteration loss components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    pub loss_data: f64,
    pub loss_ode: f64,
    pub total: f64,
}

/// Everything produced by training: both networks, optimizer state, loss
/// history and the coordinate conventions needed to evaluate the result.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub state_net: MlpNetwork,
    pub alpha_net: MlpNetwork,
    pub adam: AdamState,
    pub loss_history: Vec<LossRecord>,
    pub seed: u64,
    pub iteration: usize,
    pub config: TrainConfig,
    pub params: LogisticParams,
    pub norm: NormalizationSpec,
    /// Set when the final total loss failed to improve on the initial one.
    pub converged: bool,
}

/// Inferred modulation values on a time grid, with the two reference levels
/// drawn in the parameter plots: the growth threshold at 0 and the
/// uncorrelated baseline at −A.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaSeries {
    pub t_days: Vec<f64>,
    pub alpha_hat: Vec<f64>,
    pub growth_threshold: f64,
    pub uncorrelated_baseline: f64,
}

/// Mean squared error of the state network against observations at
/// normalized times. Definition of the data loss, value form.
pub fn loss_data(state_net: &MlpNetwork, t_norm: &[f64], x_obs: &[f64]) -> Result<f64> {
    if t_norm.is_empty() || t_norm.len() != x_obs.len() {
        return Err(Error::Dimension {
            expected: t_norm.len().max(1),
            got: x_obs.len(),
        });
    }
    let mut acc = 0.0;
    for (&t, &x) in t_norm.iter().zip(x_obs) {
        let r = state_net.forward_value(&[t])? - x;
        acc += r * r;
    }
    Ok(acc / t_norm.len() as f64)
}

/// Mean squared ODE residual at collocation points (normalized times).
/// Value form of the physics loss; the training loop uses the taped twin.
pub fn loss_ode(
    state_net: &MlpNetwork,
    alpha_net: &MlpNetwork,
    params: &LogisticParams,
    climate: &Climate,
    norm: &NormalizationSpec,
    colloc_t_norm: &[f64],
) -> Result<f64> {
    if colloc_t_norm.is_empty() {
        return Err(Error::data("no collocation points"));
    }
    let mut acc = 0.0;
    for &tn in colloc_t_norm {
        let r = ode_residual_value(state_net, alpha_net, params, climate, norm, tn)?;
        if !r.is_finite() {
            return Err(Error::non_finite(format!("ODE residual at t_norm = {tn}")));
        }
        acc += r * r;
    }
    Ok(acc / colloc_t_norm.len() as f64)
}

/// Single residual L(t) = dx/dt − [(A + α)·x − B·x²] in per-day units.
fn ode_residual_value(
    state_net: &MlpNetwork,
    alpha_net: &MlpNetwork,
    params: &LogisticParams,
    climate: &Climate,
    norm: &NormalizationSpec,
    t_norm: f64,
) -> Result<f64> {
    let day = norm.day(t_norm);
    let (temp, rh) = climate.at(day)?;
    let (x, dxdt_norm) = state_net.forward_with_tangent(&[t_norm], &[1.0])?;
    // the network differentiates in normalized time; rescale to per-day
    let dxdt = dxdt_norm / norm.day_span;
    let alpha = alpha_net.forward_value(&norm.alpha_features(temp, rh, t_norm))?;
    Ok(dxdt - ((params.a + alpha) * x - params.b * x * x))
}

/// Uniform i.i.d. draws over the normalized window [0, 1].
pub fn sample_collocation(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// Build both loss terms on a tape. Returns (loss_data, loss_ode) variables.
fn build_losses(
    tape: &mut Tape,
    state: &BoundNet<'_>,
    alpha: &BoundNet<'_>,
    t_norm: &[f64],
    x_obs: &[f64],
    colloc: &[f64],
    params: &LogisticParams,
    climate: &Climate,
    norm: &NormalizationSpec,
) -> Result<(crate::autodiff::Var, crate::autodiff::Var)> {
    // data term
    let mut data_residuals = Vec::with_capacity(t_norm.len());
    for (&tn, &xo) in t_norm.iter().zip(x_obs) {
        let t = tape.leaf(tn);
        let x_nn = state.forward(tape, &[t])?;
        let r = tape.offset(x_nn, -xo);
        data_residuals.push(r);
    }
    let loss_data = tape.mean_square(&data_residuals);

    // ODE term
    let mut ode_residuals = Vec::with_capacity(colloc.len());
    for &tn in colloc {
        let day = norm.day(tn);
        let (temp, rh) = climate.at(day)?;
        let t = Dual::seed(tape, tn);
        let x = state.forward_dual(tape, &[t])?;
        let dxdt = tape.scale(x.tan, 1.0 / norm.day_span);

        let feats = norm.alpha_features(temp, rh, tn);
        let f0 = tape.leaf(feats[0]);
        let f1 = tape.leaf(feats[1]);
        let alpha_v = alpha.forward(tape, &[f0, f1, t.val])?;

        // (A + α)·x − B·x²
        let ax = tape.scale(x.val, params.a);
        let alpha_x = tape.mul(alpha_v, x.val);
        let x2 = tape.square(x.val);
        let bx2 = tape.scale(x2, params.b);
        let growth = tape.add(ax, alpha_x);
        let f = tape.sub(growth, bx2);
        let r = tape.sub(dxdt, f);
        ode_residuals.push(r);
    }
    let loss_ode = tape.mean_square(&ode_residuals);

    Ok((loss_data, loss_ode))
}

/// Run the full training loop on the series' own time window.
///
/// Adam updates the concatenated parameter vector of both networks jointly;
/// there is no alternating scheme. The loss history records every iteration's
/// components before the update at that iteration.
pub fn train(series: &CompositeSeries, params: &LogisticParams, config: &TrainConfig) -> Result<TrainState> {
    let climate = series.climate()?;
    let (lo, hi) = climate.span();
    train_with_domain(series, &climate, (lo, hi), params, config)
}

/// Training with an explicit computational domain.
///
/// Residual points are drawn from the whole `domain_days` window even where
/// no observations exist, so the physics constrains the solution across an
/// unobserved tail — the setup for forecast studies, where the domain spans
/// the forecast horizon and `climate` supplies its conditions. The
/// observations must lie inside the domain.
pub fn train_with_domain(
    series: &CompositeSeries,
    climate: &Climate,
    domain_days: (f64, f64),
    params: &LogisticParams,
    config: &TrainConfig,
) -> Result<TrainState> {
    config.validate()?;
    if series.len() < 2 {
        return Err(Error::data("series too short to train on"));
    }
    if series.population.iter().any(|&x| !x.is_finite()) {
        return Err(Error::non_finite("observed population"));
    }
    let norm = NormalizationSpec::new(domain_days.0, domain_days.1, params.t_star, params.h_star)?;
    let first_obs = series.day_index[0] as f64;
    let last_obs = *series.day_index.last().unwrap() as f64;
    if first_obs < domain_days.0 || last_obs > domain_days.1 {
        return Err(Error::data(format!(
            "observations [{first_obs}, {last_obs}] outside computational domain [{}, {}]",
            domain_days.0, domain_days.1
        )));
    }
    if !climate.covers(domain_days.0, domain_days.1) {
        let (lo, hi) = climate.span();
        return Err(Error::data(format!(
            "climate [{lo}, {hi}] does not cover the computational domain [{}, {}]",
            domain_days.0, domain_days.1
        )));
    }
    let normed = normalize(series, &norm);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state_net = MlpNetwork::new(&STATE_NET_LAYERS, OutputMap::Identity, &mut rng)?;
    // start at the best constant predictor: with a zero-centered output the
    // first training phase just chases the data mean with gradients large
    // enough to saturate the hidden layers into a frozen constant fit
    let obs_mean = series.population.iter().sum::<f64>() / series.len() as f64;
    state_net.set_bias(STATE_NET_LAYERS.len() - 2, 0, obs_mean);
    let mut alpha_net = MlpNetwork::new(
        &ALPHA_NET_LAYERS,
        OutputMap::Bounded {
            lo: params.alpha_min,
            hi: params.alpha_max,
        },
        &mut rng,
    )?;

    let n_state = state_net.param_count();
    let n_total = n_state + alpha_net.param_count();
    let mut adam = AdamState::new(n_total, config.learning_rate);
    let mut flat = Vec::with_capacity(n_total);
    let mut loss_history = Vec::with_capacity(config.iterations);

    let fixed_colloc = match config.colloc_resample {
        CollocResample::FixedOnce => Some(sample_collocation(config.n_colloc, &mut rng)),
        CollocResample::PerIteration => None,
    };

    let mut tape = Tape::new();
    for iter in 0..config.iterations {
        let colloc: Vec<f64> = match &fixed_colloc {
            Some(c) => c.clone(),
            None => sample_collocation(config.n_colloc, &mut rng),
        };

        tape.clear();
        let state_bound = state_net.bind(&mut tape);
        let alpha_bound = alpha_net.bind(&mut tape);
        let (ld_var, lo_var) = build_losses(
            &mut tape,
            &state_bound,
            &alpha_bound,
            &normed.t_norm,
            &normed.population,
            &colloc,
            params,
            climate,
            &norm,
        )?;
        let ld = tape.value(ld_var);
        let lo = tape.value(lo_var);
        if !ld.is_finite() {
            return Err(Error::non_finite(format!("loss_data at iteration {iter}")));
        }
        if !lo.is_finite() {
            return Err(Error::non_finite(format!("loss_ode at iteration {iter}")));
        }
        let weighted_data = tape.scale(ld_var, config.lambda_data);
        let weighted_ode = tape.scale(lo_var, config.lambda_ode);
        let total_var = tape.add(weighted_data, weighted_ode);
        let total = tape.value(total_var);
        loss_history.push(LossRecord {
            loss_data: ld,
            loss_ode: lo,
            total,
        });

        let grads = tape.backward(total_var);
        let mut g = state_bound.param_grads(&grads);
        g.extend(alpha_bound.param_grads(&grads));

        flat.clear();
        flat.extend(state_net.flat_params());
        flat.extend(alpha_net.flat_params());
        adam.step(&mut flat, &g).map_err(|e| match e {
            Error::NonFinite { context } => Error::non_finite(format!(
                "{context} at iteration {iter} (loss_data = {ld}, loss_ode = {lo})"
            )),
            other => other,
        })?;
        state_net.set_flat_params(&flat[..n_state])?;
        alpha_net.set_flat_params(&flat[n_state..])?;
    }

    let converged = match (loss_history.first(), loss_history.last()) {
        (Some(first), Some(last)) => last.total <= first.total,
        _ => false,
    };
    if !converged {
        eprintln!("warning: training did not improve on the initial loss");
    }

    Ok(TrainState {
        state_net,
        alpha_net,
        adam,
        loss_history,
        seed: config.seed,
        iteration: config.iterations,
        config: *config,
        params: *params,
        norm,
        converged,
    })
}

/// Evaluate the inferred modulation on a grid of days, using the same
/// deviation features as training.
pub fn extract_alpha(state: &TrainState, climate: &Climate, grid_days: &[f64]) -> Result<AlphaSeries> {
    let mut alpha_hat = Vec::with_capacity(grid_days.len());
    for &day in grid_days {
        let (temp, rh) = climate.at(day)?;
        let tn = state.norm.t_norm(day);
        let a = state
            .alpha_net
            .forward_value(&state.norm.alpha_features(temp, rh, tn))?;
        alpha_hat.push(a);
    }
    Ok(AlphaSeries {
        t_days: grid_days.to_vec(),
        alpha_hat,
        growth_threshold: 0.0,
        uncorrelated_baseline: -state.params.a,
    })
}

/// The trained modulation network viewed as an [`AlphaFunction`] in physical
/// coordinates; what the back-solve and forecast integrators consume.
pub struct NetworkAlpha<'a> {
    alpha_net: &'a MlpNetwork,
    norm: &'a NormalizationSpec,
}

impl<'a> NetworkAlpha<'a> {
    pub fn new(state: &'a TrainState) -> Self {
        NetworkAlpha {
            alpha_net: &state.alpha_net,
            norm: &state.norm,
        }
    }

    pub fn from_parts(alpha_net: &'a MlpNetwork, norm: &'a NormalizationSpec) -> Self {
        NetworkAlpha { alpha_net, norm }
    }
}

impl AlphaFunction for NetworkAlpha<'_> {
    fn alpha(&self, temp_c: f64, rh_pct: f64, t_day: f64) -> f64 {
        let tn = self.norm.t_norm(t_day);
        self.alpha_net
            .forward_value(&self.norm.alpha_features(temp_c, rh_pct, tn))
            .expect("modulation network evaluation cannot fail on 3 inputs")
    }
}

/// (t_day, x_obs, x_fit) triples of the trained state network against the
/// observations it was fitted to.
pub fn fitted_series(state: &TrainState, series: &CompositeSeries) -> Result<Vec<(f64, f64, f64)>> {
    let mut rows = Vec::with_capacity(series.len());
    for (&d, &x_obs) in series.day_index.iter().zip(&series.population) {
        let day = d as f64;
        let x_fit = state.state_net.forward_value(&[state.norm.t_norm(day)])?;
        rows.push((day, x_obs, x_fit));
    }
    Ok(rows)
}
