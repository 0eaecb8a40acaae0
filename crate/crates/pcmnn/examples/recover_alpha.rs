//! End-to-end demonstration on the canonical synthetic benchmark: generate
//! noisy observations from a known sinusoidal modulation, train the joint
//! model, then score how well the latent modulation was recovered.
//!
//! ```sh
//! cargo run --release -p pcmnn --example recover_alpha [iterations] [lr] [n_colloc] [lambda_ode]
//! ```

use std::time::Instant;

use pcmnn::evaluate::verify_backsolve;
use pcmnn::pinn::{train, TrainConfig};
use pcmnn::synth::{generate, score_recovery, Scenario};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let iterations: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let learning_rate: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-2);
    let n_colloc: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(100);
    let lambda_ode: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1.0);

    let scenario = Scenario::benchmark();
    let data = generate(&scenario).unwrap();
    println!(
        "benchmark scenario: {} days, x0 = {}, noise sd = {}, seed = {}",
        scenario.days, scenario.x0, scenario.noise_sd, scenario.seed
    );

    let config = TrainConfig {
        iterations,
        learning_rate,
        n_colloc,
        lambda_ode,
        ..TrainConfig::default()
    };
    println!(
        "training: {iterations} iterations, lr = {learning_rate}, {n_colloc} collocation points, lambda_ode = {lambda_ode}"
    );
    let start = Instant::now();
    let state = train(&data.series, &scenario.params, &config).unwrap();
    let elapsed = start.elapsed();
    println!(
        "trained in {:.1}s ({:.2} ms/iteration)",
        elapsed.as_secs_f64(),
        elapsed.as_secs_f64() * 1e3 / iterations as f64
    );

    for (i, rec) in state.loss_history.iter().enumerate() {
        if i % (iterations / 10).max(1) == 0 || i + 1 == iterations {
            println!(
                "  iter {i:>6}: loss_data = {:>12.4}, loss_ode = {:>12.4}, total = {:>12.4}",
                rec.loss_data, rec.loss_ode, rec.total
            );
        }
    }

    let recovery = score_recovery(&state, &data).unwrap();
    println!("alpha RMSE vs truth:  {:.4}", recovery.alpha_rmse);
    println!("fit vs noiseless:     r2 = {:?}, mse = {:.4}", recovery.fit.r2, recovery.fit.mse);

    // fit vs the noisy observations it trained on
    let obs_fit: Vec<f64> = data
        .series
        .day_index
        .iter()
        .map(|&d| state.state_net.forward_value(&[state.norm.t_norm(d as f64)]).unwrap())
        .collect();
    let m = pcmnn::evaluate::metrics(pcmnn::evaluate::MetricsLabel::Fit, &data.series.population, &obs_fit).unwrap();
    println!("fit vs observations:  r2 = {:?}", m.r2);

    let back = verify_backsolve(&state, &data.series, 0.01).unwrap();
    let sup_nn: f64 = obs_fit.iter().cloned().fold(0.0, f64::max);
    let sup_gap: f64 = back
        .trajectory
        .population
        .iter()
        .zip(&obs_fit)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("back-solve r2 vs obs: {:?}", back.metrics.r2);
    println!("back-solve sup gap vs state net: {:.2}% of sup-norm", 100.0 * sup_gap / sup_nn);

    if std::env::var("PCMNN_DUMP").is_ok() {
        println!("day   x_true   x_obs    x_nn     x_back   alpha_true alpha_hat");
        let grid: Vec<f64> = (0..scenario.days).map(|i| i as f64).collect();
        let alpha_series = pcmnn::pinn::extract_alpha(&state, &data.climate, &grid).unwrap();
        for i in 0..scenario.days {
            println!(
                "{:>3} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>10.4} {:>9.4}",
                i,
                data.x_true[i],
                data.series.population[i],
                obs_fit[i],
                back.trajectory.population[i],
                data.alpha_true[i],
                alpha_series.alpha_hat[i]
            );
        }
    }
}
