// debug probe for the 25-day holdout protocol (criterion 6)
use pcmnn::evaluate::forecast;
use pcmnn::pinn::{extract_alpha, train, train_with_domain, CollocResample, TrainConfig};
use pcmnn::synth::{generate, score_forecast, Scenario};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let iterations: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(8e-3);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(42);
    let full_domain = args.get(4).map(|s| s == "full").unwrap_or(false);

    let scenario = Scenario::benchmark();
    let data = generate(&scenario).unwrap();
    let train_series = data.series.prefix(25);
    let config = TrainConfig {
        iterations,
        learning_rate: lr,
        n_colloc: 100,
        lambda_data: 1.0,
        lambda_ode: 1.0,
        seed,
        colloc_resample: CollocResample::PerIteration,
    };
    let state = if full_domain {
        println!("training with the 30-day computational domain");
        train_with_domain(&train_series, &data.climate, (0.0, 29.0), &scenario.params, &config).unwrap()
    } else {
        train(&train_series, &scenario.params, &config).unwrap()
    };
    for (i, rec) in state.loss_history.iter().enumerate() {
        if i % 1000 == 0 || i + 1 == iterations {
            println!("iter {i:>6}: data {:>12.4} ode {:>12.4}", rec.loss_data, rec.loss_ode);
        }
    }

    let traj = forecast(&state, train_series.population[0], &data.climate, 29, 0.01).unwrap();
    let m = score_forecast(&traj, &data, 25).unwrap();
    println!("holdout R2: {:?}", m.r2);

    // anchored protocol: start at the observed value of the first held-out day
    let anchored = pcmnn::evaluate::forecast_from(&state, data.series.population[25], 25.0, &data.climate, 4, 0.01).unwrap();
    let ma = score_forecast(&anchored, &data, 25).unwrap();
    println!("anchored holdout R2: {:?} (n={})", ma.r2, ma.n);

    let grid: Vec<f64> = (0..30).map(|i| i as f64).collect();
    let alpha = extract_alpha(&state, &data.climate, &grid).unwrap();
    println!("day  x_true   x_obs    x_nn     x_fore   a_true   a_hat");
    for i in 0..30 {
        let x_nn = state.state_net.forward_value(&[state.norm.t_norm(i as f64)]).unwrap();
        println!(
            "{:>3} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.4} {:>8.4}",
            i,
            data.x_true[i],
            data.series.population[i],
            x_nn,
            traj.population[i],
            data.alpha_true[i],
            alpha.alpha_hat[i]
        );
    }
}
