//! Versioned plain-text checkpoint format.
//!
//! Layout (`pcmnn-checkpoint v1`):
//!
//! ```text
//! pcmnn-checkpoint v1
//! [config]      seed, iterations, n_colloc, lambda_*, learning_rate,
//!               colloc_resample, converged
//! [params]      a, b, t_star, h_star, alpha_min, alpha_max
//! [normalization] day_start, day_span, temp_dev_scale, hum_dev_scale
//! [state_net]   layers = <widths>; output = identity|bounded <lo> <hi>;
//!               then per layer `weights <l> = …` (row-major) and `biases <l> = …`
//! [alpha_net]   same shape as [state_net]
//! [loss_history] one `loss_data loss_ode total` line per iteration
//! ```
//!
//! Floats are written with Rust's shortest-roundtrip formatting, so a
//! save/load cycle reproduces every value bit-exactly. Optimizer moments are
//! not part of the checkpoint; loading restores a fresh optimizer with the
//! recorded learning rate (checkpoints are for evaluation and forecasting,
//! not for resuming the exact optimizer trajectory).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{CollocResample, LossRecord, TrainConfig, TrainState};
use crate::autodiff::{AdamState, MlpNetwork, OutputMap};
use crate::dynamics::LogisticParams;
use crate::error::{Error, Result};
use crate::ingest::NormalizationSpec;

const MAGIC: &str = "pcmnn-checkpoint v1";

pub fn save_checkpoint(state: &TrainState, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, render(state)).map_err(Error::from)
}

fn render(state: &TrainState) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");

    let _ = writeln!(out, "[config]");
    let _ = writeln!(out, "seed = {}", state.seed);
    let _ = writeln!(out, "iterations = {}", state.config.iterations);
    let _ = writeln!(out, "n_colloc = {}", state.config.n_colloc);
    let _ = writeln!(out, "lambda_data = {}", state.config.lambda_data);
    let _ = writeln!(out, "lambda_ode = {}", state.config.lambda_ode);
    let _ = writeln!(out, "learning_rate = {}", state.config.learning_rate);
    let resample = match state.config.colloc_resample {
        CollocResample::PerIteration => "per-iteration",
        CollocResample::FixedOnce => "fixed-once",
    };
    let _ = writeln!(out, "colloc_resample = {resample}");
    let _ = writeln!(out, "converged = {}", state.converged);

    let _ = writeln!(out, "[params]");
    let _ = writeln!(out, "a = {}", state.params.a);
    let _ = writeln!(out, "b = {}", state.params.b);
    let _ = writeln!(out, "t_star = {}", state.params.t_star);
    let _ = writeln!(out, "h_star = {}", state.params.h_star);
    let _ = writeln!(out, "alpha_min = {}", state.params.alpha_min);
    let _ = writeln!(out, "alpha_max = {}", state.params.alpha_max);

    let _ = writeln!(out, "[normalization]");
    let _ = writeln!(out, "day_start = {}", state.norm.day_start);
    let _ = writeln!(out, "day_span = {}", state.norm.day_span);
    let _ = writeln!(out, "temp_dev_scale = {}", state.norm.temp_dev_scale);
    let _ = writeln!(out, "hum_dev_scale = {}", state.norm.hum_dev_scale);

    render_net(&mut out, "state_net", &state.state_net);
    render_net(&mut out, "alpha_net", &state.alpha_net);

    let _ = writeln!(out, "[loss_history]");
    for rec in &state.loss_history {
        let _ = writeln!(out, "{} {} {}", rec.loss_data, rec.loss_ode, rec.total);
    }
    out
}

fn render_net(out: &mut String, name: &str, net: &MlpNetwork) {
    let _ = writeln!(out, "[{name}]");
    let widths: Vec<String> = net.layer_sizes().iter().map(|w| w.to_string()).collect();
    let _ = writeln!(out, "layers = {}", widths.join(" "));
    match net.output_map() {
        OutputMap::Identity => {
            let _ = writeln!(out, "output = identity");
        }
        OutputMap::Bounded { lo, hi } => {
            let _ = writeln!(out, "output = bounded {lo} {hi}");
        }
    }
    // flat order is weights-then-biases per layer; keep the file grouped the
    // same way so the layout is self-describing
    let flat = net.flat_params();
    let sizes = net.layer_sizes();
    let mut at = 0;
    for l in 0..sizes.len() - 1 {
        let nw = sizes[l] * sizes[l + 1];
        let nb = sizes[l + 1];
        let ws: Vec<String> = flat[at..at + nw].iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "weights {l} = {}", ws.join(" "));
        at += nw;
        let bs: Vec<String> = flat[at..at + nb].iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "biases {l} = {}", bs.join(" "));
        at += nb;
    }
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<TrainState> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::data(format!("cannot read checkpoint {}: {e}", path.display())))?;
    parse(&text)
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    peeked: Option<(u64, &'a str)>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            iter: text.lines().enumerate(),
            peeked: None,
        }
    }

    fn next(&mut self) -> Option<(u64, &'a str)> {
        if let Some(p) = self.peeked.take() {
            return Some(p);
        }
        for (i, line) in self.iter.by_ref() {
            let line = line.trim();
            if !line.is_empty() {
                return Some((i as u64 + 1, line));
            }
        }
        None
    }

    fn peek(&mut self) -> Option<(u64, &'a str)> {
        if self.peeked.is_none() {
            self.peeked = self.next();
        }
        self.peeked
    }
}

fn parse_err(line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: msg.into(),
    }
}

fn parse(text: &str) -> Result<TrainState> {
    let mut lines = Lines::new(text);
    match lines.next() {
        Some((_, l)) if l == MAGIC => {}
        Some((n, l)) => return Err(parse_err(n, format!("expected `{MAGIC}`, got `{l}`"))),
        None => return Err(parse_err(0, "empty checkpoint")),
    }

    let mut config = TrainConfig::default();
    let mut converged = false;
    expect_section(&mut lines, "config")?;
    for (key, value, n) in section_pairs(&mut lines)? {
        match key.as_str() {
            "seed" => config.seed = parse_num(&value, n)? as u64,
            "iterations" => config.iterations = parse_num(&value, n)? as usize,
            "n_colloc" => config.n_colloc = parse_num(&value, n)? as usize,
            "lambda_data" => config.lambda_data = parse_num(&value, n)?,
            "lambda_ode" => config.lambda_ode = parse_num(&value, n)?,
            "learning_rate" => config.learning_rate = parse_num(&value, n)?,
            "colloc_resample" => {
                config.colloc_resample = match value.as_str() {
                    "per-iteration" => CollocResample::PerIteration,
                    "fixed-once" => CollocResample::FixedOnce,
                    other => return Err(parse_err(n, format!("unknown resample mode `{other}`"))),
                }
            }
            "converged" => {
                converged = value
                    .parse::<bool>()
                    .map_err(|_| parse_err(n, "converged must be true/false"))?
            }
            other => return Err(parse_err(n, format!("unknown config key `{other}`"))),
        }
    }

    expect_section(&mut lines, "params")?;
    let mut p = [f64::NAN; 6];
    for (key, value, n) in section_pairs(&mut lines)? {
        let slot = match key.as_str() {
            "a" => 0,
            "b" => 1,
            "t_star" => 2,
            "h_star" => 3,
            "alpha_min" => 4,
            "alpha_max" => 5,
            other => return Err(parse_err(n, format!("unknown params key `{other}`"))),
        };
        p[slot] = parse_num(&value, n)?;
    }
    let params = LogisticParams::new(p[0], p[1], p[2], p[3], p[4], p[5])?;

    expect_section(&mut lines, "normalization")?;
    let mut norm = NormalizationSpec::new(0.0, 1.0, params.t_star, params.h_star)?;
    for (key, value, n) in section_pairs(&mut lines)? {
        let v = parse_num(&value, n)?;
        match key.as_str() {
            "day_start" => norm.day_start = v,
            "day_span" => norm.day_span = v,
            "temp_dev_scale" => norm.temp_dev_scale = v,
            "hum_dev_scale" => norm.hum_dev_scale = v,
            other => return Err(parse_err(n, format!("unknown normalization key `{other}`"))),
        }
    }

    let state_net = parse_net(&mut lines, "state_net")?;
    let alpha_net = parse_net(&mut lines, "alpha_net")?;

    expect_section(&mut lines, "loss_history")?;
    let mut loss_history = Vec::new();
    while let Some((n, line)) = lines.peek() {
        if line.starts_with('[') {
            break;
        }
        lines.next();
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|t| parse_num(t, n))
            .collect::<Result<_>>()?;
        if nums.len() != 3 {
            return Err(parse_err(n, "loss history line must have 3 values"));
        }
        loss_history.push(LossRecord {
            loss_data: nums[0],
            loss_ode: nums[1],
            total: nums[2],
        });
    }

    let n_total = state_net.param_count() + alpha_net.param_count();
    Ok(TrainState {
        adam: AdamState::new(n_total, config.learning_rate),
        iteration: config.iterations,
        seed: config.seed,
        state_net,
        alpha_net,
        loss_history,
        config,
        params,
        norm,
        converged,
    })
}

fn expect_section(lines: &mut Lines<'_>, name: &str) -> Result<()> {
    match lines.next() {
        Some((_, l)) if l == format!("[{name}]") => Ok(()),
        Some((n, l)) => Err(parse_err(n, format!("expected section [{name}], got `{l}`"))),
        None => Err(parse_err(0, format!("missing section [{name}]"))),
    }
}

/// Collect `key = value` pairs until the next section header.
fn section_pairs(lines: &mut Lines<'_>) -> Result<Vec<(String, String, u64)>> {
    let mut pairs = Vec::new();
    while let Some((n, line)) = lines.peek() {
        if line.starts_with('[') {
            break;
        }
        lines.next();
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(n, format!("expected `key = value`, got `{line}`")))?;
        pairs.push((key.trim().to_string(), value.trim().to_string(), n));
    }
    Ok(pairs)
}

fn parse_num(token: &str, line: u64) -> Result<f64> {
    token
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("not a number: `{token}`")))
}

fn parse_net(lines: &mut Lines<'_>, name: &str) -> Result<MlpNetwork> {
    expect_section(lines, name)?;
    let pairs = section_pairs(lines)?;
    let mut layers: Option<Vec<usize>> = None;
    let mut output = OutputMap::Identity;
    let mut weight_rows: Vec<(usize, Vec<f64>, u64)> = Vec::new();
    let mut bias_rows: Vec<(usize, Vec<f64>, u64)> = Vec::new();

    for (key, value, n) in pairs {
        if key == "layers" {
            let widths: Vec<usize> = value
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| parse_err(n, format!("bad layer width `{t}`")))
                })
                .collect::<Result<_>>()?;
            layers = Some(widths);
        } else if key == "output" {
            let mut toks = value.split_whitespace();
            match toks.next() {
                Some("identity") => output = OutputMap::Identity,
                Some("bounded") => {
                    let lo = parse_num(toks.next().unwrap_or(""), n)?;
                    let hi = parse_num(toks.next().unwrap_or(""), n)?;
                    output = OutputMap::Bounded { lo, hi };
                }
                other => return Err(parse_err(n, format!("unknown output map `{other:?}`"))),
            }
        } else if let Some(idx) = key.strip_prefix("weights ") {
            let l: usize = idx.trim().parse().map_err(|_| parse_err(n, "bad weights index"))?;
            let vals = value
                .split_whitespace()
                .map(|t| parse_num(t, n))
                .collect::<Result<Vec<f64>>>()?;
            weight_rows.push((l, vals, n));
        } else if let Some(idx) = key.strip_prefix("biases ") {
            let l: usize = idx.trim().parse().map_err(|_| parse_err(n, "bad biases index"))?;
            let vals = value
                .split_whitespace()
                .map(|t| parse_num(t, n))
                .collect::<Result<Vec<f64>>>()?;
            bias_rows.push((l, vals, n));
        } else {
            return Err(parse_err(n, format!("unknown key `{key}` in [{name}]")));
        }
    }

    let layers = layers.ok_or_else(|| parse_err(0, format!("[{name}] missing `layers`")))?;
    let mut net = MlpNetwork::zeros(&layers, output)?;
    let mut flat = vec![0.0; net.param_count()];
    let mut at = 0;
    for l in 0..layers.len() - 1 {
        let nw = layers[l] * layers[l + 1];
        let nb = layers[l + 1];
        let (_, ws, n) = weight_rows
            .iter()
            .find(|(i, _, _)| *i == l)
            .ok_or_else(|| parse_err(0, format!("[{name}] missing weights {l}")))?;
        if ws.len() != nw {
            return Err(parse_err(*n, format!("weights {l}: expected {nw} values, got {}", ws.len())));
        }
        flat[at..at + nw].copy_from_slice(ws);
        at += nw;
        let (_, bs, n) = bias_rows
            .iter()
            .find(|(i, _, _)| *i == l)
            .ok_or_else(|| parse_err(0, format!("[{name}] missing biases {l}")))?;
        if bs.len() != nb {
            return Err(parse_err(*n, format!("biases {l}: expected {nb} values, got {}", bs.len())));
        }
        flat[at..at + nb].copy_from_slice(bs);
        at += nb;
    }
    net.set_flat_params(&flat)?;
    Ok(net)
}
