//! Nonlinear least-squares estimation of the logistic parameters A and B
//! (and the implied carrying capacity K = A/B) on the early window, where the
//! observed series tracks a logistic growth curve most closely.
//!
//! A Levenberg–Marquardt loop with a central finite-difference Jacobian runs
//! from a small multi-start grid; logistic fits have local minima, so the
//! best of all starts is returned.

use crate::dynamics::LogisticParams;
use crate::error::{Error, Result};
use crate::ingest::CompositeSeries;

/// Whether the initial value is fitted alongside A and B or pinned to the
/// first observation. The day-1 observation is noisy, so fitting it is the
/// default.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum X0Mode {
    Free,
    FixedFirstObservation,
}

/// Result of a logistic least-squares fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrefitResult {
    pub a_hat: f64,
    pub b_hat: f64,
    pub x0_hat: f64,
    /// Residual sum of squares at the optimum.
    pub sse: f64,
    /// Iterations spent in the winning start.
    pub iterations: usize,
    pub converged: bool,
    /// Set when the normal equations were near singular at the optimum
    /// (e.g. constant data, where only K ≈ c is identified).
    pub ill_conditioned: bool,
}

impl PrefitResult {
    pub fn carrying_capacity(&self) -> f64 {
        self.a_hat / self.b_hat
    }
}

const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_FACTOR: f64 = 10.0;
const MAX_ITERATIONS: usize = 500;
const REL_IMPROVEMENT_TOL: f64 = 1e-10;

/// Fit the classical logistic curve to `series.population` over the
/// inclusive `day_range` of day indices, with `x0` free.
pub fn fit_logistic(series: &CompositeSeries, day_range: (usize, usize)) -> Result<PrefitResult> {
    fit_logistic_with(series, day_range, X0Mode::Free)
}

pub fn fit_logistic_with(
    series: &CompositeSeries,
    day_range: (usize, usize),
    mode: X0Mode,
) -> Result<PrefitResult> {
    let (start, end) = day_range;
    if start > end || end >= series.len() {
        return Err(Error::data(format!(
            "day range {start}..={end} outside series of length {}",
            series.len()
        )));
    }
    let n = end - start + 1;
    if n < 4 {
        return Err(Error::data(format!("need at least 4 points to fit, got {n}")));
    }

    // times measured from the first fitted day
    let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let x_obs: Vec<f64> = series.population[start..=end].to_vec();
    fit_points(&t, &x_obs, mode)
}

/// Core fit on explicit (t, x) points. Exposed for synthetic-data checks.
pub fn fit_points(t: &[f64], x_obs: &[f64], mode: X0Mode) -> Result<PrefitResult> {
    if t.len() != x_obs.len() {
        return Err(Error::Dimension {
            expected: t.len(),
            got: x_obs.len(),
        });
    }
    if t.len() < 4 {
        return Err(Error::data(format!("need at least 4 points to fit, got {}", t.len())));
    }

    let max_obs = x_obs.iter().cloned().fold(0.0f64, f64::max).max(1e-6);
    let first_obs = x_obs[0].max(1e-6);

    // multi-start grid: growth rates × capacity scales
    let mut best: Option<PrefitResult> = None;
    for &a0 in &[0.1, 0.3, 0.5] {
        for &k_scale in &[0.5, 1.0, 2.0] {
            let k0 = k_scale * max_obs;
            let b0 = a0 / k0;
            let run = lm_single_start([a0, b0, first_obs], t, x_obs, mode);
            if let Some(run) = run {
                let better = match &best {
                    None => true,
                    Some(b) => run.sse < b.sse,
                };
                if better {
                    best = Some(run);
                }
            }
        }
    }

    best.ok_or_else(|| Error::non_finite("all least-squares starts diverged"))
}

fn model(p: &[f64; 3], t: f64) -> f64 {
    // closed form without going through LogisticParams validation: the LM
    // loop keeps parameters positive by rejecting steps that leave the domain
    let (a, b, x0) = (p[0], p[1], p[2]);
    let k = a / b;
    k / (1.0 + ((k - x0) / x0) * (-a * t).exp())
}

fn sse_of(p: &[f64; 3], t: &[f64], x: &[f64]) -> f64 {
    t.iter()
        .zip(x)
        .map(|(&ti, &xi)| {
            let r = xi - model(p, ti);
            r * r
        })
        .sum()
}

fn in_domain(p: &[f64; 3]) -> bool {
    p.iter().all(|&v| v > 0.0 && v.is_finite())
}

/// One LM run; returns None when it never reaches a finite objective.
fn lm_single_start(start: [f64; 3], t: &[f64], x: &[f64], mode: X0Mode) -> Option<PrefitResult> {
    let free = match mode {
        X0Mode::Free => 3,
        X0Mode::FixedFirstObservation => 2,
    };
    let mut p = start;
    if !in_domain(&p) {
        return None;
    }
    let mut sse = sse_of(&p, t, x);
    if !sse.is_finite() {
        return None;
    }

    let mut lambda = LAMBDA_INIT;
    let mut converged = false;
    let mut ill_conditioned = false;
    let mut iterations = 0;

    for _ in 0..MAX_ITERATIONS {
        iterations += 1;

        // central finite-difference Jacobian of the residuals r_i = x_i − model(t_i)
        let n = t.len();
        let mut jac = vec![[0.0f64; 3]; n];
        for j in 0..free {
            let h = 1e-6 * p[j].abs().max(1e-6);
            let mut up = p;
            up[j] += h;
            let mut dn = p;
            dn[j] -= h;
            for i in 0..n {
                // d(residual)/d(param) = −d(model)/d(param)
                jac[i][j] = -(model(&up, t[i]) - model(&dn, t[i])) / (2.0 * h);
            }
        }

        // normal equations: (JᵀJ + λ·diag(JᵀJ)) δ = −Jᵀr
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for i in 0..n {
            let r = x[i] - model(&p, t[i]);
            for a in 0..free {
                jtr[a] += jac[i][a] * r;
                for b in 0..free {
                    jtj[a][b] += jac[i][a] * jac[i][b];
                }
            }
        }

        let max_diag = (0..free).map(|i| jtj[i][i]).fold(0.0f64, f64::max);
        if max_diag <= 1e-12 {
            // flat gradient: nothing left to improve
            ill_conditioned = true;
            converged = true;
            break;
        }

        let mut lhs = jtj;
        for i in 0..free {
            lhs[i][i] += lambda * jtj[i][i].max(1e-12 * max_diag);
        }
        let neg_jtr = [-jtr[0], -jtr[1], -jtr[2]];
        let (delta, singular) = solve_sym(lhs, neg_jtr, free);
        if singular {
            ill_conditioned = true;
        }

        let mut candidate = p;
        for j in 0..free {
            candidate[j] += delta[j];
        }

        let cand_sse = if in_domain(&candidate) {
            sse_of(&candidate, t, x)
        } else {
            f64::INFINITY
        };
        if cand_sse.is_finite() && cand_sse < sse {
            let rel_improvement = (sse - cand_sse) / sse.max(f64::MIN_POSITIVE);
            p = candidate;
            sse = cand_sse;
            lambda = (lambda / LAMBDA_FACTOR).max(1e-12);
            if rel_improvement < REL_IMPROVEMENT_TOL {
                converged = true;
                break;
            }
        } else {
            lambda *= LAMBDA_FACTOR;
            if lambda > 1e12 {
                // stalled: cannot find a downhill step
                converged = sse.is_finite();
                break;
            }
        }
    }

    Some(PrefitResult {
        a_hat: p[0],
        b_hat: p[1],
        x0_hat: p[2],
        sse,
        iterations,
        converged,
        ill_conditioned,
    })
}

/// Gaussian elimination with partial pivoting on an up-to-3×3 system.
/// Returns the solution and whether a pivot was (near) singular.
fn solve_sym(mut a: [[f64; 3]; 3], mut b: [f64; 3], n: usize) -> ([f64; 3], bool) {
    let mut singular = false;
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if pivot != col {
            a.swap(col, pivot);
            b.swap(col, pivot);
        }
        let p = a[col][col];
        if p.abs() < 1e-300 {
            singular = true;
            a[col][col] = 1e-300; // keep going with a damped pivot
        }
        let p = a[col][col];
        for row in col + 1..n {
            let f = a[row][col] / p;
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0f64; 3];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
        if !x[col].is_finite() {
            singular = true;
            x[col] = 0.0;
        }
    }
    (x, singular)
}

/// Parameters for downstream use, carrying the optima and α bounds from an
/// existing parameter set.
pub fn to_params(fit: &PrefitResult, template: &LogisticParams) -> Result<LogisticParams> {
    LogisticParams::new(
        fit.a_hat,
        fit.b_hat,
        template.t_star,
        template.h_star,
        template.alpha_min,
        template.alpha_max,
    )
}

/// SSE of a parameter triple against observed points; the quantity the fit
/// minimizes, exposed so callers can audit multi-start claims.
pub fn sse_at(a: f64, b: f64, x0: f64, t: &[f64], x_obs: &[f64]) -> f64 {
    sse_of(&[a, b, x0], t, x_obs)
}
