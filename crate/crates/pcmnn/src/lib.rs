//! Fitting and forecasting of pest population dynamics.
//!
//! The model is a climate-coupled logistic ODE: the baseline growth rate A is
//! perturbed by a latent modulation function α(T, H, t) of temperature,
//! humidity and time, while a density term B·x² caps growth. Two networks are
//! trained jointly against a composite loss — a data term on observed daily
//! counts and an ODE-residual term at random collocation points — so the
//! trajectory and the modulation function are recovered together.
//!
//! Crate layout:
//!
//! - [`ingest`]: raw monitoring CSVs → windowed, composited, normalized series
//! - [`autodiff`]: reverse-mode tape, dense networks, Adam
//! - [`dynamics`]: logistic models, RK4 integration, climate interpolation
//! - [`prefit`]: nonlinear least-squares estimation of A and B
//! - [`pinn`]: the joint trainer and the inferred modulation series
//! - [`evaluate`]: metrics, ODE back-solve verification, forecasting
//! - [`synth`]: synthetic scenarios with known ground truth
//! - [`report`]: CSV and plain-text output formats

pub mod autodiff;
pub mod dynamics;
pub mod error;
pub mod evaluate;
pub mod ingest;
pub mod pinn;
pub mod prefit;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
