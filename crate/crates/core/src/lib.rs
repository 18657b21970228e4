//! Hybrid 1D-CNN + Bi-LSTM forecasting of hourly PM2.5 series.
//!
//! The crate contains a small dense-tensor training engine ([`nn`], [`optim`]),
//! the forecaster and baselines ([`model`]), the CSV-to-window data pipeline
//! ([`data`]) and the experiment harness ([`eval`]).

pub mod checks;
pub mod data;
pub mod error;
pub mod eval;
mod linalg;
pub mod model;
pub mod nn;
pub mod optim;
pub mod parallel;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
