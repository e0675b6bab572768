pub mod error;
pub mod signal_io;

pub use error::{Error, Result};
pub mod embedding;
pub mod optim;
pub mod params_io;
pub mod localizer;
pub mod toy;
pub mod inr;
pub mod stylizer;
pub mod selftest;
pub mod metrics;
pub mod config;
pub mod cli;
