//! Configuration, persistence and orchestration around `bayescal-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod export;
pub mod io;
pub mod workflow;

pub use error::{AppError, Result};
