//! Error type shared across the crate.

use crate::engine::Waveform;
use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, DldoError>;

#[derive(Debug, Error)]
pub enum DldoError {
    /// A configuration or scenario violates a model invariant.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A non-finite value reached a numeric kernel.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    /// Transfer-function evaluation requested at one of its poles.
    #[error("transfer function evaluated at a pole, z = {z}")]
    Singularity { z: Complex64 },

    /// The output state left the finite domain; carries the waveform up to
    /// the failing edge.
    #[error("simulation diverged at t = {at:.6e} s")]
    Diverged { at: f64, waveform: Box<Waveform> },

    /// Config, scenario, or waveform text could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
