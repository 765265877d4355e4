//! Behavioral simulator and z-domain stability analyzer for a self-clocked,
//! dual-loop (coarse/fine) digital low-dropout regulator.
//!
//! The crate is organized around the regulator's moving parts:
//!
//! - [`plant`]: the output node (PMOS current arrays, load capacitor, load),
//!   advanced in closed form between clock edges;
//! - [`controller`]: comparator, bidirectional shift registers, window peak
//!   detector with coarse/fine arbitration, and the loop clock;
//! - [`analysis`]: closed-loop poles, stability criterion, and pole-locus
//!   sweeps of the discrete-time small-signal model;
//! - [`engine`]: the clock-edge event loop plus settling/ripple/undershoot/
//!   efficiency metrology;
//! - [`config`] and [`io`]: the plain-text run formats and the CSV/JSON
//!   artifacts.

pub mod analysis;
pub mod config;
pub mod controller;
pub mod engine;
mod error;
pub mod io;
pub mod plant;

pub use error::{DldoError, Result};
