//! Seedable simulator for an ISAC downlink jammed by a DISCO RIS.
//!
//! A multi-antenna base station serves `K` users with one waveform that also
//! illuminates a sensing target. A randomly reconfigured surface ages the
//! channel between pilot and data phases, adding interference the base
//! station cannot precode against. The crate covers the geometry and channel
//! draws, the strict-sensing and trade-off waveform solvers, the rate
//! metrics with their jamming lower bound, MUSIC-based sensing, and the
//! seeded sweeps that tie them together.

// negated comparisons are how NaN inputs get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod cli;
pub mod comm_metrics;
pub mod config;
pub mod dris;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod scene;
pub mod sensing;
pub mod waveform;

pub use error::{Error, Result};
