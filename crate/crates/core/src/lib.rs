//! Simulation and estimation toolkit for interrogating fiber Bragg grating
//! sensor arrays with polarization-multiplexed complementary (Golay) codes.
//!
//! Pipeline: [`codes`] builds the sequence sets, [`modulation`] turns them
//! into periodic dual-polarization frames, [`channel`] propagates a frame
//! through the array, [`receiver`] correlates the capture back into per-FBG
//! Jones matrices and phases, and [`analysis`] reduces phase maps to
//! metrics. [`config`] and [`experiment`] wire it together for the CLI.

// `!(x > 0.0)` is how validation rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod channel;
pub mod codes;
pub mod config;
pub mod error;
pub mod experiment;
pub mod modulation;
pub mod receiver;

pub use error::{Error, Result};
