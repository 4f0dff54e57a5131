//! Probabilistic occupancy-grid fusion from repeated noisy explorations.
//!
//! A robot reading the same environment several times sees each obstacle
//! with probability `p` and each free cell near an obstacle with a
//! position-dependent probability `q(x,y)`. This crate plans how many
//! exploration rounds are needed for a target per-cell map confidence,
//! fuses the collected observation maps by mean-thresholding or maximum
//! likelihood, and validates the plan with a seeded Monte Carlo simulator
//! checked against exact binomial tail probabilities.
//!
//! The crate is `no_std` (with `alloc`); all floating-point math goes
//! through `libm` so results are identical with and without the standard
//! library. IO, file formats, and the command-line front end live in the
//! companion `gridfuse` binary crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod fuse;
pub mod grid;
pub mod plan;
pub mod sensor;
pub mod sim;

pub use error::{Error, Result};
