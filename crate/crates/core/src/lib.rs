//! Simulator and detectors for dual-mode index-modulated 3D-OFDM (DM-IM-3D-OFDM).
//!
//! A subblock of `n` subcarriers carries `p` bits: index bits pick which `k`
//! subcarriers use constellation A (the rest use B), and symbol bits pick the
//! 3D point on every subcarrier. The crate provides:
//!
//! - [`constellation`]: bit budget, index lookup table, 3D constellations and
//!   the subblock mapper/demapper.
//! - [`phy`]: per-entry Rayleigh fading with AWGN, zero-forcing and the
//!   feature matrix consumed by the neural detector.
//! - [`detectors`]: exhaustive maximum-likelihood and log-likelihood-ratio
//!   detectors.
//! - [`ndiff`]: a small dense tensor kernel with hand-written backward passes,
//!   Adam and a finite-difference gradient checker.
//! - [`transd3d`]: the transformer detector, its labels, training loop and
//!   weight files.
//! - [`harness`]: Monte-Carlo BER sweeps, runtime benchmarks, datasets and
//!   the command-line front end.

pub mod constellation;
pub mod cplx;
pub mod detectors;
pub mod error;
pub mod harness;
pub mod ndiff;
pub mod phy;
pub mod seed;
pub mod transd3d;

pub use error::{Error, Result};
