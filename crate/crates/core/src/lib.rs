//! Desk-scale simulation and optimization toolkit for a MIMO-OFDM
//! integrated-sensing-and-communication downlink.
//!
//! The pipeline covers:
//! - frequency-domain waveform, channel, and target-echo synthesis
//!   ([`waveform`]),
//! - three-stage DFT target estimation with peak detection ([`sensing`]),
//! - compressive-sensing-assisted estimation from a reduced subcarrier set
//!   ([`sparse`]),
//! - transmit beamforming that maximizes multiuser sum-rate under sensing
//!   SNR and power constraints, solved by an MM/FP/ADMM iteration with
//!   closed-form updates ([`solver`]),
//! - a seeded Monte-Carlo experiment harness with CSV output ([`harness`]).

pub mod config;
pub mod error;
pub mod harness;
pub mod physics;
pub mod rng;
pub mod sensing;
pub mod solver;
pub mod sparse;
pub mod tensorio;
pub mod waveform;

pub use config::{SystemConfig, Target, TargetScene};
pub use error::{Error, Result};
