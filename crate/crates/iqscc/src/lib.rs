//! Integrated quantum-sensing / classical-communication (IQSCC) simulator.
//!
//! A full-duplex base station serves one downlink and one uplink user while
//! probing a monostatic radar target with the same transmit signal. This
//! crate models the covariance/SINR level of that system and provides:
//!
//! - [`numerics`] — special functions (normal tail, Marcum Q, modified
//!   Bessel) and Hermitian linear-algebra primitives;
//! - [`scenario`] — array geometry, channel generation, and the interference
//!   and whitening matrices assembled from a declarative configuration;
//! - [`beamforming`] — downlink/uplink/radar SINR evaluation and the
//!   closed-form optimal receive beamformers;
//! - [`sca`] — the sum-rate maximization engine: successive convex
//!   approximation with a purpose-built interior-point subproblem solver;
//! - [`detection`] — radar detection theory: ROC evaluation, protocol
//!   parameters for continuous-wave, coherent-state, and quantum-illumination
//!   radars, thermal-photon model, and Monte-Carlo validation;
//! - [`config`] / [`commands`] — the batch CLI front door that writes
//!   experiment campaigns out as CSV and JSON.
//!
//! The data-parallel paths (Monte-Carlo sharding, seed sweeps, batch
//! evaluation) run on rayon when the default `parallel` feature is enabled
//! and fall back to sequential loops otherwise. Results are identical
//! either way: every parallel reduction is order-independent.

pub mod beamforming;
pub mod commands;
pub mod config;
pub mod detection;
pub mod numerics;
pub mod par;
pub mod sca;
pub mod scenario;
