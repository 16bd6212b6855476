//! Capacity and spectral analysis of MIMO amplify-and-forward multi-hop
//! relay networks.
//!
//! The crate has two halves that are meant to be checked against each other:
//! Monte Carlo estimates over sampled channel realizations
//! ([`montecarlo`], [`experiments`]) and large-system predictions from
//! Stieltjes-transform equations ([`rmt`]). [`verify`] ties them together in
//! a numbered set of end-to-end checks, and [`cli`] exposes everything as the
//! `relaycap` command.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod montecarlo;
pub mod quad;
pub mod rmt;
pub mod spectrum;
pub mod verify;

pub use error::{Error, Result};
