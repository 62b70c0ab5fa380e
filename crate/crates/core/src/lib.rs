//! Spectral-efficiency analysis of spatial path index modulation (SPIM) over
//! mmWave hybrid beamforming, against conventional single-beam transmission.
//!
//! Start at [`capacity`] for the closed forms, [`montecarlo`] for the
//! simulation reference, [`conditions`] for the superiority tests and
//! [`experiment`] for sweeps and figure data.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamforming;
pub mod capacity;
pub mod channel;
pub mod conditions;
pub mod error;
pub mod experiment;
pub mod montecarlo;
pub mod numerics;

pub use error::{Error, Result};
