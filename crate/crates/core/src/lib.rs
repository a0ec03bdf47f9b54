//! Time-resolved qubit sensing with finite-speed control rotations.
//!
//! Closed-form sensitivity, kernel and transfer-function models
//! ([`analytic`]), exact rotating-frame propagation ([`sequence`]), a
//! laboratory-frame NV spin-1 simulator ([`labframe`]), numerical kernel and
//! Bode extraction ([`response`]) and optimality scans ([`optimize`]).

pub mod analytic;
pub mod error;
pub mod io;
pub mod labframe;
pub mod numeric;
pub mod optimize;
pub mod response;
pub mod sequence;
pub mod spinlin;

pub use error::{Error, Result};
pub use spinlin::{NumericPolicy, Spin, SpinMatrix, StateVector, C64};
