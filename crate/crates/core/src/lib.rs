//! AFDM and OTFS modulation over doubly selective channels, cyclic
//! delay-Doppler shift (CDDS) transmit-diversity precoding, diversity-order
//! analysis and a reproducible Monte-Carlo BER harness.
//!
//! The matrix and waveform layers are generic over the real scalar (`f32` or
//! `f64`); detection, estimation and statistics run in `f64`.

pub mod afdm;
pub mod analysis;
pub mod cdds;
pub mod channel;
pub mod detect;
pub mod error;
pub mod estimate;
pub mod frame;
pub mod harness;
pub mod matrix;
pub mod otfs;
pub mod rng;
pub mod scalar;
pub mod sparse;

pub use error::{Error, Result};
pub use matrix::{CMat, CVec, Tolerance};
pub use rng::Rng;
pub use scalar::Real;

pub use num_complex::{Complex, Complex32, Complex64};

pub type CMat64 = CMat<f64>;
pub type CVec64 = CVec<f64>;
pub type CMat32 = CMat<f32>;
pub type CVec32 = CVec<f32>;
