//! Simulation, identification, and predistortion of pulse-encoded
//! all-digital transmitters.
//!
//! The reference chain runs `x -> P -> x_d -> upconvert -> ZOH -> G -> demod -> x_hat`
//! on periodic records. The identified model is a bank of monomial
//! regressors at the encoder rate followed by complex FIR filters and
//! decimation by `K`.

pub mod align;
pub mod config;
pub mod demod;
pub mod dpd;
pub mod encoder;
pub mod error;
pub mod experiment;
pub mod fft;
pub mod ident;
pub mod io;
pub mod metrics;
pub mod model;
pub mod monomial;
pub mod passband;
pub mod signal;
pub mod stimulus;

pub use error::{Error, Result};
