//! Link-level simulation and analytic bit-error-rate modeling for image sensor
//! communication with a rotating (propeller) LED transmitter.
//!
//! The pipeline renders the blinking light trail of one LED onto a virtual
//! sensor ([`render`]), converts received energy to pixel values
//! ([`camera`]), predicts the per-segment BER under a finite-neighborhood
//! ISI model ([`isi`]), cross-checks it by Monte Carlo ([`mc`]) and picks the
//! per-bit control angle under a BER target ([`design`]).

pub mod camera;
pub mod config;
pub mod design;
pub mod error;
pub mod grid;
pub mod io;
pub mod isi;
pub mod mc;
pub mod model;
pub mod render;
pub mod rng;

pub use config::SystemConfig;
pub use error::{Error, Result};
pub use model::TrailModel;
