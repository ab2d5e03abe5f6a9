//! Numerical core for simulating measurement chains in Wigner's-friend
//! style protocols: labeled state vectors, pre-measurement and environment
//! couplings, decompositions, and agent-certainty inference.

pub mod decomposition;
pub mod error;
pub mod experiment;
pub mod hilbert;
pub mod measurement;

pub use error::{Error, Result};

// Amplitude vectors and matrices in the public API are nalgebra types.
pub use nalgebra;

/// Entrywise tolerance for amplitudes, matrix entries and probabilities.
pub const AMPLITUDE_TOL: f64 = 1e-9;

/// Allowed norm drift per operation before a state is renormalized.
pub const NORM_DRIFT_TOL: f64 = 1e-12;

/// Probabilities (and squared coefficients) below this are exactly zero.
pub const PROBABILITY_FLOOR: f64 = 1e-12;
