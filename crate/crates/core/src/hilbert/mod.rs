//! Labeled tensor-product Hilbert spaces: layouts, state vectors, operators
//! and density operators with partial traces.

mod density;
pub(crate) mod kernel;
mod layout;
mod operator;
mod state;

pub use density::DensityOperator;
pub use layout::{Subsystem, SubsystemLayout};
pub use operator::{LinearOperator, OperatorKind};
pub use state::StateVector;

pub use num_complex::Complex64 as C64;

use std::collections::BTreeMap;

use crate::error::Result;

pub fn make_state<S: AsRef<str>>(layout: SubsystemLayout, terms: &[(Vec<S>, C64)]) -> Result<StateVector> {
    StateVector::make(layout, terms)
}

pub fn tensor(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    a.tensor(b)
}

pub fn inner(a: &StateVector, b: &StateVector) -> Result<C64> {
    a.inner(b)
}

pub fn apply(op: &LinearOperator, state: &StateVector) -> Result<StateVector> {
    op.apply(state)
}

pub fn density(state: &StateVector) -> DensityOperator {
    DensityOperator::pure(state)
}

pub fn partial_trace(rho: &DensityOperator, keep: &[&str]) -> Result<DensityOperator> {
    rho.partial_trace(keep)
}

pub fn group(
    layout: &SubsystemLayout,
    parts: &[&str],
    new_name: &str,
    label_map: &BTreeMap<Vec<String>, String>,
) -> Result<SubsystemLayout> {
    layout.group(parts, new_name, label_map)
}

/// Shorthand for a real amplitude.
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `sqrt(p/q)` as a real amplitude.
pub fn sqrt_frac(p: f64, q: f64) -> C64 {
    C64::new((p / q).sqrt(), 0.0)
}
