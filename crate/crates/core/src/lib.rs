//! Probabilistic Richardson extrapolation for quadrature and ODE integration.
//!
//! Classic Richardson/Romberg/Neville extrapolation sits next to a Gaussian
//! process variant that treats the step size `h` as an input and reads off the
//! posterior at `h = 0`. The same machinery drives a Bulirsch-Stoer integrator
//! for Kepler orbits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bsa;
pub mod error;
pub mod extrapolate;
pub mod gpr;
pub mod ode;
pub mod prob_richardson;
pub mod quad;

pub use error::{Error, Result};
pub use quad::{trapezoid_composite, Integrand, StepSample};
