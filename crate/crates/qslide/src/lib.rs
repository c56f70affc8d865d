//! Continuous-time quantum walks on engineered spin chains: wave-packet
//! launching with a tunable linear field (a "quantum slide"), scattering
//! gates built from small graph widgets, and the analysis tooling to
//! score them.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`], [`quad`]: dense symmetric eigensolvers and adaptive
//!   quadrature.
//! - [`jacobi`]: the engineered chains (couplings, fields, spectra).
//! - [`analytic`]: closed forms for the launched packet (amplitude,
//!   momentum, Gaussian parameters, transmission integrals).
//! - [`assembly`]: circuit graphs that splice widgets into wires.
//! - [`scatter`]: plane-wave scattering through a widget.
//! - [`chebyshev`]: sparse polynomial propagator for large circuits.
//! - [`propagate`]: schedules and time evolution.
//! - [`analysis`]: momentum spectra, gate reports, switch-time tuning.
//! - [`cli`]: the experiment runner behind the `qslide` binary.

pub mod analysis;
pub mod analytic;
pub mod assembly;
pub mod chebyshev;
pub mod cli;
pub mod error;
pub mod jacobi;
pub mod linalg;
pub mod propagate;
pub mod quad;
pub mod scatter;
