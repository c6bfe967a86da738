//! Core algorithms for semi-analytical transient simulation of power systems.
//!
//! The simulation advances device differential equations with truncated
//! time-power-series solutions rebuilt every window, couples devices to the
//! network through polar-form bus-voltage polynomials (dynamic buses), and
//! sizes windows with an error-rate upper bound. Fixed-step forward-Euler and
//! RK4 integrators share the same network-interface code path and serve as
//! built-in references.
//!
//! The crate is `no_std`-compatible (requires `alloc`); enable the `libm`
//! feature instead of `std` for builds without the standard library.

#![cfg_attr(not(feature = "std"), no_std)]

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("sassim-core needs either the `std` or the `libm` feature");

extern crate alloc;

pub mod devices;
pub mod engine;
pub mod exec;
pub mod math;
pub mod model;
pub mod network;
pub mod series;
pub mod stepper;

pub use num_complex::Complex64;
