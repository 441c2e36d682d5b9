//! Heat, entropy, particle, energy and free-energy currents in tight-binding
//! open quantum systems.
//!
//! The engine works in natural units (ħ = kB = 1, energies in the configured
//! energy unit). Currents are reported per spinless channel in units of 1/h,
//! i.e. as the bare energy integral `∫dε (...)`.
//!
//! Sign convention, used everywhere: a reservoir current is positive when it
//! flows from the reservoir into the device.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod drive;
pub mod error;
pub mod greens;
pub mod lattice;
pub mod oracle;
pub mod probes;
pub mod quadrature;
pub mod ring;
pub mod stats;
pub mod transport;
pub mod tridiag;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64;
