//! Numerical direct and inverse scattering for the AKNS (Zakharov–Shabat)
//! system and for the one-dimensional Schrödinger operator, with the
//! soliton closed forms and a decay/dispersion uncertainty certifier.
//!
//! The crate is `no_std` and only needs `alloc`. The `parallel` feature
//! spreads the per-λ and per-x loops over a rayon pool.

#![no_std]
// `Float` supplies the f64 math methods without std; once anything in the
// build links std (dev-dependencies do) the import becomes redundant.
#![allow(unused_imports)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod certifier;
pub mod error;
pub mod evolution;
pub mod linalg;
pub mod marchenko;
pub mod model;
mod par;
pub mod quad;
pub mod schrodinger_scattering;
pub mod solitons;
pub mod zs_scattering;

pub use error::{Error, Result};
pub use model::*;

pub use num_complex::Complex64;

/// Imaginary unit.
pub const I: Complex64 = Complex64::new(0.0, 1.0);
