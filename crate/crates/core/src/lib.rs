#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod attractor;
pub mod basis;
pub mod diagnostics;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod fhn;
pub mod fit;
pub mod nonlinearity;
pub mod propagator;
pub mod quadrature;

pub use basis::{Basis, Norm, SpectralField, State};
pub use error::{Error, HypothesisViolation, Result};
pub use quadrature::ExactGrid;
