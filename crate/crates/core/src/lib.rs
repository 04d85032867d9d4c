//! Variational counterdiabatic driving for spin systems.
//!
//! Gauge potentials are built as nested-commutator series whose coefficients
//! minimize a Hilbert–Schmidt action, then realized as fast periodic
//! modulations of the available couplings. Everything is checked by direct
//! time evolution.

pub mod agp;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod floquet;
pub mod interp;
pub mod models;
pub mod operator;

pub use error::{Error, Result};
