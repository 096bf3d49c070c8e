//! Monte Carlo toolkit for the asymptotic behaviour of relativistic
//! diffusions and their boundary laws.

pub mod coupling;
pub mod dudley;
pub mod error;
pub mod exec;
pub mod harmonic;
pub mod minkowski;
pub mod rng;
pub mod rotsym;
pub mod sde;
pub mod stats;
pub mod toy;

pub use error::{Error, Result};
pub use exec::Execution;
