//! Numerical workbench for covariant representations of C*-dynamical systems
//! `(A, α)` at finite truncation: coisometric extensions, minimal isometric
//! dilations, unitary dilations, transfer operators and unitary-equivalence
//! certificates, each paired with residual-based verification.

pub mod algebra;
pub mod blocks;
pub mod covariant;
pub mod cpmaps;
pub mod dilation;
pub mod dynamics;
pub mod equivalence;
pub mod error;
pub mod extension;
pub mod fixtures;
pub mod numerics;
pub mod tower;
pub mod workbench;

pub use error::{Error, Result};
pub use numerics::Tolerance;
