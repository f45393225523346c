//! Numerical laboratory for Shintani invariants of real quadratic fields whose
//! fundamental unit has a length-one minus continued fraction.

pub mod chebyshev;
pub mod cone;
pub mod error;
pub mod extrapolate;
pub mod ideal_expr;
pub mod invariants;
pub mod numerics;
pub mod qseries;
pub mod quadratic_field;
pub mod recognition;

pub use error::{Error, Result};
