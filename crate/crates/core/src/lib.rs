//! Cardinality-constrained mean-CVaR portfolio optimization.
//!
//! The solver splits the mixed-integer problem into a master problem over
//! asset selections and a convex lower-level problem over portfolio weights,
//! linked by outer-approximation cuts built from dual certificates.

pub mod driver;
pub mod error;
pub mod ingest;
pub mod lower;
pub mod master;
pub mod model;
pub mod numeric;
pub mod oracle;

pub use error::{Error, Result};
