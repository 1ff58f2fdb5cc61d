//! Random inductive-limit constructions studied through their classifying
//! invariants.

pub mod error;
pub mod graphs;
pub mod harness;
pub mod ktheory;
pub mod markov;
pub mod ratio;
pub mod simplex;
pub mod uhf;
pub mod villadsen;

pub use error::{Error, Result};
