//! Simulation studies for split likelihood ratio tests.
//!
//! Each study takes a plain config struct, fans replications out over the
//! current rayon pool, and returns rows that [`output`] serializes as CSV.
//! Replication `i` of a row always draws from the same random stream, so the
//! output does not depend on the number of worker threads.

pub mod error;
pub mod harness;
pub mod output;
pub mod studies;

pub use error::{SimError, SimResult};
