//! Online false discovery rate control.
//!
//! Streaming procedures (LORD variants, SAFFRON, LOND, Bonferroni-type rules) are
//! incremental state machines over a coefficient table. Offline baselines,
//! p-value kernels and a seeded Monte Carlo harness sit alongside them.

pub mod baselines;
mod error;
pub mod io;
pub mod procedures;
pub mod scenarios;
pub mod sequences;
pub mod stattests;
mod sum;

pub use error::{Error, Result};
