//! Distributed optimization with independent block sampling: every worker
//! computes and sends only a random subset of coordinate blocks of its local
//! gradient estimate, and a parameter server averages the sparse proposals.
//!
//! The crate simulates the `n`-worker execution deterministically, accounts
//! for communicated blocks, and ships oracles for checking expected-value
//! identities and convergence rates.

pub mod blocks;
pub mod data_io;
pub mod error;
pub mod linalg;
pub mod methods;
pub mod oracles;
pub mod problems;
pub mod prox;
pub mod rng;
pub mod scalar;
pub mod simulator;

pub use blocks::{BlockPartition, BlockSample, CoordSet};
pub use error::{Error, Result};
pub use methods::{MethodConfig, MethodKind, StepsizeRule};
pub use problems::Problem;
pub use prox::Regularizer;
pub use scalar::Scalar;
pub use simulator::{run_asynchronous, run_synchronous, DelaySchedule, Trace, TraceRecord};
