//! Linear dynamical topic model (LDTM) and temporal social correlation.
//!
//! The crate learns per-user topic distributions over time from
//! timestamped adoption data. Topic assignments are resampled by collapsed
//! Gibbs sampling, Dirichlet parameters are propagated between time steps
//! by a diagonal dynamics matrix, and the decay entries of that matrix are
//! fitted per user by projected gradient descent on the divergence between
//! expected posterior and expected prior topic distributions. The learned
//! series feed a pair of nested autoregressions whose F statistic measures
//! directed temporal social correlation between interacting users.
//!
//! Module map:
//!
//! * [`corpus`]: event ingestion, vocabulary pruning, interactions, holdouts
//! * [`ldtm`]: the Gibbs / Kalman inference loop
//! * [`dynamics`]: decay estimation
//! * [`granger`]: restricted and unrestricted regressions, F statistic
//! * [`eval`]: held-out likelihood, ratio analysis, convergence traces
//! * [`synth`]: generative oracles for testing
//! * [`cli`]: command line orchestration

pub mod cli;
pub mod corpus;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod granger;
pub mod ldtm;
pub mod rng;
pub mod synth;

pub use error::{Error, ErrorCategory, Result};
