//! Simulation and security analysis of two four-party star-network
//! entanglement-assisted QKD protocols.
//!
//! A hub party distributes one qubit of each of three two-qubit states to
//! three edge parties. Security rests on a two-step check: a nonlocality
//! witness on broadcast rounds — either the trilocal full-network-
//! nonlocality inequality or Bell-CHSH violation on every link — followed by
//! a QBER comparison against the critical value derived for that witness.
//! Every criterion reduces to the two largest singular values of the three
//! link correlation tensors; the `oracle` module re-derives each critical
//! value numerically by constrained grid search.
//!
//! Modules:
//! - [`qstate`]: two-qubit density operators, Bloch form, singular values
//! - [`measurement`]: GHZ/qubit bases, exact network statistics, sampling
//! - [`trilocal`]: the inequality, its quantum bound, CHSH, optimizers
//! - [`qber`]: exact and closed-form error rates
//! - [`security`]: criteria, thresholds, state classification, comparisons
//! - [`oracle`]: grid-search verification of every threshold
//! - [`protocol`]: end-to-end Monte-Carlo runs
//! - [`strategy`]: the witness-strategy registry the runs select from

pub mod error;
pub mod measurement;
pub mod oracle;
pub mod protocol;
pub mod qber;
pub mod qstate;
pub mod security;
pub mod strategy;
pub mod trilocal;

pub use error::{Error, Result};
