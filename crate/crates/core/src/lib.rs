//! Payoff-based learning of variational generalized Nash equilibria in
//! strongly monotone games with jointly linear coupling constraints.
//!
//! * [`game`] and [`builtin`]: games, costs, pseudo-gradients, constraints.
//! * [`augmented`]: the dual-extended game and its (regularized) operator.
//! * [`oracle`]: exact solvers used as ground truth.
//! * [`learner`]: the zeroth-order learner and its step-size schedules.
//! * [`diagnostics`]: Monte Carlo and path checks of the estimator and
//!   regularization properties.
//! * [`harness`]: multi-seed experiments, rate fitting and plotting.

pub mod augmented;
pub mod builtin;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod game;
pub mod harness;
pub mod learner;
pub mod oracle;

pub use error::{Error, Result};
