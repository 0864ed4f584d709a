//! Probabilistic fatigue life under the Weibull–Basquin model.
//!
//! The crate covers the whole chain from a test specimen to a structure:
//!
//! * [`specimen`]: S-N curves, Miner damage and closed-form survival
//!   probabilities of a single specimen.
//! * [`health`]: a stochastic simulator of the additively decreasing health
//!   of a specimen, used to check the closed forms empirically.
//! * [`structure`]: weakest-link size effects, structure survival, the
//!   failure-point density and the Poisson flaw model.
//! * [`ibeam`]: the analytic unitary severity field of a simply supported
//!   I-beam under a moving point load.
//! * [`laplace`]: hot-point (Laplace) approximation of the severity integral.
//! * [`loading`]: random Gamma loads, Monte Carlo survival and the
//!   deterministic equivalent load.
//!
//! Units: lengths in m, loads in MN, stresses in MPa (MN/m² = MPa), cycle
//! counts are real-valued.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod health;
pub mod ibeam;
pub mod io;
pub mod laplace;
pub mod loading;
pub mod rng;
pub mod specimen;
pub mod stats;
pub mod structure;

pub use error::{Error, Result};
