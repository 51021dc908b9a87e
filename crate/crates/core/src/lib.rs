//! A laboratory for learning in tabular constrained MDPs under the
//! average-reward criterion.
//!
//! * [`model`]: CMDP instances, policies, occupation measures and exact
//!   LP-based solutions, diameter and bias computations.
//! * [`estimation`]: transition counts, empirical estimates and L1
//!   confidence sets.
//! * [`learners`]: optimistic constrained learners and baselines.
//! * [`harness`]: environment simulation, regret accounting and multi-seed
//!   experiments.
//! * [`analysis`]: duality certificates, regret-bound calculators and
//!   numerical checks of Markov-chain identities.

pub mod analysis;
pub mod chain;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod learners;
pub mod model;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
