//! Adversarial group linear bandits with switching costs, applied to
//! splitting DNN inference across edge relay paths.

pub mod adversaries;
pub mod edge;
pub mod error;
pub mod metrics;
pub mod model;
pub mod policies;
pub mod rng;
pub mod runner;

pub use error::{Error, Result};
