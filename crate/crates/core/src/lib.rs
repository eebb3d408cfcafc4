//! Rate-approximation limited feedback for the multiuser MIMO downlink.
//!
//! Users quantise their effective channel so that the rates the base
//! station predicts from the feedback stay close to the true rates for
//! every beam configuration it might schedule.

pub mod bounds;
pub mod channel;
pub mod codebook;
pub mod error;
pub mod feedback;
pub mod harness;
pub mod numerics;
pub mod rates;
pub mod scheduler;
pub mod textio;

pub use error::{Error, Result};
