//! Sequential covering rule induction with optional user knowledge for
//! classification, regression and survival problems.

pub mod data;
pub mod error;
pub mod guided;
pub mod harness;
pub mod induction;
pub mod inference;
pub mod model;
pub mod quality;
pub mod stats;

pub use error::{Error, Result};
