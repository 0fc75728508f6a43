//! Decision engine for automated intrusion response in vehicles.
//!
//! An intrusion report is scored for impact, the response catalog is turned
//! into a candidate set, and one of three selectors picks a response whose
//! precondition holds. Feedback on the executed response adapts the benefit
//! parameters used in later selections.

pub mod engine;
pub mod error;
pub mod model;
pub mod precondition;
pub mod response;
pub mod risk;
pub mod selectors;
pub mod timing;

pub use error::{Error, Result};
