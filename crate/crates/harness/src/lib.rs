//! Scenario harness for the `react-core` intrusion response engine.
//!
//! Loads architecture, catalog and scenario documents, runs the evaluation
//! modes, and writes selection series as CSV or JSON lines.

pub mod emit;
pub mod error;
pub mod files;
pub mod memory;
pub mod reference;
pub mod runs;

pub use error::{HarnessError, Result};
