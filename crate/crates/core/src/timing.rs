//! Analytical runtime of the inner loop for the two check orders.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopOrder {
    /// Check every precondition, then select once among the applicable.
    CheckFirst,
    /// Select, then check; reselect after each rejection.
    SelectFirst,
}

/// Expected time of one inner loop over `n` candidates.
///
/// `p` is the probability that a selected response passes its precondition.
/// Times are per candidate and share a unit, which the result inherits.
pub fn estimate_loop_time(
    order: LoopOrder,
    t_check: f64,
    t_select: f64,
    t_execute: f64,
    p: f64,
    n: u64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    if n == 0 {
        return Err(Error::NoCandidates);
    }
    let n = n as f64;
    Ok(match order {
        LoopOrder::CheckFirst => n * t_check + t_select + t_execute,
        LoopOrder::SelectFirst => {
            t_select + t_check + p * t_execute + (1.0 - p) * (n - 1.0) * (t_select + t_check)
        }
    })
}
