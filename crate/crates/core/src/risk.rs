//! Intrusion impact scoring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EnvironmentTerm, HeavensLevel, HeavensVector, IntrusionEvent};

/// Non-negative impact of an intrusion in HEAVENS units.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImpactScore(f64);

impl ImpactScore {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidWeight {
                name: "impact",
                value,
            })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Maps a velocity in km/h to the environment level.
///
/// Bands are half-open: `[0, 30) → 0`, `[30, 50) → 1`, `[50, 75) → 10`,
/// `[75, ∞) → 100`.
pub fn environment_from_velocity(velocity_kmh: f64) -> Result<HeavensLevel> {
    if velocity_kmh.is_nan() || velocity_kmh < 0.0 {
        return Err(Error::NegativeVelocity(velocity_kmh));
    }
    Ok(if velocity_kmh >= 75.0 {
        HeavensLevel::HUNDRED
    } else if velocity_kmh >= 50.0 {
        HeavensLevel::TEN
    } else if velocity_kmh >= 30.0 {
        HeavensLevel::ONE
    } else {
        HeavensLevel::ZERO
    })
}

/// Unweighted sum `S + F + O + P`.
pub fn legacy_impact(params: &HeavensVector) -> ImpactScore {
    ImpactScore(params.levels().iter().map(|l| l.as_f64()).sum())
}

/// Weighted sum `w_S·S + w_F·F + w_O·O + w_P·P + w_E·E`.
pub fn intrusion_impact(params: &HeavensVector, env: &EnvironmentTerm) -> ImpactScore {
    let base: f64 = params.weighted_terms().iter().sum();
    ImpactScore(base + env.w_e * env.e.as_f64())
}

/// Impact of an event under its current vehicle state.
pub fn event_impact(event: &IntrusionEvent) -> Result<ImpactScore> {
    Ok(intrusion_impact(
        &event.impact_params,
        &event.environment()?,
    ))
}
