//! Light-cone bookkeeping for the detection events.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;
/// Metres per nanosecond in vacuum.
pub const LIGHT_M_PER_NS: f64 = SPEED_OF_LIGHT_M_PER_S * 1e-9;
/// Group index of standard single-mode fiber near 1560 nm.
pub const DEFAULT_FIBER_INDEX: f64 = 1.468;

/// Separation of the two detection events in the reference geometry.
pub const DEFAULT_DELTA_X_M: f64 = 20.0;
pub const DEFAULT_DELTA_T_NS: f64 = 20.0;

/// Time in nanoseconds for light to cross `length_m` of fiber.
pub fn propagation_delay(length_m: f64, refractive_index: f64) -> Result<f64> {
    if !(length_m >= 0.0 && length_m.is_finite()) {
        return Err(Error::NegativeLength(length_m));
    }
    if !(refractive_index > 0.0 && refractive_index.is_finite()) {
        return Err(Error::Parse(format!(
            "refractive index {refractive_index} must be positive"
        )));
    }
    Ok(length_m * refractive_index / LIGHT_M_PER_NS)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacetimeEvent {
    pub position_m: f64,
    pub time_ns: f64,
}

impl SpacetimeEvent {
    pub fn new(position_m: f64, time_ns: f64) -> Result<Self> {
        if !(position_m.is_finite() && time_ns.is_finite()) {
            return Err(Error::Parse(format!(
                "event ({position_m} m, {time_ns} ns) is not finite"
            )));
        }
        Ok(Self { position_m, time_ns })
    }
}

/// Strict: light-like separation is not space-like.
pub fn is_spacelike(e1: &SpacetimeEvent, e2: &SpacetimeEvent) -> bool {
    let ct = LIGHT_M_PER_NS * (e1.time_ns - e2.time_ns);
    let dx = e1.position_m - e2.position_m;
    ct * ct < dx * dx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CausalityReport {
    pub event_test: SpacetimeEvent,
    pub event_corroborative: SpacetimeEvent,
    pub c_delta_t_m: f64,
    pub delta_x_m: f64,
    pub spacelike: bool,
}

impl CausalityReport {
    pub fn new(event_test: SpacetimeEvent, event_corroborative: SpacetimeEvent) -> Self {
        Self {
            c_delta_t_m: LIGHT_M_PER_NS * (event_corroborative.time_ns - event_test.time_ns).abs(),
            delta_x_m: (event_corroborative.position_m - event_test.position_m).abs(),
            spacelike: is_spacelike(&event_test, &event_corroborative),
            event_test,
            event_corroborative,
        }
    }

    /// Test photon detected at the origin, corroborative photon `delta_x_m`
    /// away and `delta_t_ns` later.
    pub fn from_separation(delta_x_m: f64, delta_t_ns: f64) -> Result<Self> {
        Ok(Self::new(
            SpacetimeEvent::new(0.0, 0.0)?,
            SpacetimeEvent::new(delta_x_m, delta_t_ns)?,
        ))
    }
}
