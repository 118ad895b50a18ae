//! Time-space coordinates: mapping spatial positions to time values through
//! a finite interaction speed, and the apparent-time law built on top of it.
//!
//! Every signal needs time to travel, so a position can be expressed as the
//! time a signal takes to reach it. The four-vector produced here has all
//! four coordinates in seconds: three converted spatial coordinates plus
//! time proper. The apparent time of a two-party exchange is the Euclidean
//! length of the resulting vector in this coordinate system:
//!
//! ```text
//! T_A = sqrt(Tt^2 + (2*Tp + Tt)^2)
//! ```
//!
//! with `Tp` the processing time of either party and `Tt` the (longest)
//! transmission time between them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A position in scenario space. The length unit is scenario-global and
/// abstract; nothing in this crate converts between unit scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 3]", try_from = "[f64; 3]")]
pub struct SpatialPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SpatialPoint {
    pub const ORIGIN: SpatialPoint = SpatialPoint {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::domain(format!(
                "spatial coordinates must be finite, got ({x}, {y}, {z})"
            )));
        }
        Ok(SpatialPoint { x, y, z })
    }

    /// Euclidean distance to `other`, in scenario length units.
    pub fn distance_to(&self, other: &SpatialPoint) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// Distance from the origin.
    pub fn magnitude(&self) -> f64 {
        self.distance_to(&SpatialPoint::ORIGIN)
    }
}

impl Default for SpatialPoint {
    fn default() -> Self {
        SpatialPoint::ORIGIN
    }
}

impl From<SpatialPoint> for [f64; 3] {
    fn from(p: SpatialPoint) -> Self {
        [p.x, p.y, p.z]
    }
}

impl TryFrom<[f64; 3]> for SpatialPoint {
    type Error = Error;

    fn try_from(v: [f64; 3]) -> Result<Self> {
        SpatialPoint::new(v[0], v[1], v[2])
    }
}

/// Finite propagation speed of information, in scenario length units per
/// second. Instant interaction (an infinite speed) is inexpressible by
/// construction: the constructor rejects non-positive and non-finite values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "f64", try_from = "f64")]
pub struct InteractionSpeed(f64);

impl InteractionSpeed {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::domain(format!(
                "interaction speed must be positive and finite, got {value}"
            )));
        }
        Ok(InteractionSpeed(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<InteractionSpeed> for f64 {
    fn from(v: InteractionSpeed) -> Self {
        v.0
    }
}

impl TryFrom<f64> for InteractionSpeed {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        InteractionSpeed::new(v)
    }
}

/// Four coordinates, all in seconds: three spatial coordinates divided by
/// the interaction speed (plus any additive hop contribution) and time
/// proper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeVector {
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    pub t: f64,
}

/// Processing and transmission times of one exchange, both in seconds.
/// When several transfers feed one processing step, `transmission` holds
/// the longest of them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventTiming {
    processing: f64,
    transmission: f64,
}

impl EventTiming {
    pub fn new(processing: f64, transmission: f64) -> Result<Self> {
        if !processing.is_finite() || processing < 0.0 {
            return Err(Error::domain(format!(
                "processing time must be finite and >= 0, got {processing}"
            )));
        }
        if !transmission.is_finite() || transmission < 0.0 {
            return Err(Error::domain(format!(
                "transmission time must be finite and >= 0, got {transmission}"
            )));
        }
        Ok(EventTiming {
            processing,
            transmission,
        })
    }

    pub fn processing(&self) -> f64 {
        self.processing
    }

    pub fn transmission(&self) -> f64 {
        self.transmission
    }

    /// Transmission-to-processing ratio. Absent when the processing time
    /// is zero.
    pub fn ratio(&self) -> Option<f64> {
        if self.processing > 0.0 {
            Some(self.transmission / self.processing)
        } else {
            None
        }
    }
}

/// Timing picture of one source-observer exchange, all values in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeTrace {
    /// Transmission time from the source (at the origin) to the observer.
    pub transmission: f64,
    /// When the observer notices the source's output.
    pub notice_time: f64,
    /// When the observer's own output cone starts; equals `2*Tp + Tt` when
    /// both parties have the same processing time.
    pub observer_cone_start: f64,
    /// Euclidean length of the end-to-end vector in time-space.
    pub apparent_time: f64,
}

/// Maps a position to time coordinates: each spatial coordinate divided by
/// the interaction speed, with `extra_hops` (multiplexing, network hops)
/// added onto the path-length coordinate `tx`. Time proper starts at zero.
pub fn to_time_vector(
    point: SpatialPoint,
    speed: InteractionSpeed,
    extra_hops: f64,
) -> Result<TimeVector> {
    if !extra_hops.is_finite() || extra_hops < 0.0 {
        return Err(Error::domain(format!(
            "hop contribution must be finite and >= 0, got {extra_hops}"
        )));
    }
    let v = speed.value();
    Ok(TimeVector {
        tx: point.x / v + extra_hops,
        ty: point.y / v,
        tz: point.z / v,
        t: 0.0,
    })
}

/// Transmission time between two positions: Euclidean path length divided
/// by the interaction speed, plus additive hop contributions. Symmetric in
/// its endpoints and never negative.
pub fn propagation_delay(
    a: SpatialPoint,
    b: SpatialPoint,
    speed: InteractionSpeed,
    extra_hops: f64,
) -> Result<f64> {
    if !extra_hops.is_finite() || extra_hops < 0.0 {
        return Err(Error::domain(format!(
            "hop contribution must be finite and >= 0, got {extra_hops}"
        )));
    }
    Ok(a.distance_to(&b) / speed.value() + extra_hops)
}

/// The apparent-time law: `sqrt(Tt^2 + (2*Tp + Tt)^2)`.
///
/// This is the observable end-to-end time of an exchange between two
/// parties with equal processing time `Tp` and transmission time `Tt`,
/// measured as the Euclidean vector length in time-space. Monotone
/// nondecreasing in both arguments and never below `max(2*Tp, sqrt(2)*Tt)`.
pub fn apparent_processing_time(timing: EventTiming) -> f64 {
    let tp = timing.processing();
    let tt = timing.transmission();
    let reach = 2.0 * tp + tt;
    (tt * tt + reach * reach).sqrt()
}

/// Timing picture of a source at the origin and an observer that starts
/// processing when the source's output reaches it.
///
/// The two processing times may differ; the apparent time generalizes the
/// symmetric law to `sqrt(Tt^2 + (Tp_source + Tt + Tp_observer)^2)`, which
/// collapses to `sqrt(Tt^2 + (2*Tp + Tt)^2)` when they are equal.
pub fn light_cone_trace(
    source_processing: f64,
    observer_processing: f64,
    observer: SpatialPoint,
    speed: InteractionSpeed,
) -> Result<ConeTrace> {
    if !source_processing.is_finite() || source_processing < 0.0 {
        return Err(Error::domain(format!(
            "source processing time must be finite and >= 0, got {source_processing}"
        )));
    }
    if !observer_processing.is_finite() || observer_processing < 0.0 {
        return Err(Error::domain(format!(
            "observer processing time must be finite and >= 0, got {observer_processing}"
        )));
    }
    let transmission = propagation_delay(SpatialPoint::ORIGIN, observer, speed, 0.0)?;
    let notice_time = source_processing + transmission;
    let observer_cone_start = notice_time + observer_processing;
    let apparent_time =
        (transmission * transmission + observer_cone_start * observer_cone_start).sqrt();
    Ok(ConeTrace {
        transmission,
        notice_time,
        observer_cone_start,
        apparent_time,
    })
}
