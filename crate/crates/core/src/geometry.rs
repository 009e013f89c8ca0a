//! Positions, straight-line tracks and BS-relative spherical geometry.
//!
//! Frame: right-handed, metres, `z` up. Azimuth is counterclockwise positive
//! from the BS boresight and wrapped to `(-pi, pi]`; elevation is positive
//! above the BS horizon.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the heading norm.
const HEADING_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),
    #[error("invalid track: {0}")]
    InvalidTrack(String),
    #[error("invalid BS configuration: {0}")]
    InvalidBs(String),
    #[error("sampling plan of {plan_m:.6} m exceeds track length {track_m:.6} m")]
    PlanExceedsTrack { plan_m: f64, track_m: f64 },
    #[error("LTTS interval {lttl_interval} s is shorter than tau x STTS interval = {window} s")]
    InvalidInterval { lttl_interval: f64, window: f64 },
    #[error("transmitter coincides with the BS")]
    CoincidentPoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3D {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(&self, other: &Position3D) -> f64 {
        let (dx, dy, dz) = (other.x - self.x, other.y - self.y, other.z - self.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn horizontal_distance(&self, other: &Position3D) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }
}

/// Straight, constant-velocity transmitter track.
///
/// The transmitter height is `start.z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    start: Position3D,
    heading: [f64; 2],
    length: f64,
    speed: f64,
}

impl Track {
    pub fn new(
        start: Position3D,
        heading: [f64; 2],
        length: f64,
        speed: f64,
    ) -> Result<Self, GeometryError> {
        if !start.is_finite() || !heading.iter().all(|h| h.is_finite()) {
            return Err(GeometryError::NonFinite("track"));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(GeometryError::InvalidTrack(format!("length {length} must be > 0")));
        }
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(GeometryError::InvalidTrack(format!("speed {speed} must be > 0")));
        }
        let norm = heading[0].hypot(heading[1]);
        if (norm - 1.0).abs() > HEADING_NORM_TOL {
            return Err(GeometryError::InvalidTrack(format!("heading norm {norm} is not 1")));
        }
        Ok(Self { start, heading, length, speed })
    }

    /// Track whose heading is given as an angle in the horizontal plane.
    pub fn with_heading_angle(
        start: Position3D,
        heading_angle: f64,
        length: f64,
        speed: f64,
    ) -> Result<Self, GeometryError> {
        Self::new(start, [heading_angle.cos(), heading_angle.sin()], length, speed)
    }

    pub fn start(&self) -> Position3D {
        self.start
    }

    pub fn heading(&self) -> [f64; 2] {
        self.heading
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn tx_height(&self) -> f64 {
        self.start.z
    }

    /// Position after travelling `distance` metres from the start.
    pub fn position_at(&self, distance: f64) -> Position3D {
        Position3D::new(
            self.start.x + self.heading[0] * distance,
            self.start.y + self.heading[1] * distance,
            self.start.z,
        )
    }

    pub fn end(&self) -> Position3D {
        self.position_at(self.length)
    }

    pub fn midpoint(&self) -> Position3D {
        self.position_at(0.5 * self.length)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsConfig {
    /// Array centre; `z` is the mast height.
    pub position: Position3D,
    /// Azimuth of the array reference direction in the global frame.
    pub boresight_azimuth: f64,
}

impl BsConfig {
    /// Mast heights used during the measurement campaign.
    pub const HEIGHT_LOW: f64 = 3.0;
    pub const HEIGHT_HIGH: f64 = 6.0;

    pub fn new(position: Position3D, boresight_azimuth: f64) -> Result<Self, GeometryError> {
        if !position.is_finite() || !boresight_azimuth.is_finite() {
            return Err(GeometryError::NonFinite("BS"));
        }
        if position.z <= 0.0 {
            return Err(GeometryError::InvalidBs(format!(
                "mast height {} must be > 0",
                position.z
            )));
        }
        Ok(Self { position, boresight_azimuth })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeGeometry {
    pub range: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a - 2.0 * PI
    } else {
        a
    }
}

/// Range, azimuth (relative to boresight) and elevation of `p` seen from the BS.
pub fn relative_geometry(bs: &BsConfig, p: &Position3D) -> Result<RelativeGeometry, GeometryError> {
    direction_from(&bs.position, bs.boresight_azimuth, p)
}

/// Same as [`relative_geometry`] for an arbitrary origin and reference azimuth.
pub(crate) fn direction_from(
    origin: &Position3D,
    reference_azimuth: f64,
    p: &Position3D,
) -> Result<RelativeGeometry, GeometryError> {
    let (dx, dy, dz) = (p.x - origin.x, p.y - origin.y, p.z - origin.z);
    let range = (dx * dx + dy * dy + dz * dz).sqrt();
    if range == 0.0 {
        return Err(GeometryError::CoincidentPoints);
    }
    let azimuth = wrap_angle(dy.atan2(dx) - reference_azimuth);
    let elevation = (dz / range).clamp(-1.0, 1.0).asin();
    Ok(RelativeGeometry { range, azimuth, elevation })
}

/// One covariance window: the first `tau` STTS of an LTTS.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanWindow {
    pub anchor_distance: f64,
    /// Distance along the track of every STTS in the window.
    pub distances: Vec<f64>,
    pub positions: Vec<Position3D>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub stts_interval: f64,
    pub lttl_interval: f64,
    pub tau: usize,
    pub windows: Vec<PlanWindow>,
}

impl SamplingPlan {
    pub fn anchor_distances(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.anchor_distance).collect()
    }

    pub fn stts_count(&self) -> usize {
        self.windows.len() * self.tau
    }

    /// All STTS positions in time order.
    pub fn positions(&self) -> impl Iterator<Item = &Position3D> {
        self.windows.iter().flat_map(|w| w.positions.iter())
    }

    pub fn distances(&self) -> impl Iterator<Item = f64> + '_ {
        self.windows.iter().flat_map(|w| w.distances.iter().copied())
    }
}

/// Lays out the STTS sampling instants of a track.
///
/// LTTS `k` is anchored at `k * lttl_interval * speed`; only its first `tau`
/// STTS are generated, spaced `stts_interval * speed` apart.
pub fn sample_track(
    track: &Track,
    stts_interval: f64,
    lttl_interval: f64,
    lttl_count: usize,
    tau: usize,
) -> Result<SamplingPlan, GeometryError> {
    if !(stts_interval > 0.0 && stts_interval.is_finite()) {
        return Err(GeometryError::InvalidTrack(format!(
            "STTS interval {stts_interval} must be > 0"
        )));
    }
    if lttl_count == 0 || tau == 0 {
        return Err(GeometryError::InvalidTrack("lttl_count and tau must be >= 1".into()));
    }
    let window = tau as f64 * stts_interval;
    if !(lttl_interval >= window) {
        return Err(GeometryError::InvalidInterval { lttl_interval, window });
    }
    let plan_m = lttl_count as f64 * lttl_interval * track.speed();
    if plan_m > track.length() * (1.0 + 1e-6) {
        return Err(GeometryError::PlanExceedsTrack { plan_m, track_m: track.length() });
    }

    let step = stts_interval * track.speed();
    let windows = (0..lttl_count)
        .map(|k| {
            let anchor_distance = k as f64 * lttl_interval * track.speed();
            let distances: Vec<f64> =
                (0..tau).map(|j| anchor_distance + j as f64 * step).collect();
            let positions = distances.iter().map(|&d| track.position_at(d)).collect();
            PlanWindow { anchor_distance, distances, positions }
        })
        .collect();
    Ok(SamplingPlan { stts_interval, lttl_interval, tau, windows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn campaign_track() -> Track {
        Track::new(Position3D::new(0.0, 0.0, 1.5), [1.0, 0.0], 40.0, 0.5).unwrap()
    }

    #[test]
    fn default_plan_spacing() {
        let plan = sample_track(&campaign_track(), 1.08e-3, 0.66, 120, 10).unwrap();
        assert_eq!(plan.windows.len(), 120);
        assert_close!(plan.windows[1].anchor_distance, 0.33, 1e-12);
        assert_close!(plan.windows[119].anchor_distance, 39.27, 1e-9);
        assert!(plan.distances().all(|d| d <= 40.0));
    }

    #[test]
    fn within_window_travel() {
        let plan = sample_track(&campaign_track(), 1.08e-3, 0.66, 120, 10).unwrap();
        let w = &plan.windows[3];
        // 10 x 1.08 ms x 0.5 m/s = 5.4 mm; the last STTS sits 9 steps in
        assert_close!(w.distances[9] - w.distances[0], 9.0 * 0.54e-3, 1e-12);
        assert_close!(10.0 * 1.08e-3 * 0.5, 5.4e-3, 1e-15);
    }

    #[test]
    fn degenerate_plan() {
        let track = campaign_track();
        let plan = sample_track(&track, 1.08e-3, 0.66, 1, 1).unwrap();
        assert_eq!(plan.stts_count(), 1);
        assert_eq!(plan.windows[0].positions[0], track.start());
    }

    #[test]
    fn plan_errors() {
        let track = campaign_track();
        assert!(matches!(
            sample_track(&track, 1.08e-3, 0.66, 122, 10),
            Err(GeometryError::PlanExceedsTrack { .. })
        ));
        assert!(matches!(
            sample_track(&track, 0.1, 0.5, 10, 10),
            Err(GeometryError::InvalidInterval { .. })
        ));
    }

    #[test]
    fn track_validation() {
        let p = Position3D::new(0.0, 0.0, 1.5);
        assert!(Track::new(p, [1.0, 0.0], 0.0, 0.5).is_err());
        assert!(Track::new(p, [1.0, 0.0], 40.0, -1.0).is_err());
        assert!(Track::new(p, [1.0, 0.1], 40.0, 0.5).is_err());
        assert!(Track::new(Position3D::new(f64::NAN, 0.0, 0.0), [1.0, 0.0], 1.0, 1.0).is_err());
        assert!(BsConfig::new(Position3D::new(0.0, 0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn axis_aligned_geometry() {
        let bs = BsConfig::new(Position3D::new(0.0, 0.0, 6.0), 0.0).unwrap();
        let g = relative_geometry(&bs, &Position3D::new(10.0, 0.0, 6.0)).unwrap();
        assert_close!(g.range, 10.0, 1e-12);
        assert_close!(g.azimuth, 0.0, 1e-12);
        assert_close!(g.elevation, 0.0, 1e-12);

        let below = relative_geometry(&bs, &Position3D::new(0.0, 0.0, 0.0)).unwrap();
        assert_close!(below.elevation, -PI / 2.0, 1e-12);

        assert_eq!(
            relative_geometry(&bs, &bs.position),
            Err(GeometryError::CoincidentPoints)
        );
    }

    #[test]
    fn sloped_geometry() {
        let bs = BsConfig::new(Position3D::new(0.0, 0.0, 6.0), 0.0).unwrap();
        let g = relative_geometry(&bs, &Position3D::new(30.0, 0.0, 1.5)).unwrap();
        assert_close!(g.range, 920.25f64.sqrt(), 1e-12);
        assert_close!(g.range, 30.336, 1e-3);
        // asin(-4.5 / 30.3356...) evaluated independently
        assert_close!(g.elevation, -0.148_890, 1e-6);
    }

    #[test]
    fn azimuth_is_boresight_relative_and_wrapped() {
        let bs = BsConfig::new(Position3D::new(0.0, 0.0, 6.0), PI / 2.0).unwrap();
        let g = relative_geometry(&bs, &Position3D::new(0.0, 5.0, 6.0)).unwrap();
        assert_close!(g.azimuth, 0.0, 1e-12);
        let g = relative_geometry(&bs, &Position3D::new(0.0, -5.0, 6.0)).unwrap();
        assert_close!(g.azimuth, PI, 1e-12);
        assert_close!(wrap_angle(-PI), PI, 1e-15);
        assert_close!(wrap_angle(3.0 * PI), PI, 1e-12);
        assert_close!(wrap_angle(-0.5), -0.5, 1e-15);
    }

    #[test]
    fn radial_track_keeps_azimuth() {
        let bs = BsConfig::new(Position3D::new(0.0, 0.0, 6.0), 0.3).unwrap();
        let dir: f64 = 1.1;
        let start = Position3D::new(12.0 * dir.cos(), 12.0 * dir.sin(), 1.5);
        let track = Track::with_heading_angle(start, dir, 40.0, 0.5).unwrap();
        let plan = sample_track(&track, 1.08e-3, 0.66, 120, 10).unwrap();
        let az0 = relative_geometry(&bs, &start).unwrap().azimuth;
        let mut last_el = f64::NEG_INFINITY;
        for p in plan.positions() {
            let g = relative_geometry(&bs, p).unwrap();
            assert!((g.azimuth - az0).abs() < 1e-9);
            // moving away from a higher BS raises the elevation toward 0
            assert!(g.elevation >= last_el);
            last_el = g.elevation;
        }
    }

    #[test]
    fn tangential_track_sweeps_azimuth_monotonically() {
        let bs = BsConfig::new(Position3D::new(0.0, 0.0, 6.0), 0.0).unwrap();
        let track = Track::new(Position3D::new(-20.0, 8.0, 1.5), [1.0, 0.0], 40.0, 0.5).unwrap();
        let plan = sample_track(&track, 1.08e-3, 0.66, 120, 10).unwrap();
        let az: Vec<f64> = plan
            .positions()
            .map(|p| relative_geometry(&bs, p).unwrap().azimuth)
            .collect();
        assert!(az.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn plan_is_deterministic() {
        let track = campaign_track();
        let a = sample_track(&track, 1.08e-3, 0.66, 120, 10).unwrap();
        let b = sample_track(&track, 1.08e-3, 0.66, 120, 10).unwrap();
        assert_eq!(a, b);
    }
}
