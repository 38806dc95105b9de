//! Shared value types and elementary helpers.
//!
//! Frame: X grows in the direction of travel, Y grows to the left, and every
//! lane runs parallel to X. Positions are vehicle geometric centers.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_non_negative, ensure_positive, Error, Result};

/// Kinematic and dynamic state of one vehicle at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// Longitudinal position of the geometric center (m).
    pub x: f64,
    /// Lateral position of the geometric center (m).
    pub y: f64,
    /// Yaw angle ψ (rad).
    pub heading: f64,
    /// Sideslip angle β (rad).
    pub sideslip: f64,
    /// Yaw rate r (rad/s).
    pub yaw_rate: f64,
    /// Longitudinal (body-frame) speed (m/s).
    pub speed_long: f64,
    /// Lateral speed in the road frame (m/s), positive to the left.
    pub speed_lat: f64,
    pub length: f64,
    pub width: f64,
}

impl VehicleState {
    /// A vehicle driving straight along X.
    pub fn cruising(x: f64, y: f64, speed: f64, length: f64, width: f64) -> Self {
        Self {
            x,
            y,
            heading: 0.0,
            sideslip: 0.0,
            yaw_rate: 0.0,
            speed_long: speed,
            speed_lat: 0.0,
            length,
            width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("x", self.x),
            ("y", self.y),
            ("heading", self.heading),
            ("sideslip", self.sideslip),
            ("yaw_rate", self.yaw_rate),
            ("speed_lat", self.speed_lat),
        ] {
            ensure_finite(name, v)?;
        }
        ensure_non_negative("speed_long", self.speed_long)?;
        ensure_positive("length", self.length)?;
        ensure_positive("width", self.width)?;
        if self.sideslip.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::param("sideslip", "must satisfy |sideslip| < pi/2"));
        }
        Ok(())
    }
}

/// Reaction, acceleration, braking and margin parameters of the safe-distance model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RssParams {
    /// Retardation time: response time plus any communication delay (s).
    pub t_lag: f64,
    /// Maximum longitudinal acceleration during the response time (m/s²).
    pub a_accel_max: f64,
    /// Minimum (comfortable) braking deceleration (m/s²).
    pub a_brake_min: f64,
    /// Maximum braking capability (m/s²).
    pub a_brake_max: f64,
    /// Maximum lateral acceleration during the response time (m/s²).
    pub a_accel_lat_max: f64,
    /// Minimum lateral braking deceleration (m/s²).
    pub a_brake_lat_min: f64,
    /// Lateral fluctuation margin μ (m).
    pub mu: f64,
}

impl Default for RssParams {
    fn default() -> Self {
        Self {
            t_lag: 0.3,
            a_accel_max: 2.0,
            a_brake_min: 4.0,
            a_brake_max: 8.0,
            a_accel_lat_max: 0.5,
            a_brake_lat_min: 1.0,
            mu: 0.1,
        }
    }
}

impl RssParams {
    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("t_lag", self.t_lag)?;
        ensure_positive("a_accel_max", self.a_accel_max)?;
        ensure_positive("a_brake_min", self.a_brake_min)?;
        ensure_positive("a_brake_max", self.a_brake_max)?;
        ensure_positive("a_accel_lat_max", self.a_accel_lat_max)?;
        ensure_positive("a_brake_lat_min", self.a_brake_lat_min)?;
        ensure_non_negative("mu", self.mu)?;
        if self.a_brake_max < self.a_brake_min {
            return Err(Error::param("a_brake_max", "must be >= a_brake_min"));
        }
        Ok(())
    }

    /// Copy with `extra` seconds added to the retardation time.
    pub fn with_extra_lag(mut self, extra: f64) -> Self {
        self.t_lag += extra;
        self
    }
}

/// Acceleration envelope for a speed command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelLimits {
    /// Largest permitted acceleration (m/s², ≥ 0).
    pub max_accel: f64,
    /// Largest permitted deceleration magnitude (m/s², ≥ 0).
    pub max_decel: f64,
}

impl AccelLimits {
    pub fn new(max_accel: f64, max_decel: f64) -> Self {
        Self {
            max_accel,
            max_decel,
        }
    }

    /// Full envelope of a vehicle: `[-a_brake_max, a_accel_max]`.
    pub fn nominal(rss: &RssParams) -> Self {
        Self::new(rss.a_accel_max, rss.a_brake_max)
    }

    pub fn clamp(&self, accel: f64) -> f64 {
        accel.clamp(-self.max_decel, self.max_accel)
    }
}

/// Timing thresholds of the merge rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MergeParams {
    /// Lane-merge threshold time ρ_m (s).
    pub rho_m: f64,
    /// Communication threshold ρ_c (s).
    pub rho_c: f64,
    /// Lane-merge decision time T_m^dec (s).
    pub t_m_dec: f64,
    /// Whether the ego may negotiate over V2V when no gap is feasible.
    pub coop_enabled: bool,
    /// Infeasibility must persist this long before a halt is considered (s).
    pub halt_window: f64,
    /// Extra distance added to the stopping distance in the halt trigger (m).
    pub halt_margin: f64,
}

impl Default for MergeParams {
    fn default() -> Self {
        Self {
            rho_m: 4.0,
            rho_c: 1.0,
            t_m_dec: 1.0,
            coop_enabled: true,
            halt_window: 1.0,
            halt_margin: 15.0,
        }
    }
}

impl MergeParams {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("rho_m", self.rho_m)?;
        ensure_positive("rho_c", self.rho_c)?;
        ensure_non_negative("t_m_dec", self.t_m_dec)?;
        ensure_non_negative("halt_window", self.halt_window)?;
        ensure_non_negative("halt_margin", self.halt_margin)?;
        Ok(())
    }
}

fn default_side_lane() -> usize {
    0
}

fn default_target_lane() -> usize {
    1
}

/// Straight multi-lane road with a terminating side lane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneGeometry {
    pub y_left: f64,
    pub y_right: f64,
    /// Lane-center lateral positions, strictly increasing (right to left).
    pub lane_centers: Vec<f64>,
    /// Longitudinal coordinate where the side lane ends (m).
    pub side_lane_end_x: f64,
    /// Index into `lane_centers` of the lane the ego starts in.
    #[serde(default = "default_side_lane")]
    pub side_lane: usize,
    /// Index into `lane_centers` of the lane the ego merges into.
    #[serde(default = "default_target_lane")]
    pub target_lane: usize,
}

impl Default for LaneGeometry {
    fn default() -> Self {
        Self {
            y_left: 5.25,
            y_right: -1.75,
            lane_centers: vec![0.0, 3.5],
            side_lane_end_x: 500.0,
            side_lane: 0,
            target_lane: 1,
        }
    }
}

impl LaneGeometry {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("y_left", self.y_left)?;
        ensure_finite("y_right", self.y_right)?;
        ensure_finite("side_lane_end_x", self.side_lane_end_x)?;
        if self.lane_centers.is_empty() {
            return Err(Error::param("lane_centers", "must not be empty"));
        }
        if self.lane_centers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("lane_centers", "must be strictly increasing"));
        }
        if self
            .lane_centers
            .iter()
            .any(|&c| !(c > self.y_right && c < self.y_left))
        {
            return Err(Error::param(
                "lane_centers",
                "every lane center must lie strictly between y_right and y_left",
            ));
        }
        let n = self.lane_centers.len();
        if self.side_lane >= n || self.target_lane >= n {
            return Err(Error::param("target_lane", "lane index out of range"));
        }
        if self.side_lane.abs_diff(self.target_lane) != 1 {
            return Err(Error::param(
                "target_lane",
                "side and target lanes must be adjacent",
            ));
        }
        Ok(())
    }

    pub fn side_center(&self) -> f64 {
        self.lane_centers[self.side_lane]
    }

    pub fn target_center(&self) -> f64 {
        self.lane_centers[self.target_lane]
    }

    /// Signed offset from the side-lane center to the target-lane center.
    pub fn merge_offset(&self) -> f64 {
        self.target_center() - self.side_center()
    }

    /// Lateral bounds `(low, high)` of lane `idx`, split halfway between centers.
    pub fn lane_bounds(&self, idx: usize) -> (f64, f64) {
        let c = &self.lane_centers;
        let low = if idx == 0 {
            self.y_right
        } else {
            0.5 * (c[idx - 1] + c[idx])
        };
        let high = if idx + 1 == c.len() {
            self.y_left
        } else {
            0.5 * (c[idx] + c[idx + 1])
        };
        (low, high)
    }

    /// Whether any part of the vehicle footprint lies inside lane `idx`.
    pub fn occupies_lane(&self, state: &VehicleState, idx: usize) -> bool {
        let (low, high) = self.lane_bounds(idx);
        let half = 0.5 * state.width;
        state.y + half > low && state.y - half < high
    }
}

/// The `[·]_+` operator.
pub fn positive_part(x: f64) -> f64 {
    x.max(0.0)
}

/// Bumper-to-bumper distance from `rear` to `front`; negative when the bodies overlap.
pub fn bumper_gap(rear: &VehicleState, front: &VehicleState) -> f64 {
    (front.x - rear.x) - 0.5 * (front.length + rear.length)
}
