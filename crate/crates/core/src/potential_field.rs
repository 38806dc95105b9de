//! Road-marking, obstacle and lane-center potentials.
//!
//! The field is a selection cost for the merge midpoint and a diagnostic; it
//! never steers a vehicle directly.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{LaneGeometry, VehicleState};
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::rss::SafeDistances;

/// Finite-difference step of [`potential_gradient`] (m).
pub const GRADIENT_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldParams {
    /// Road repulsive coefficient β.
    pub beta: f64,
    /// Obstacle influence coefficient γ.
    pub gamma: f64,
    /// Lateral decay σ₁ used when no safe distances are supplied (1/m²).
    pub sigma_lat: f64,
    /// Longitudinal decay σ₂ used when no safe distances are supplied (1/m²).
    pub sigma_long: f64,
    /// Minimal positive factor U, in (0, 1).
    pub u_floor: f64,
    /// Lane-center attraction coefficient ξ.
    pub xi: f64,
    /// Search target distance D* (m).
    pub d_star: f64,
    /// Smallest magnitude of the road-potential denominator (m).
    pub eps_denominator: f64,
}

impl Default for FieldParams {
    fn default() -> Self {
        Self {
            beta: 0.1,
            gamma: 10.0,
            sigma_lat: sigma_from_distance(2.0),
            sigma_long: sigma_from_distance(30.0),
            u_floor: 0.01,
            xi: 0.01,
            d_star: 10.0,
            eps_denominator: 0.05,
        }
    }
}

impl FieldParams {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("beta", self.beta)?;
        ensure_positive("gamma", self.gamma)?;
        ensure_positive("sigma_lat", self.sigma_lat)?;
        ensure_positive("sigma_long", self.sigma_long)?;
        ensure_positive("xi", self.xi)?;
        ensure_positive("d_star", self.d_star)?;
        ensure_positive("eps_denominator", self.eps_denominator)?;
        if !(self.u_floor > 0.0 && self.u_floor < 1.0) {
            return Err(Error::param("u_floor", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Smallest distance used when converting a safe distance into a decay rate (m).
pub const SIGMA_DISTANCE_FLOOR: f64 = 0.5;

/// Decay rate whose one-sigma contour sits at distance `d`.
pub fn sigma_from_distance(d: f64) -> f64 {
    let d = d.max(SIGMA_DISTANCE_FLOOR);
    1.0 / (2.0 * d * d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldMode {
    LaneKeeping,
    LaneMerging,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub lane: LaneGeometry,
    pub obstacles: Vec<VehicleState>,
    /// Attracting waypoint (X_d, Y_d).
    pub target_waypoint: (f64, f64),
    pub mode: FieldMode,
    /// Width of the vehicle the field is evaluated for (m).
    pub ego_width: f64,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("target_waypoint.x", self.target_waypoint.0)?;
        ensure_finite("target_waypoint.y", self.target_waypoint.1)?;
        for o in &self.obstacles {
            ensure_finite("obstacle.x", o.x)?;
            ensure_finite("obstacle.y", o.y)?;
        }
        Ok(())
    }
}

/// Repulsion of one road boundary.
///
/// The denominator is the clearance between the vehicle edge and the
/// boundary, mirrored so both boundaries repel inward; it is clamped at
/// `eps_denominator`.
pub fn road_marking_potential(
    y: f64,
    boundary_y: f64,
    vehicle_width: f64,
    params: &FieldParams,
) -> f64 {
    let clearance = (y - boundary_y).abs() - 0.5 * vehicle_width;
    let denom = clearance.max(params.eps_denominator);
    0.5 * params.beta * (1.0 / denom).powi(2)
}

/// Gaussian repulsion of one obstacle with explicit decay rates.
pub fn obstacle_potential_with(
    pos: (f64, f64),
    obstacle_pos: (f64, f64),
    sigma_lat: f64,
    sigma_long: f64,
    params: &FieldParams,
) -> f64 {
    let dx = pos.0 - obstacle_pos.0;
    let dy = pos.1 - obstacle_pos.1;
    let g = (-(sigma_lat * dy * dy + sigma_long * dx * dx)).exp();
    params.gamma * (g - params.u_floor).abs()
}

/// Gaussian repulsion of one obstacle using the decay rates in `params`.
pub fn obstacle_potential(pos: (f64, f64), obstacle_pos: (f64, f64), params: &FieldParams) -> f64 {
    obstacle_potential_with(
        pos,
        obstacle_pos,
        params.sigma_lat,
        params.sigma_long,
        params,
    )
}

/// Lane-center term as a function of distance to the target waypoint.
pub fn lane_center_value(d: f64, mode: FieldMode, params: &FieldParams) -> f64 {
    match mode {
        FieldMode::LaneKeeping => 0.5 * params.xi * d * d,
        FieldMode::LaneMerging => {
            params.d_star * params.xi * d - 0.5 * params.xi * params.d_star * params.d_star
        }
    }
}

/// Attraction toward the scene's target waypoint. The merging branch is
/// negative close to the target and is not clamped.
pub fn lane_center_potential(pos: (f64, f64), scene: &Scene, params: &FieldParams) -> f64 {
    let dx = pos.0 - scene.target_waypoint.0;
    let dy = pos.1 - scene.target_waypoint.1;
    lane_center_value(dx.hypot(dy), scene.mode, params)
}

fn obstacle_sigmas(distances: Option<&SafeDistances>, params: &FieldParams) -> (f64, f64) {
    match distances {
        Some(d) => (sigma_from_distance(d.d_lat), sigma_from_distance(d.d_long)),
        None => (params.sigma_lat, params.sigma_long),
    }
}

/// Sum of both boundary terms, every obstacle term and the lane-center term.
///
/// `distances[i]` sets the decay rates of obstacle `i`; obstacles without an
/// entry use the rates in `params`.
pub fn total_potential(
    pos: (f64, f64),
    scene: &Scene,
    distances: &[SafeDistances],
    params: &FieldParams,
) -> f64 {
    let road = road_marking_potential(pos.1, scene.lane.y_left, scene.ego_width, params)
        + road_marking_potential(pos.1, scene.lane.y_right, scene.ego_width, params);
    let obstacles: f64 = scene
        .obstacles
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let (s_lat, s_long) = obstacle_sigmas(distances.get(i), params);
            obstacle_potential_with(pos, (o.x, o.y), s_lat, s_long, params)
        })
        .sum();
    road + obstacles + lane_center_potential(pos, scene, params)
}

/// Central-difference gradient `(dP/dX, dP/dY)` of an arbitrary field.
pub fn central_gradient(f: impl Fn((f64, f64)) -> f64, pos: (f64, f64)) -> (f64, f64) {
    let h = GRADIENT_STEP;
    let gx = (f((pos.0 + h, pos.1)) - f((pos.0 - h, pos.1))) / (2.0 * h);
    let gy = (f((pos.0, pos.1 + h)) - f((pos.0, pos.1 - h))) / (2.0 * h);
    (gx, gy)
}

pub fn potential_gradient(
    pos: (f64, f64),
    scene: &Scene,
    distances: &[SafeDistances],
    params: &FieldParams,
) -> (f64, f64) {
    central_gradient(|p| total_potential(p, scene, distances, params), pos)
}

/// Rectangular sampling grid for field dumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

fn axis(min: f64, max: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 {
        (max - min) / (n - 1) as f64
    } else {
        0.0
    };
    (0..n).map(move |k| min + step * k as f64)
}

/// Writes the total potential on `grid` as CSV rows `x,y,p`.
pub fn write_field_csv<W: Write>(
    mut out: W,
    scene: &Scene,
    distances: &[SafeDistances],
    params: &FieldParams,
    grid: &FieldGrid,
) -> Result<()> {
    writeln!(out, "x,y,p")?;
    for x in axis(grid.x_min, grid.x_max, grid.nx) {
        for y in axis(grid.y_min, grid.y_max, grid.ny) {
            let p = total_potential((x, y), scene, distances, params);
            writeln!(out, "{x},{y},{p}")?;
        }
    }
    Ok(())
}
