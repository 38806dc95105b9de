//! Minimum longitudinal and lateral safe distances.
//!
//! The lateral form needs the lateral speeds reached after the response time.
//! These are taken as the worst-case closing speeds: the ego accelerates
//! toward the other vehicle and the other vehicle accelerates toward the ego,
//! each at its own `a_accel_lat_max`, for the ego's `t_lag`.

use serde::{Deserialize, Serialize};

use crate::domain::{positive_part, RssParams};
use crate::error::{ensure_finite, ensure_non_negative, ensure_positive, Result};

/// Minimum safe distances owed to one other vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeDistances {
    pub d_long: f64,
    pub d_lat: f64,
}

/// Longitudinal safe distance the rear (ego) vehicle owes the front vehicle.
///
/// `ego_params` belongs to the rear vehicle; `front_brake_max` is the front
/// vehicle's maximum braking capability. The half-length sum is part of the
/// bracket, so the result is a center-to-center quantity before clamping.
pub fn longitudinal_safe_distance(
    v_ego: f64,
    v_front: f64,
    ego_params: &RssParams,
    front_brake_max: f64,
    l_ego: f64,
    l_front: f64,
) -> Result<f64> {
    ensure_non_negative("v_ego", v_ego)?;
    ensure_non_negative("v_front", v_front)?;
    ensure_non_negative("t_lag", ego_params.t_lag)?;
    ensure_finite("a_accel_max", ego_params.a_accel_max)?;
    ensure_positive("a_brake_min", ego_params.a_brake_min)?;
    ensure_positive("front_brake_max", front_brake_max)?;
    ensure_non_negative("l_ego", l_ego)?;
    ensure_non_negative("l_front", l_front)?;

    let t = ego_params.t_lag;
    let a = ego_params.a_accel_max;
    let v_after_lag = v_ego + a * t;
    let bracket = v_ego * t
        + 0.5 * a * t * t
        + 0.5 * (l_ego + l_front)
        + v_after_lag * v_after_lag / (2.0 * ego_params.a_brake_min)
        - v_front * v_front / (2.0 * front_brake_max);
    Ok(positive_part(bracket))
}

/// Lateral safe distance between the ego and another vehicle.
///
/// `v_lat_ego` and `v_lat_other` are signed lateral speeds. The retardation
/// time is the ego's; each vehicle's own lateral braking parameter is used
/// for its own stopping term.
pub fn lateral_safe_distance(
    v_lat_ego: f64,
    v_lat_other: f64,
    ego_params: &RssParams,
    other_params: &RssParams,
    w_ego: f64,
    w_other: f64,
) -> Result<f64> {
    ensure_finite("v_lat_ego", v_lat_ego)?;
    ensure_finite("v_lat_other", v_lat_other)?;
    ensure_non_negative("t_lag", ego_params.t_lag)?;
    ensure_positive("a_brake_lat_min", ego_params.a_brake_lat_min)?;
    ensure_positive("a_brake_lat_min", other_params.a_brake_lat_min)?;
    ensure_non_negative("a_accel_lat_max", ego_params.a_accel_lat_max)?;
    ensure_non_negative("a_accel_lat_max", other_params.a_accel_lat_max)?;
    ensure_non_negative("mu", ego_params.mu)?;
    ensure_non_negative("w_ego", w_ego)?;
    ensure_non_negative("w_other", w_other)?;

    let t = ego_params.t_lag;
    let ego_after = v_lat_ego + ego_params.a_accel_lat_max * t;
    let other_after = v_lat_other - other_params.a_accel_lat_max * t;

    let ego_term = 0.5 * (v_lat_ego + ego_after) * t
        + ego_after * ego_after / (2.0 * ego_params.a_brake_lat_min);
    let other_term = 0.5 * (v_lat_other + other_after) * t
        + other_after * other_after / (2.0 * other_params.a_brake_lat_min);
    let bracket = ego_term + 0.5 * (w_ego + w_other) - other_term;
    Ok(ego_params.mu + positive_part(bracket))
}

/// Highest rear-vehicle speed whose longitudinal safe distance fits in `gap`.
///
/// Inverts the longitudinal formula in closed form. Returns 0 when even a
/// standing rear vehicle would violate the distance.
pub fn max_safe_following_speed(
    gap: f64,
    v_front: f64,
    rear_params: &RssParams,
    front_brake_max: f64,
    l_rear: f64,
    l_front: f64,
) -> f64 {
    if gap < 0.0 {
        return 0.0;
    }
    let t = rear_params.t_lag;
    let a = rear_params.a_accel_max;
    let b = rear_params.a_brake_min;
    // With u = v + a·t the bracket is u²/(2b) + u·t + c.
    let c = 0.5 * (l_rear + l_front)
        - 0.5 * a * t * t
        - v_front * v_front / (2.0 * front_brake_max)
        - gap;
    let disc = t * t - 2.0 * c / b;
    if disc < 0.0 {
        return 0.0;
    }
    let u = b * (-t + disc.sqrt());
    (u - a * t).max(0.0)
}
