//! Vehicle propagation and tracking controllers.
//!
//! Lateral motion follows the linear two-degree-of-freedom bicycle model in
//! sideslip β and yaw rate r; longitudinal motion is a point mass driven by a
//! commanded acceleration. Below [`KINEMATIC_SPEED`] the kinematic bicycle
//! replaces the dynamic one.

use serde::{Deserialize, Serialize};

use crate::domain::{AccelLimits, RssParams, VehicleState};
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::sigmoid_planner::Waypoint;

pub const KINEMATIC_SPEED: f64 = 3.0;
pub const MAX_DT: f64 = 0.05;

pub const LOOKAHEAD_GAIN: f64 = 0.5;
pub const LOOKAHEAD_MIN: f64 = 3.0;
pub const LOOKAHEAD_MAX: f64 = 15.0;

pub const SPEED_GAIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// kg·m²
    pub yaw_inertia: f64,
    /// N/rad
    pub cornering_stiffness_front: f64,
    /// N/rad
    pub cornering_stiffness_rear: f64,
    /// m
    pub dist_cg_front: f64,
    /// m
    pub dist_cg_rear: f64,
    /// rad
    pub max_steer: f64,
    /// m/s
    pub v_max: f64,
    pub length: f64,
    pub width: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1500.0,
            yaw_inertia: 2500.0,
            cornering_stiffness_front: 80_000.0,
            cornering_stiffness_rear: 80_000.0,
            dist_cg_front: 1.2,
            dist_cg_rear: 1.6,
            max_steer: 0.5,
            v_max: 40.0,
            length: 4.6,
            width: 1.8,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("mass", self.mass)?;
        ensure_positive("yaw_inertia", self.yaw_inertia)?;
        ensure_positive("cornering_stiffness_front", self.cornering_stiffness_front)?;
        ensure_positive("cornering_stiffness_rear", self.cornering_stiffness_rear)?;
        ensure_positive("dist_cg_front", self.dist_cg_front)?;
        ensure_positive("dist_cg_rear", self.dist_cg_rear)?;
        ensure_positive("max_steer", self.max_steer)?;
        ensure_positive("v_max", self.v_max)?;
        ensure_positive("length", self.length)?;
        ensure_positive("width", self.width)?;
        if self.max_steer >= std::f64::consts::FRAC_PI_4 {
            return Err(Error::param("max_steer", "must be < pi/4"));
        }
        Ok(())
    }

    pub fn wheelbase(&self) -> f64 {
        self.dist_cg_front + self.dist_cg_rear
    }
}

// x, y, psi, beta, r, v
type Vector = [f64; 6];

fn add(a: &Vector, b: &Vector, h: f64) -> Vector {
    std::array::from_fn(|i| a[i] + h * b[i])
}

fn kinematic_slip(steer: f64, p: &VehicleParams) -> f64 {
    (p.dist_cg_rear * steer.tan() / p.wheelbase()).atan()
}

fn speed_rate(v: f64, accel: f64, v_max: f64) -> f64 {
    if (v <= 0.0 && accel < 0.0) || (v >= v_max && accel > 0.0) {
        0.0
    } else {
        accel
    }
}

fn dynamic_rates(s: &Vector, steer: f64, accel: f64, p: &VehicleParams) -> Vector {
    let [_, _, psi, beta, r, v] = *s;
    let (cf, cr) = (p.cornering_stiffness_front, p.cornering_stiffness_rear);
    let (lf, lr) = (p.dist_cg_front, p.dist_cg_rear);
    let mv = p.mass * v;
    let beta_dot =
        -(cf + cr) / mv * beta + ((cr * lr - cf * lf) / (mv * v) - 1.0) * r + cf / mv * steer;
    let r_dot = (cr * lr - cf * lf) / p.yaw_inertia * beta
        - (cf * lf * lf + cr * lr * lr) / (p.yaw_inertia * v) * r
        + cf * lf / p.yaw_inertia * steer;
    let course = psi + beta;
    [
        v * course.cos(),
        v * course.sin(),
        r,
        beta_dot,
        r_dot,
        speed_rate(v, accel, p.v_max),
    ]
}

fn kinematic_rates(s: &Vector, steer: f64, accel: f64, p: &VehicleParams) -> Vector {
    let [_, _, psi, _, _, v] = *s;
    let beta = kinematic_slip(steer, p);
    let course = psi + beta;
    [
        v * course.cos(),
        v * course.sin(),
        v * beta.cos() * steer.tan() / p.wheelbase(),
        0.0,
        0.0,
        speed_rate(v, accel, p.v_max),
    ]
}

/// Advances `state` by `dt` with one RK4 step.
pub fn step_dynamics(
    state: &VehicleState,
    steer: f64,
    accel: f64,
    dt: f64,
    params: &VehicleParams,
    rss: &RssParams,
) -> Result<VehicleState> {
    ensure_finite("steer", steer)?;
    ensure_finite("accel", accel)?;
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::param(
            "dt",
            format!("must lie in (0, {MAX_DT}], got {dt}"),
        ));
    }
    if steer.abs() > params.max_steer + 1e-12 {
        return Err(Error::param(
            "steer",
            format!("|{steer}| exceeds max_steer"),
        ));
    }
    if accel > rss.a_accel_max + 1e-9 || accel < -rss.a_brake_max - 1e-9 {
        return Err(Error::param(
            "accel",
            format!("{accel} outside [-a_brake_max, a_accel_max]"),
        ));
    }

    let s0: Vector = [
        state.x,
        state.y,
        state.heading,
        state.sideslip,
        state.yaw_rate,
        state.speed_long,
    ];
    let kinematic = state.speed_long < KINEMATIC_SPEED;
    let f = |s: &Vector| {
        if kinematic {
            kinematic_rates(s, steer, accel, params)
        } else {
            dynamic_rates(s, steer, accel, params)
        }
    };
    let k1 = f(&s0);
    let k2 = f(&add(&s0, &k1, 0.5 * dt));
    let k3 = f(&add(&s0, &k2, 0.5 * dt));
    let k4 = f(&add(&s0, &k3, dt));
    let mut s: Vector =
        std::array::from_fn(|i| s0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    s[5] = s[5].clamp(0.0, params.v_max);
    if kinematic {
        s[3] = kinematic_slip(steer, params);
        s[4] = s[5] * s[3].cos() * steer.tan() / params.wheelbase();
    }

    Ok(VehicleState {
        x: s[0],
        y: s[1],
        heading: s[2],
        sideslip: s[3],
        yaw_rate: s[4],
        speed_long: s[5],
        speed_lat: s[5] * (s[2] + s[3]).sin(),
        length: state.length,
        width: state.width,
    })
}

pub fn lookahead_distance(v: f64) -> f64 {
    (LOOKAHEAD_GAIN * v).clamp(LOOKAHEAD_MIN, LOOKAHEAD_MAX)
}

fn pursue(state: &VehicleState, target: (f64, f64), params: &VehicleParams) -> f64 {
    let dx = target.0 - state.x;
    let dy = target.1 - state.y;
    let ld = dx.hypot(dy);
    if ld < 1e-9 {
        return 0.0;
    }
    let alpha = dy.atan2(dx) - state.heading;
    let steer = (2.0 * params.wheelbase() * alpha.sin() / ld).atan();
    steer.clamp(-params.max_steer, params.max_steer)
}

/// Point `lookahead` metres of arc ahead of the projection of `pos` onto the
/// polyline, extended straight past the last waypoint.
pub fn lookahead_point(path: &[Waypoint], pos: (f64, f64), lookahead: f64) -> (f64, f64) {
    if path.len() == 1 {
        let w = path[0];
        return (
            w.x + lookahead * w.heading.cos(),
            w.y + lookahead * w.heading.sin(),
        );
    }
    let mut best = (f64::INFINITY, 0usize, 0.0f64);
    let n_seg = path.len() - 1;
    for (i, seg) in path.windows(2).enumerate() {
        // The final segment extends past its end so the target keeps moving.
        let t_max = if i + 1 == n_seg { f64::INFINITY } else { 1.0 };
        let (ax, ay, bx, by) = (seg[0].x, seg[0].y, seg[1].x, seg[1].y);
        let (ux, uy) = (bx - ax, by - ay);
        let len2 = ux * ux + uy * uy;
        let t = if len2 > 0.0 {
            (((pos.0 - ax) * ux + (pos.1 - ay) * uy) / len2).clamp(0.0, t_max)
        } else {
            0.0
        };
        let d = (ax + t * ux - pos.0).hypot(ay + t * uy - pos.1);
        if d < best.0 {
            best = (d, i, t);
        }
    }
    let (_, mut i, t) = best;
    let seg_len = |i: usize| (path[i + 1].x - path[i].x).hypot(path[i + 1].y - path[i].y);
    let mut remaining = lookahead + t * seg_len(i);
    loop {
        let len = seg_len(i);
        let last = i + 2 == path.len();
        if remaining <= len || last {
            let (a, b) = (path[i], path[i + 1]);
            let f = if len > 0.0 { remaining / len } else { 0.0 };
            return (a.x + f * (b.x - a.x), a.y + f * (b.y - a.y));
        }
        remaining -= len;
        i += 1;
    }
}

/// Pure-pursuit steering toward the path point `lookahead` metres ahead.
pub fn track_path(
    state: &VehicleState,
    path: &[Waypoint],
    lookahead: f64,
    params: &VehicleParams,
) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::Precondition("path has no waypoints".into()));
    }
    let target = lookahead_point(path, (state.x, state.y), lookahead);
    Ok(pursue(state, target, params))
}

/// Pure-pursuit steering toward a straight lane center at `y_center`.
pub fn track_lane(
    state: &VehicleState,
    y_center: f64,
    lookahead: f64,
    params: &VehicleParams,
) -> f64 {
    pursue(state, (state.x + lookahead, y_center), params)
}

/// Proportional speed law clamped to `limits`.
pub fn speed_controller(state: &VehicleState, v_target: f64, limits: &AccelLimits) -> f64 {
    limits.clamp(SPEED_GAIN * (v_target.max(0.0) - state.speed_long))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigmoid_planner::generate_path;
    use proptest::prelude::*;

    fn params() -> VehicleParams {
        VehicleParams::default()
    }

    #[test]
    fn straight_motion_is_an_equilibrium() {
        let p = params();
        let mut s = VehicleState::cruising(0.0, 0.0, 20.0, 4.6, 1.8);
        for _ in 0..50 {
            let n = step_dynamics(&s, 0.0, 0.0, 0.02, &p, &RssParams::default()).unwrap();
            assert!((n.x - s.x - 20.0 * 0.02).abs() < 1e-9);
            assert_eq!(
                (n.sideslip, n.yaw_rate, n.heading, n.y),
                (0.0, 0.0, 0.0, 0.0)
            );
            s = n;
        }
    }

    #[test]
    fn constant_steer_reaches_steady_state_gains() {
        let p = params();
        let (v, delta) = (20.0, 0.01);
        let mut s = VehicleState::cruising(0.0, 0.0, v, 4.6, 1.8);
        for _ in 0..500 {
            s = step_dynamics(&s, delta, 0.0, 0.02, &p, &RssParams::default()).unwrap();
        }
        let l = p.wheelbase();
        let (cf, cr, lf, lr, m) = (
            p.cornering_stiffness_front,
            p.cornering_stiffness_rear,
            p.dist_cg_front,
            p.dist_cg_rear,
            p.mass,
        );
        let k_us = m * (lr / cf - lf / cr) / l;
        let r_ss = v * delta / (l + k_us * v * v);
        let beta_ss = r_ss / v * (lr - lf * m * v * v / (cr * l));
        assert!((s.yaw_rate - r_ss).abs() < 1e-6, "{} vs {r_ss}", s.yaw_rate);
        assert!(
            (s.sideslip - beta_ss).abs() < 1e-6,
            "{} vs {beta_ss}",
            s.sideslip
        );
    }

    #[test]
    fn full_braking_stops_without_reversing() {
        let p = params();
        let rss = RssParams::default();
        let mut s = VehicleState::cruising(0.0, 0.0, 10.0, 4.6, 1.8);
        let mut prev = s.speed_long;
        for _ in 0..100 {
            s = step_dynamics(&s, 0.0, -rss.a_brake_max, 0.02, &p, &rss).unwrap();
            let expected = (prev - rss.a_brake_max * 0.02).max(0.0);
            assert!((s.speed_long - expected).abs() < 1e-9);
            prev = s.speed_long;
        }
        assert_eq!(s.speed_long, 0.0);
    }

    #[test]
    fn precondition_errors() {
        let p = params();
        let rss = RssParams::default();
        let s = VehicleState::cruising(0.0, 0.0, 10.0, 4.6, 1.8);
        assert!(step_dynamics(&s, 0.0, 0.0, 0.0, &p, &rss).is_err());
        assert!(step_dynamics(&s, 0.0, 0.0, 0.1, &p, &rss).is_err());
        assert!(step_dynamics(&s, 0.6, 0.0, 0.02, &p, &rss).is_err());
        assert!(step_dynamics(&s, 0.0, 9.0, 0.02, &p, &rss).is_err());
    }

    #[test]
    fn low_speed_uses_kinematic_model() {
        let p = params();
        let s = VehicleState::cruising(0.0, 0.0, 1.0, 4.6, 1.8);
        let n = step_dynamics(&s, 0.1, 0.0, 0.02, &p, &RssParams::default()).unwrap();
        let beta = (p.dist_cg_rear * 0.1f64.tan() / p.wheelbase()).atan();
        assert!((n.sideslip - beta).abs() < 1e-12);
        assert!(n.yaw_rate > 0.0);
    }

    fn straight(y: f64) -> Vec<Waypoint> {
        (0..100)
            .map(|i| Waypoint {
                x: i as f64,
                y,
                heading: 0.0,
            })
            .collect()
    }

    #[test]
    fn pure_pursuit_examples() {
        let p = params();
        let on = VehicleState::cruising(10.0, 2.0, 20.0, 4.6, 1.8);
        assert!(track_path(&on, &straight(2.0), 10.0, &p).unwrap().abs() < 1e-6);
        let left = VehicleState::cruising(10.0, 3.0, 20.0, 4.6, 1.8);
        assert!(track_path(&left, &straight(2.0), 10.0, &p).unwrap() < 0.0);
        assert!(track_lane(&left, 2.0, 10.0, &p) < 0.0);
        assert_eq!(lookahead_distance(100.0), 15.0);
        assert_eq!(lookahead_distance(1.0), 3.0);
        assert!(track_path(&on, &[], 10.0, &p).is_err());
    }

    #[test]
    fn lookahead_extends_past_path_end() {
        let path = straight(1.0);
        let (x, y) = lookahead_point(&path, (98.0, 1.0), 10.0);
        assert!((x - 108.0).abs() < 1e-9 && (y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn speed_controller_examples() {
        let rss = RssParams {
            a_accel_max: 3.0,
            ..RssParams::default()
        };
        let nominal = AccelLimits::nominal(&rss);
        let s = VehicleState::cruising(0.0, 0.0, 20.0, 4.6, 1.8);
        assert_eq!(speed_controller(&s, 20.0, &nominal), 0.0);
        assert_eq!(speed_controller(&s, 30.0, &nominal), 3.0);
        let slow_down = AccelLimits::new(0.0, rss.a_brake_min);
        assert_eq!(speed_controller(&s, 0.0, &slow_down), -rss.a_brake_min);
    }

    #[test]
    fn dt_halving_converges() {
        let p = params();
        let rss = RssParams::default();
        let run = |dt: f64| {
            let mut s = VehicleState::cruising(0.0, 0.0, 20.0, 4.6, 1.8);
            let n = (20.0 / dt).round() as usize;
            for k in 0..n {
                let t = k as f64 * dt;
                let steer = 0.01 * (0.5 * t).sin();
                s = step_dynamics(&s, steer, 0.5, dt, &p, &rss).unwrap();
            }
            s
        };
        let (a, b) = (run(0.02), run(0.01));
        assert!((a.x - b.x).hypot(a.y - b.y) < 0.05);
    }

    proptest! {
        #[test]
        fn tracking_sigmoid_keeps_sideslip_small(v in 8.0f64..30.0, pc in 40.0f64..120.0) {
            let p = params();
            let rss = RssParams::default();
            let k = crate::sigmoid_planner::select_kappa(v, 3.5, 2.0).unwrap();
            let mut s = VehicleState::cruising(0.0, 0.0, v, 4.6, 1.8);
            let path = generate_path(&s, 3.5, k, pc, 0.0, pc + 12.0 / k + 20.0, 1.0).unwrap();
            for _ in 0..1000 {
                let steer = track_path(&s, &path.waypoints, lookahead_distance(s.speed_long), &p).unwrap();
                s = step_dynamics(&s, steer, 0.0, 0.02, &p, &rss).unwrap();
                prop_assert!(s.sideslip.abs() < 0.05);
            }
        }

        #[test]
        fn integration_is_deterministic(steer in -0.1f64..0.1, accel in -4.0f64..2.0) {
            let p = params();
            let rss = RssParams::default();
            let s = VehicleState::cruising(0.0, 0.0, 15.0, 4.6, 1.8);
            let a = step_dynamics(&s, steer, accel, 0.02, &p, &rss).unwrap();
            let b = step_dynamics(&s, steer, accel, 0.02, &p, &rss).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
