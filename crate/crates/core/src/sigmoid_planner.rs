//! Sigmoid merge paths and midpoint selection.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::VehicleState;
use crate::error::{ensure_positive, Error, Result};
use crate::potential_field::{total_potential, FieldParams, Scene};
use crate::rss::SafeDistances;

pub const KAPPA_MIN: f64 = 0.05;
pub const KAPPA_MAX: f64 = 1.0;

/// Span searched past the lower bound when the interval has no upper bound (m).
pub const OPEN_INTERVAL_SPAN: f64 = 60.0;

/// Relative cost difference below which two candidates count as tied.
pub const COST_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmoidPath {
    /// Signed lane-center offset W (m).
    pub w: f64,
    /// Midpoint slope parameter κ (1/m).
    pub kappa: f64,
    /// Midpoint longitudinal position P_c (m).
    pub p_c: f64,
    /// Lateral offset b (m).
    pub b: f64,
    pub waypoints: Vec<Waypoint>,
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Lateral position of the sigmoid curve at `x`.
pub fn sigmoid_value(x: f64, w: f64, kappa: f64, p_c: f64, b: f64) -> f64 {
    w / (1.0 + (-kappa * (x - p_c)).exp()) + b
}

/// First derivative dY/dX.
pub fn sigmoid_slope(x: f64, w: f64, kappa: f64, p_c: f64) -> f64 {
    let s = logistic(kappa * (x - p_c));
    w * kappa * s * (1.0 - s)
}

/// Second derivative d²Y/dX².
pub fn sigmoid_curvature(x: f64, w: f64, kappa: f64, p_c: f64) -> f64 {
    let s = logistic(kappa * (x - p_c));
    w * kappa * kappa * s * (1.0 - s) * (1.0 - 2.0 * s)
}

pub fn sigmoid_lateral(x: f64, path: &SigmoidPath) -> f64 {
    sigmoid_value(x, path.w, path.kappa, path.p_c, path.b)
}

impl SigmoidPath {
    pub fn slope_at(&self, x: f64) -> f64 {
        sigmoid_slope(x, self.w, self.kappa, self.p_c)
    }

    pub fn curvature_at(&self, x: f64) -> f64 {
        sigmoid_curvature(x, self.w, self.kappa, self.p_c)
    }

    /// Writes the waypoints as CSV rows `x,y,heading`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y,heading")?;
        for p in &self.waypoints {
            writeln!(out, "{},{},{}", p.x, p.y, p.heading)?;
        }
        Ok(())
    }
}

/// Admissible range of the midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpInterval {
    /// Absent when no follower constrains the midpoint.
    pub lower: Option<f64>,
    /// `+inf` when no leader constrains the midpoint.
    pub upper: f64,
    pub feasible: bool,
}

impl CpInterval {
    pub fn contains(&self, p: f64) -> bool {
        self.feasible && self.lower.is_none_or(|l| p >= l) && p <= self.upper
    }
}

/// Safe distances bounding the midpoint, all measured center to center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpDistances {
    /// Distance behind the leader when the gap has no follower.
    pub d_rss_lead: f64,
    /// Distance ahead of the follower.
    pub d_rss_star: f64,
    /// Distance behind the leader when the gap also has a follower.
    pub d_rss_next: f64,
}

/// Midpoint interval for gap `gap` (between `obstacles[gap - 1]` and
/// `obstacles[gap]`).
///
/// Without a follower the interval has no lower bound and is feasible while
/// the ego has not yet passed the upper bound.
pub fn cp_feasible_interval(
    ego: &VehicleState,
    obstacles: &[VehicleState],
    gap: usize,
    d: &CpDistances,
) -> Result<CpInterval> {
    if obstacles.windows(2).any(|w| w[0].x > w[1].x) {
        return Err(Error::Precondition(
            "main-lane obstacles must be sorted by ascending x".into(),
        ));
    }
    let n = obstacles.len();
    if gap > n {
        return Err(Error::Precondition(format!(
            "gap {gap} out of range 0..={n}"
        )));
    }
    let follower = gap.checked_sub(1).map(|i| &obstacles[i]);
    let leader = obstacles.get(gap);
    Ok(match follower {
        None => {
            let upper = leader.map_or(f64::INFINITY, |l| l.x - d.d_rss_lead);
            CpInterval {
                lower: None,
                upper,
                feasible: ego.x <= upper,
            }
        }
        Some(f) => {
            let lower = f.x + d.d_rss_star;
            let upper = leader.map_or(f64::INFINITY, |l| l.x - d.d_rss_next);
            CpInterval {
                lower: Some(lower),
                upper,
                feasible: lower <= upper,
            }
        }
    })
}

/// Slope parameter that keeps the peak lateral acceleration of the curve at
/// `a_lat_comfort` when driven at `v_ego`.
pub fn select_kappa(v_ego: f64, w: f64, a_lat_comfort: f64) -> Result<f64> {
    ensure_positive("v_ego", v_ego)?;
    ensure_positive("w", w.abs())?;
    ensure_positive("a_lat_comfort", a_lat_comfort)?;
    let k = (6.0 * 3f64.sqrt() * a_lat_comfort / (w.abs() * v_ego * v_ego)).sqrt();
    Ok(k.clamp(KAPPA_MIN, KAPPA_MAX))
}

/// Samples the curve from `ego.x` to `ego.x + horizon` every `spacing` metres.
pub fn generate_path(
    ego: &VehicleState,
    w: f64,
    kappa: f64,
    p_c: f64,
    b: f64,
    horizon: f64,
    spacing: f64,
) -> Result<SigmoidPath> {
    ensure_positive("spacing", spacing)?;
    ensure_positive("kappa", kappa)?;
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::param("horizon", "must be finite and >= 0"));
    }
    let steps = (horizon / spacing).floor() as usize;
    let mut xs: Vec<f64> = (0..=steps).map(|k| ego.x + k as f64 * spacing).collect();
    let end = ego.x + horizon;
    if end - xs[xs.len() - 1] > 1e-9 {
        xs.push(end);
    }
    let waypoints = xs
        .into_iter()
        .map(|x| Waypoint {
            x,
            y: sigmoid_value(x, w, kappa, p_c, b),
            heading: sigmoid_slope(x, w, kappa, p_c).atan(),
        })
        .collect();
    Ok(SigmoidPath {
        w,
        kappa,
        p_c,
        b,
        waypoints,
    })
}

/// Shape and sampling shared by every candidate midpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateShape {
    pub w: f64,
    pub kappa: f64,
    pub b: f64,
    /// Candidates are integrated from the ego position up to this `x` (m).
    pub x_end: f64,
    pub spacing: f64,
}

/// Potential integrated along the candidate path with midpoint `p_c`.
pub fn path_cost(
    ego: &VehicleState,
    p_c: f64,
    shape: &CandidateShape,
    scene: &Scene,
    distances: &[SafeDistances],
    params: &FieldParams,
) -> Result<f64> {
    let path = generate_path(
        ego,
        shape.w,
        shape.kappa,
        p_c,
        shape.b,
        (shape.x_end - ego.x).max(0.0),
        shape.spacing,
    )?;
    Ok(path
        .waypoints
        .iter()
        .map(|p| total_potential((p.x, p.y), scene, distances, params) * shape.spacing)
        .sum())
}

/// Grid candidates over a feasible interval, both endpoints included.
pub fn cp_candidates(interval: &CpInterval, floor: f64, grid_step: f64) -> Vec<f64> {
    let lo = interval.lower.map_or(floor, |l| l.max(floor));
    let hi = if interval.upper.is_finite() {
        interval.upper
    } else {
        lo + OPEN_INTERVAL_SPAN
    };
    if lo > hi {
        return Vec::new();
    }
    let n = ((hi - lo) / grid_step).floor() as usize;
    let mut out: Vec<f64> = (0..=n).map(|k| lo + k as f64 * grid_step).collect();
    if hi - out[out.len() - 1] > 1e-9 {
        out.push(hi);
    }
    out
}

/// Midpoint with the lowest path cost inside the interval.
///
/// Returns `None` (abort) when the interval is infeasible or does not reach
/// past the ego. Cost ties go to the candidate nearest the interval midpoint.
pub fn select_cp(
    interval: &CpInterval,
    ego: &VehicleState,
    scene: &Scene,
    distances: &[SafeDistances],
    params: &FieldParams,
    shape: &CandidateShape,
    grid_step: f64,
) -> Result<Option<f64>> {
    select_cp_by(interval, ego.x, grid_step, |p| {
        path_cost(ego, p, shape, scene, distances, params)
    })
}

/// Grid search of [`select_cp`] over an arbitrary candidate cost.
pub fn select_cp_by<F>(
    interval: &CpInterval,
    floor: f64,
    grid_step: f64,
    cost: F,
) -> Result<Option<f64>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    ensure_positive("grid_step", grid_step)?;
    if !interval.feasible {
        return Ok(None);
    }
    let candidates = cp_candidates(interval, floor, grid_step);
    if candidates.is_empty() {
        return Ok(None);
    }
    let mid = 0.5 * (candidates[0] + candidates[candidates.len() - 1]);
    let costs: Vec<f64> = candidates
        .par_iter()
        .map(|&p| cost(p))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for i in 1..candidates.len() {
        let (c, b) = (costs[i], costs[best]);
        let tol = COST_TIE_TOLERANCE * c.abs().max(b.abs()).max(1.0);
        let closer = (candidates[i] - mid).abs() < (candidates[best] - mid).abs();
        if c < b - tol || ((c - b).abs() <= tol && closer) {
            best = i;
        }
    }
    Ok(Some(candidates[best]))
}
