//! Non-cooperative and cooperative merge rules.
//!
//! The four `*_speed_*` functions solve the merge inequalities for the speed at
//! which they hold with equality. [`decide`] turns them into a merge decision:
//! gaps are evaluated non-cooperatively first, a V2V negotiation is opened
//! when no gap works, and the ego halts before the end of the side lane when
//! infeasibility persists.
//!
//! Gap `k` lies between main-lane obstacles `k - 1` (follower) and `k`
//! (leader), with obstacles sorted by ascending `x`. Gap `0` has no follower
//! and gap `n` has no leader.

use serde::{Deserialize, Serialize};

use crate::domain::{AccelLimits, LaneGeometry, MergeParams, RssParams, VehicleState};
use crate::error::{Error, Result};
use crate::rss::longitudinal_safe_distance;

const TIME_EPS: f64 = 1e-9;
const SPEED_SEARCH_MAX: f64 = 150.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MergeMode {
    LaneKeep,
    MergeNonCoop,
    NegotiateCoop,
    MergeCoop,
    Halt,
    Abort,
}

impl MergeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MergeMode::LaneKeep => "LaneKeep",
            MergeMode::MergeNonCoop => "MergeNonCoop",
            MergeMode::NegotiateCoop => "NegotiateCoop",
            MergeMode::MergeCoop => "MergeCoop",
            MergeMode::Halt => "Halt",
            MergeMode::Abort => "Abort",
        }
    }
}

impl std::fmt::Display for MergeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoopRequest {
    SlowDown,
    SpeedUp,
}

/// V2V request sent by the ego to one main-lane vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoopMessage {
    pub sender_id: String,
    pub receiver_id: String,
    /// Proposed sigmoid midpoint (m).
    pub p_c: f64,
    /// Predicted minimum longitudinal safe distance at the midpoint (m).
    pub d_rss_star: f64,
    pub request: CoopRequest,
    pub timestamp: f64,
}

impl CoopMessage {
    pub fn validate(&self) -> Result<()> {
        if !self.p_c.is_finite() {
            return Err(Error::param("p_c", "must be finite"));
        }
        if !(self.d_rss_star >= 0.0) || !self.d_rss_star.is_finite() {
            return Err(Error::param("d_rss_star", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Answer from a main-lane vehicle to a [`CoopMessage`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoopReply {
    pub sender_id: String,
    pub receiver_id: String,
    pub accepted: bool,
    pub v_obs_star: Option<f64>,
    pub timestamp: f64,
}

/// Output of the rule engine for one evaluation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeDecision {
    pub mode: MergeMode,
    pub target_gap: Option<usize>,
    pub v_ego_star: Option<f64>,
    pub v_obs_star: Option<f64>,
    pub cp_hint: Option<f64>,
    /// Message to transmit this step, present only when a negotiation opens.
    pub outgoing: Option<CoopMessage>,
}

impl MergeDecision {
    fn bare(mode: MergeMode) -> Self {
        Self {
            mode,
            target_gap: None,
            v_ego_star: None,
            v_obs_star: None,
            cp_hint: None,
            outgoing: None,
        }
    }

    pub fn lane_keep() -> Self {
        Self::bare(MergeMode::LaneKeep)
    }

    pub fn halt() -> Self {
        Self::bare(MergeMode::Halt)
    }

    pub fn abort() -> Self {
        Self::bare(MergeMode::Abort)
    }

    pub fn non_coop(gap: usize, v_ego_star: f64) -> Self {
        Self {
            target_gap: Some(gap),
            v_ego_star: Some(v_ego_star),
            ..Self::bare(MergeMode::MergeNonCoop)
        }
    }

    /// Checks the field-presence rules tied to each mode.
    pub fn is_well_formed(&self) -> bool {
        match self.mode {
            MergeMode::MergeNonCoop => self.v_ego_star.is_some(),
            MergeMode::MergeCoop | MergeMode::NegotiateCoop => {
                self.v_obs_star.is_some() || self.cp_hint.is_some()
            }
            MergeMode::Halt | MergeMode::Abort => {
                self.v_ego_star.is_none() && self.v_obs_star.is_none()
            }
            MergeMode::LaneKeep => true,
        }
    }
}

/// Smallest ego speed for which the ego stays ahead of a follower that may
/// accelerate during the first half of the merge window.
pub fn noncoop_min_speed_ahead(
    x_ego: f64,
    x_obs: f64,
    v_obs: f64,
    a_obs_accel_max: f64,
    rho_m: f64,
    d_rss: f64,
) -> f64 {
    (2.0 / rho_m)
        * (x_obs - x_ego + 0.5 * v_obs * rho_m + a_obs_accel_max * rho_m * rho_m / 8.0 + d_rss)
}

/// Largest ego speed for which the ego stays behind a leader over the merge window.
pub fn noncoop_max_speed_behind(x_ego: f64, x_obs: f64, v_obs: f64, rho_m: f64, d_rss: f64) -> f64 {
    v_obs + (x_obs - x_ego - d_rss) / rho_m
}

/// Highest speed a cooperating follower may keep so the ego can cross at `p_c` ahead of it.
pub fn coop_max_obstacle_speed_ego_ahead(
    x_obs: f64,
    v_obs: f64,
    p_c: f64,
    d_rss_star: f64,
    rho_c: f64,
    rho_m: f64,
) -> f64 {
    (p_c - d_rss_star - x_obs - 0.5 * v_obs * rho_c) / (0.5 * rho_c + 0.5 * rho_m)
}

/// Lowest speed a cooperating leader must reach so the braking ego stays behind it.
pub fn coop_min_obstacle_speed_ego_behind(
    x_ego: f64,
    v_ego: f64,
    x_obs: f64,
    v_obs: f64,
    a_ego_brake_min: f64,
    rho_c: f64,
    d_rss: f64,
) -> f64 {
    (2.0 / rho_c) * (x_ego - x_obs + v_ego * rho_c - 0.5 * a_ego_brake_min * rho_c * rho_c + d_rss)
        - v_obs
}

/// Center-to-center clearance that keeps the bumper gap at least `d_rss`.
pub fn center_clearance(d_rss: f64, length_a: f64, length_b: f64) -> f64 {
    d_rss + 0.5 * (length_a + length_b)
}

/// A vehicle observed on the main lane.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficVehicle {
    pub id: String,
    pub state: VehicleState,
    /// Safe-distance parameters, with the retardation time already effective.
    pub rss: RssParams,
}

/// Everything [`decide`] reads for one evaluation.
#[derive(Debug, Clone, Copy)]
pub struct DecisionInput<'a> {
    pub ego_id: &'a str,
    pub ego: &'a VehicleState,
    pub ego_rss: &'a RssParams,
    /// Lowest speed a merge may be commanded at (m/s).
    pub ego_v_min: f64,
    pub ego_v_max: f64,
    /// Main-lane vehicles sorted by ascending `x`.
    pub obstacles: &'a [TrafficVehicle],
    pub params: &'a MergeParams,
    pub lane: &'a LaneGeometry,
    /// Simulation time (s).
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Negotiation {
    Idle,
    Pending {
        message: CoopMessage,
        gap: usize,
        ego_speed_plan: f64,
        sent_at: f64,
    },
    Accepted {
        message: CoopMessage,
        gap: usize,
        ego_speed_plan: f64,
        v_obs_star: f64,
    },
    Failed {
        receiver_id: String,
        at: f64,
    },
}

/// Negotiation and blocking record carried between evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct CoopState {
    pub negotiation: Negotiation,
    /// Start of the current run of steps without a usable gap.
    pub blocked_since: Option<f64>,
    pub halted: bool,
}

impl Default for CoopState {
    fn default() -> Self {
        Self {
            negotiation: Negotiation::Idle,
            blocked_since: None,
            halted: false,
        }
    }
}

impl CoopState {
    /// Applies a reply delivered at time `t`. Replies from anyone but the
    /// pending receiver are ignored.
    pub fn on_reply(&mut self, reply: &CoopReply, t: f64) {
        if let Negotiation::Pending {
            message,
            gap,
            ego_speed_plan,
            ..
        } = &self.negotiation
        {
            if reply.sender_id != message.receiver_id {
                return;
            }
            self.negotiation = match (reply.accepted, reply.v_obs_star) {
                (true, Some(v)) => Negotiation::Accepted {
                    message: message.clone(),
                    gap: *gap,
                    ego_speed_plan: *ego_speed_plan,
                    v_obs_star: v,
                },
                _ => Negotiation::Failed {
                    receiver_id: message.receiver_id.clone(),
                    at: t,
                },
            };
        }
    }

    /// Marks the current step as blocked (no usable gap).
    pub fn mark_blocked(&mut self, t: f64) {
        self.blocked_since.get_or_insert(t);
    }

    /// Called once a merge path has been committed.
    pub fn clear_blocked(&mut self) {
        self.blocked_since = None;
        self.halted = false;
    }
}

/// Feasible ego-speed window for one gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapBounds {
    pub gap: usize,
    pub follower: Option<usize>,
    pub leader: Option<usize>,
    /// Lowest admissible speed from the follower constraint (0 without follower).
    pub v_min: f64,
    /// Highest admissible speed from the leader constraint (+inf without leader).
    pub v_max: f64,
}

impl GapBounds {
    /// Clamp of `v` into the window intersected with `[floor, cap]`, if non-empty.
    pub fn command(&self, v: f64, floor: f64, cap: f64) -> Option<f64> {
        let lo = self.v_min.max(floor.max(0.0));
        let hi = self.v_max.min(cap);
        (lo <= hi).then(|| v.clamp(lo, hi))
    }
}

fn ensure_sorted(obstacles: &[TrafficVehicle]) -> Result<()> {
    if obstacles.windows(2).any(|w| w[0].state.x > w[1].state.x) {
        return Err(Error::Precondition(
            "main-lane obstacles must be sorted by ascending x".into(),
        ));
    }
    Ok(())
}

fn bisect_increasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Center clearance the follower owes the ego when the ego merges ahead of it.
///
/// The follower is projected at its worst-case speed after accelerating for
/// half the merge window; the ego runs at `v_ego`.
pub fn follower_clearance(
    follower: &TrafficVehicle,
    ego: &VehicleState,
    ego_rss: &RssParams,
    rho_m: f64,
    v_ego: f64,
) -> Result<f64> {
    let v_rear = follower.state.speed_long + 0.5 * follower.rss.a_accel_max * rho_m;
    let d = longitudinal_safe_distance(
        v_rear,
        v_ego.max(0.0),
        &follower.rss,
        ego_rss.a_brake_max,
        follower.state.length,
        ego.length,
    )?;
    Ok(center_clearance(d, follower.state.length, ego.length))
}

/// Center clearance the ego owes a leader when running at `v_ego`.
pub fn leader_clearance(
    leader: &TrafficVehicle,
    ego: &VehicleState,
    ego_rss: &RssParams,
    v_ego: f64,
) -> Result<f64> {
    let d = longitudinal_safe_distance(
        v_ego.max(0.0),
        leader.state.speed_long,
        ego_rss,
        leader.rss.a_brake_max,
        ego.length,
        leader.state.length,
    )?;
    Ok(center_clearance(d, ego.length, leader.state.length))
}

/// Self-consistent speed window for gap `gap`.
///
/// The safe distance in each inequality depends on the ego speed being solved
/// for; the boundary is found where the closed-form solution reproduces the
/// speed it was evaluated at.
pub fn gap_speed_bounds(input: &DecisionInput<'_>, gap: usize) -> Result<GapBounds> {
    let n = input.obstacles.len();
    if gap > n {
        return Err(Error::Precondition(format!(
            "gap {gap} out of range 0..={n}"
        )));
    }
    let ego = input.ego;
    let rho_m = input.params.rho_m;
    let follower = (gap > 0).then(|| gap - 1);
    let leader = (gap < n).then_some(gap);

    let v_min = match follower {
        None => 0.0,
        Some(i) => {
            let f = &input.obstacles[i];
            let bound_at = |v: f64| -> Result<f64> {
                let d = follower_clearance(f, ego, input.ego_rss, rho_m, v)?;
                Ok(noncoop_min_speed_ahead(
                    ego.x,
                    f.state.x,
                    f.state.speed_long,
                    f.rss.a_accel_max,
                    rho_m,
                    d,
                ))
            };
            // g(v) = v - bound(v) is increasing because the clearance shrinks
            // as the front (ego) speed grows.
            let g0 = -bound_at(0.0)?;
            let g_max = SPEED_SEARCH_MAX - bound_at(SPEED_SEARCH_MAX)?;
            if g0 >= 0.0 {
                0.0
            } else if g_max < 0.0 {
                f64::INFINITY
            } else {
                bisect_increasing(
                    |v| v - bound_at(v).unwrap_or(f64::INFINITY),
                    0.0,
                    SPEED_SEARCH_MAX,
                )
            }
        }
    };

    let v_max = match leader {
        None => f64::INFINITY,
        Some(i) => {
            let l = &input.obstacles[i];
            let bound_at = |v: f64| -> Result<f64> {
                let d = leader_clearance(l, ego, input.ego_rss, v)?;
                Ok(noncoop_max_speed_behind(
                    ego.x,
                    l.state.x,
                    l.state.speed_long,
                    rho_m,
                    d,
                ))
            };
            // h(v) = bound(v) - v is decreasing because the clearance grows
            // with the rear (ego) speed.
            let at_zero = bound_at(0.0)?;
            if at_zero < 0.0 {
                at_zero
            } else if bound_at(SPEED_SEARCH_MAX)? >= SPEED_SEARCH_MAX {
                f64::INFINITY
            } else {
                bisect_increasing(
                    |v| v - bound_at(v).unwrap_or(f64::NEG_INFINITY),
                    0.0,
                    SPEED_SEARCH_MAX,
                )
            }
        }
    };

    Ok(GapBounds {
        gap,
        follower,
        leader,
        v_min,
        v_max,
    })
}

/// Speed the ego can still reach before the side lane ends.
pub fn reachable_speed_cap(input: &DecisionInput<'_>) -> f64 {
    let v = input.ego.speed_long;
    let remaining = (input.lane.side_lane_end_x - input.ego.x).max(0.0);
    let reach = (v * v + 2.0 * input.ego_rss.a_accel_max * remaining).sqrt();
    input.ego_v_max.min(reach.max(v))
}

/// Best non-cooperative gap: the one whose command is closest to the current
/// speed, ties going to the rearmost gap.
pub fn best_noncoop_gap(input: &DecisionInput<'_>) -> Result<Option<(GapBounds, f64)>> {
    let v = input.ego.speed_long;
    let cap = reachable_speed_cap(input);
    let mut best: Option<(GapBounds, f64)> = None;
    for gap in 0..=input.obstacles.len() {
        let bounds = gap_speed_bounds(input, gap)?;
        if let Some(cmd) = bounds.command(v, input.ego_v_min, cap) {
            let better = match &best {
                None => true,
                Some((_, b)) => (cmd - v).abs() < (b - v).abs() - 1e-12,
            };
            if better {
                best = Some((bounds, cmd));
            }
        }
    }
    Ok(best)
}

/// Whether persistent blocking and the remaining side-lane length require a halt.
pub fn halt_required(input: &DecisionInput<'_>, blocked_since: Option<f64>) -> bool {
    let Some(since) = blocked_since else {
        return false;
    };
    if input.elapsed - since < input.params.halt_window - TIME_EPS {
        return false;
    }
    let v = input.ego.speed_long;
    let remaining = input.lane.side_lane_end_x - input.ego.x;
    let stopping = v * v / (2.0 * input.ego_rss.a_brake_min);
    remaining < stopping + input.params.halt_margin
}

struct CoopPlan {
    gap: usize,
    receiver: usize,
    request: CoopRequest,
    deficit: f64,
}

fn choose_coop_gap(input: &DecisionInput<'_>) -> Result<Option<CoopPlan>> {
    let v = input.ego.speed_long;
    let mut best: Option<CoopPlan> = None;
    for gap in 0..=input.obstacles.len() {
        let b = gap_speed_bounds(input, gap)?;
        let ahead = b.v_min - v;
        let behind = v - b.v_max;
        let plan = match (ahead > 0.0, behind > 0.0, b.follower, b.leader) {
            (true, false, Some(f), _) => Some(CoopPlan {
                gap,
                receiver: f,
                request: CoopRequest::SlowDown,
                deficit: ahead,
            }),
            (false, true, _, Some(l)) => Some(CoopPlan {
                gap,
                receiver: l,
                request: CoopRequest::SpeedUp,
                deficit: behind,
            }),
            _ => None,
        };
        if let Some(p) = plan {
            if best.as_ref().is_none_or(|b| p.deficit < b.deficit - 1e-12) {
                best = Some(p);
            }
        }
    }
    Ok(best)
}

/// Builds the negotiation request for `plan`. Returns the message and the
/// speed the ego holds while the negotiation runs.
fn build_request(input: &DecisionInput<'_>, plan: &CoopPlan) -> Result<(CoopMessage, f64)> {
    let ego = input.ego;
    let p = input.params;
    let other = &input.obstacles[plan.receiver];
    let v_e = ego.speed_long;
    let v_o = other.state.speed_long;
    let half_lengths = 0.5 * (ego.length + other.state.length);

    let (p_c, d_star, ego_plan) = match plan.request {
        CoopRequest::SlowDown => {
            // The follower is asked to brake at its comfortable rate for ρ_c;
            // the midpoint is placed where that speed meets the constraint.
            let v_target = (v_o - other.rss.a_brake_min * p.rho_c).max(0.0);
            let d_star = longitudinal_safe_distance(
                v_target,
                v_e,
                &other.rss,
                input.ego_rss.a_brake_max,
                other.state.length,
                ego.length,
            )?;
            let p_c = other.state.x
                + 0.5 * (v_o + v_target) * p.rho_c
                + v_target * 0.5 * p.rho_m
                + d_star
                + half_lengths;
            (p_c.max(ego.x + v_e * p.rho_c), d_star, v_e)
        }
        CoopRequest::SpeedUp => {
            let v_after = (v_e - input.ego_rss.a_brake_min * p.rho_c).max(0.0);
            let d = longitudinal_safe_distance(
                v_after,
                v_o,
                input.ego_rss,
                other.rss.a_brake_max,
                ego.length,
                other.state.length,
            )?;
            let braking = v_e * p.rho_c - 0.5 * input.ego_rss.a_brake_min * p.rho_c * p.rho_c;
            let p_c = ego.x + braking.max(0.0) + v_after * 0.5 * p.rho_m;
            (p_c, d, v_after)
        }
    };

    let msg = CoopMessage {
        sender_id: input.ego_id.to_string(),
        receiver_id: other.id.clone(),
        p_c,
        d_rss_star: d_star,
        request: plan.request,
        timestamp: input.elapsed,
    };
    Ok((msg, ego_plan))
}

/// Evaluates the merge rules for one step.
///
/// Returns the decision together with the updated negotiation record. The
/// caller transmits `decision.outgoing` when present, feeds replies back via
/// [`CoopState::on_reply`], and clears the blocking record once a merge path
/// has been committed.
pub fn decide(input: &DecisionInput<'_>, state: &CoopState) -> Result<(MergeDecision, CoopState)> {
    let mut next = state.clone();
    if input.elapsed < input.params.t_m_dec - TIME_EPS {
        return Ok((MergeDecision::lane_keep(), next));
    }
    ensure_sorted(input.obstacles)?;

    if input.obstacles.is_empty() {
        next.halted = false;
        return Ok((MergeDecision::non_coop(0, input.ego.speed_long), next));
    }

    match &state.negotiation {
        Negotiation::Accepted {
            message,
            gap,
            ego_speed_plan,
            v_obs_star,
        } => {
            let decision = MergeDecision {
                mode: MergeMode::MergeCoop,
                target_gap: Some(*gap),
                v_ego_star: Some(*ego_speed_plan),
                v_obs_star: Some(*v_obs_star),
                cp_hint: Some(message.p_c),
                outgoing: None,
            };
            return Ok((decision, next));
        }
        Negotiation::Pending {
            message,
            gap,
            ego_speed_plan,
            sent_at,
        } => {
            if input.elapsed - sent_at < input.params.rho_c - TIME_EPS {
                let decision = MergeDecision {
                    mode: MergeMode::NegotiateCoop,
                    target_gap: Some(*gap),
                    v_ego_star: Some(*ego_speed_plan),
                    v_obs_star: None,
                    cp_hint: Some(message.p_c),
                    outgoing: None,
                };
                return Ok((decision, next));
            }
            next.negotiation = Negotiation::Failed {
                receiver_id: message.receiver_id.clone(),
                at: input.elapsed,
            };
        }
        Negotiation::Idle | Negotiation::Failed { .. } => {}
    }

    if let Some((bounds, v_star)) = best_noncoop_gap(input)? {
        return Ok((MergeDecision::non_coop(bounds.gap, v_star), next));
    }

    next.mark_blocked(input.elapsed);

    if input.params.coop_enabled && next.negotiation == Negotiation::Idle && !next.halted {
        if let Some(plan) = choose_coop_gap(input)? {
            let (message, ego_speed_plan) = build_request(input, &plan)?;
            let decision = MergeDecision {
                mode: MergeMode::NegotiateCoop,
                target_gap: Some(plan.gap),
                v_ego_star: Some(ego_speed_plan),
                v_obs_star: None,
                cp_hint: Some(message.p_c),
                outgoing: Some(message.clone()),
            };
            next.negotiation = Negotiation::Pending {
                message,
                gap: plan.gap,
                ego_speed_plan,
                sent_at: input.elapsed,
            };
            return Ok((decision, next));
        }
    }

    if next.halted || halt_required(input, next.blocked_since) {
        next.halted = true;
        return Ok((MergeDecision::halt(), next));
    }
    Ok((MergeDecision::lane_keep(), next))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObstaclePolicy {
    Cooperative,
    NonCooperative,
    Silent,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Accept {
        v_obs_star: f64,
        limits: AccelLimits,
    },
    Reject,
    NoReply,
}

/// What a receiving vehicle knows about the requester and the rule timing.
#[derive(Debug, Clone, Copy)]
pub struct RespondContext<'a> {
    /// The requesting ego as observed by the receiver.
    pub ego: &'a VehicleState,
    pub ego_brake_min: f64,
    pub rho_c: f64,
    pub rho_m: f64,
    /// Receiver's top speed (m/s).
    pub v_max: f64,
}

/// Reaction of a main-lane vehicle to a cooperation request.
pub fn obstacle_respond(
    msg: &CoopMessage,
    obstacle: &VehicleState,
    policy: ObstaclePolicy,
    obstacle_params: &RssParams,
    ctx: &RespondContext<'_>,
) -> Result<Response> {
    msg.validate()?;
    match policy {
        ObstaclePolicy::Silent => return Ok(Response::NoReply),
        ObstaclePolicy::NonCooperative => return Ok(Response::Reject),
        ObstaclePolicy::Cooperative => {}
    }
    let clearance = center_clearance(msg.d_rss_star, ctx.ego.length, obstacle.length);
    let v_o = obstacle.speed_long;
    match msg.request {
        CoopRequest::SlowDown => {
            let v = coop_max_obstacle_speed_ego_ahead(
                obstacle.x, v_o, msg.p_c, clearance, ctx.rho_c, ctx.rho_m,
            );
            if v < 0.0 {
                return Ok(Response::Reject);
            }
            Ok(Response::Accept {
                v_obs_star: v.min(v_o).min(ctx.v_max),
                limits: AccelLimits::new(0.0, obstacle_params.a_brake_min),
            })
        }
        CoopRequest::SpeedUp => {
            let v = coop_min_obstacle_speed_ego_behind(
                ctx.ego.x,
                ctx.ego.speed_long,
                obstacle.x,
                v_o,
                ctx.ego_brake_min,
                ctx.rho_c,
                clearance,
            );
            if v > ctx.v_max {
                return Ok(Response::Reject);
            }
            Ok(Response::Accept {
                v_obs_star: v.max(v_o).max(0.0),
                limits: AccelLimits::new(obstacle_params.a_accel_max, 0.0),
            })
        }
    }
}
