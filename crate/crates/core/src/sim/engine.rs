//! Fixed-step scenario engine.
//!
//! Each step: fire gap events, deliver due V2V messages and let receivers
//! answer, evaluate the ego's merge rules, plan a merge path when a merge is
//! decided, compute controls for every vehicle, record the pre-step state
//! and controls, then integrate.

use crate::domain::{bumper_gap, AccelLimits, RssParams, VehicleState};
use crate::error::{Error, Result};
use crate::merge_rules::{
    center_clearance, decide, halt_required, obstacle_respond, CoopReply, CoopState, DecisionInput,
    MergeDecision, MergeMode, Negotiation, ObstaclePolicy, RespondContext, Response,
    TrafficVehicle,
};
use crate::potential_field::{
    obstacle_potential_with, sigma_from_distance, total_potential, FieldMode, Scene,
};
use crate::rss::{lateral_safe_distance, longitudinal_safe_distance, max_safe_following_speed};
use crate::sigmoid_planner::{
    cp_feasible_interval, generate_path, select_cp_by, select_kappa, CpDistances, CpInterval,
    SigmoidPath,
};
use crate::sim::channel::{Channel, V2vPayload};
use crate::sim::config::{Role, ScenarioConfig};
use crate::sim::metrics::{compute_metrics, Metrics, SettleDetector};
use crate::sim::trace::{
    LeaderSample, MessageEvent, MessageEventKind, PathDump, StepRecord, Trace, TraceMeta,
    VehicleRecord,
};
use crate::vehicle_model::{
    lookahead_distance, speed_controller, step_dynamics, track_lane, track_path, VehicleParams,
    SPEED_GAIN,
};

/// The run continues this long after settlement (s).
pub const POST_SETTLE: f64 = 2.0;
/// Path length past the midpoint, in units of 1/κ, plus a fixed tail.
const PATH_TAIL_KAPPA: f64 = 12.0;
const PATH_TAIL_FIXED: f64 = 20.0;
/// The path starts this many 1/κ before its midpoint at the earliest.
const CP_FLOOR_KAPPA: f64 = 4.0;
/// Integration step of the motion predictor (s).
const PREDICT_STEP: f64 = 0.02;
/// Sampling step of the crossing check (s).
const CHECK_STEP: f64 = 0.1;
/// Time the crossing check extends past the ego leaving the side lane (s).
const CHECK_TAIL: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
struct CoopProfile {
    v_target: f64,
    limits: AccelLimits,
    until: f64,
}

#[derive(Debug, Clone)]
struct SimVehicle {
    id: String,
    role: Role,
    policy: ObstaclePolicy,
    params: VehicleParams,
    /// Safe-distance parameters with the channel delay added to the lag.
    rss: RssParams,
    state: VehicleState,
    lane: usize,
    cruise: f64,
    coop: Option<CoopProfile>,
    removed: bool,
}

impl SimVehicle {
    fn comfort(&self) -> AccelLimits {
        AccelLimits::new(self.rss.a_accel_max, self.rss.a_brake_min)
    }

    fn active_coop(&self, t: f64) -> Option<CoopProfile> {
        self.coop.filter(|c| t < c.until)
    }
}

#[derive(Debug, Clone)]
struct Commit {
    decision: MergeDecision,
    v_star: f64,
    path: SigmoidPath,
}

/// Motion prediction sampled every [`PREDICT_STEP`].
#[derive(Debug, Clone)]
struct Prediction {
    xs: Vec<f64>,
    vs: Vec<f64>,
}

impl Prediction {
    /// Integrates the proportional speed law toward `target(τ)` within `limits`.
    fn simulate(
        x0: f64,
        v0: f64,
        horizon: f64,
        limits: AccelLimits,
        v_max: f64,
        target: impl Fn(f64) -> f64,
    ) -> Self {
        let n = (horizon / PREDICT_STEP).ceil() as usize + 1;
        let mut xs = Vec::with_capacity(n);
        let mut vs = Vec::with_capacity(n);
        let (mut x, mut v) = (x0, v0);
        for k in 0..n {
            xs.push(x);
            vs.push(v);
            let tau = k as f64 * PREDICT_STEP;
            let a = limits.clamp(SPEED_GAIN * (target(tau) - v));
            let v_next = (v + a * PREDICT_STEP).clamp(0.0, v_max);
            x += 0.5 * (v + v_next) * PREDICT_STEP;
            v = v_next;
        }
        Self { xs, vs }
    }

    fn at(&self, tau: f64) -> Option<(f64, f64)> {
        let f = tau / PREDICT_STEP;
        let i = f.floor() as usize;
        if i + 1 >= self.xs.len() {
            return None;
        }
        let w = f - i as f64;
        Some((
            self.xs[i] + w * (self.xs[i + 1] - self.xs[i]),
            self.vs[i] + w * (self.vs[i + 1] - self.vs[i]),
        ))
    }

    /// First time the predicted position reaches `x`.
    fn time_at(&self, x: f64) -> Option<f64> {
        if self.xs[0] >= x {
            return Some(0.0);
        }
        let i = self.xs.partition_point(|&p| p < x);
        if i >= self.xs.len() {
            return None;
        }
        let (a, b) = (self.xs[i - 1], self.xs[i]);
        let w = if b > a { (x - a) / (b - a) } else { 0.0 };
        Some((i as f64 - 1.0 + w) * PREDICT_STEP)
    }
}

struct Engine<'a> {
    cfg: &'a ScenarioConfig,
    vehicles: Vec<SimVehicle>,
    ego: usize,
    channel: Channel<V2vPayload>,
    coop: CoopState,
    commit: Option<Commit>,
    settle: SettleDetector,
    /// Speed command carried between steps while no path is committed.
    pending_speed: Option<f64>,
    events_fired: Vec<bool>,
    messages: Vec<MessageEvent>,
    paths: Vec<PathDump>,
}

fn nearest_lane(centers: &[f64], y: f64) -> usize {
    centers
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - y).abs().total_cmp(&(b.1 - y).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Logit of the sigmoid fraction at which the ego footprint edge crosses the
/// boundary between the side and target lanes. Returns `(enter, leave)` as
/// multiples of 1/κ relative to the midpoint.
fn lane_crossing_offsets(cfg: &ScenarioConfig, width: f64) -> (f64, f64) {
    let lane = &cfg.lane;
    let w = lane.merge_offset().abs();
    let boundary = 0.5 * (lane.side_center() + lane.target_center());
    let mid = (boundary - lane.side_center()).abs();
    let logit = |s: f64| {
        let s = s.clamp(1e-6, 1.0 - 1e-6);
        (s / (1.0 - s)).ln()
    };
    (
        logit((mid - 0.5 * width) / w),
        logit((mid + 0.5 * width) / w),
    )
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        let vehicles: Vec<SimVehicle> = cfg
            .vehicles
            .iter()
            .map(|v| {
                let mut state = VehicleState::cruising(
                    v.initial.x,
                    v.initial.y,
                    v.initial.v,
                    v.params.length,
                    v.params.width,
                );
                state.speed_lat = 0.0;
                SimVehicle {
                    id: v.id.clone(),
                    role: v.role,
                    policy: v.policy,
                    params: v.params,
                    rss: v.rss.with_extra_lag(cfg.channel.delay),
                    state,
                    lane: match v.role {
                        Role::Ego => cfg.lane.side_lane,
                        Role::Obstacle => nearest_lane(&cfg.lane.lane_centers, v.initial.y),
                    },
                    cruise: v.cruise_speed(),
                    coop: None,
                    removed: false,
                }
            })
            .collect();
        Self {
            ego: cfg.ego_index(),
            vehicles,
            channel: Channel::new(
                cfg.channel.delay,
                cfg.channel.drop_probability,
                cfg.channel.seed,
            ),
            coop: CoopState::default(),
            commit: None,
            settle: SettleDetector::default(),
            pending_speed: None,
            events_fired: vec![false; cfg.events.len()],
            messages: Vec::new(),
            paths: Vec::new(),
            cfg,
        }
    }

    fn ego(&self) -> &SimVehicle {
        &self.vehicles[self.ego]
    }

    /// Indices of live obstacles in the target lane, sorted by `x`.
    fn target_lane_obstacles(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.vehicles.len())
            .filter(|&i| {
                let v = &self.vehicles[i];
                i != self.ego && !v.removed && v.lane == self.cfg.lane.target_lane
            })
            .collect();
        idx.sort_by(|&a, &b| {
            self.vehicles[a]
                .state
                .x
                .total_cmp(&self.vehicles[b].state.x)
        });
        idx
    }

    fn traffic(&self, idx: &[usize]) -> Vec<TrafficVehicle> {
        idx.iter()
            .map(|&i| {
                let v = &self.vehicles[i];
                TrafficVehicle {
                    id: v.id.clone(),
                    state: v.state,
                    rss: v.rss,
                }
            })
            .collect()
    }

    fn log(&mut self, t: f64, event: MessageEventKind, sent_at: f64, payload: &V2vPayload) {
        self.messages.push(MessageEvent {
            t,
            event,
            sent_at,
            payload: payload.clone(),
        });
    }

    fn send(&mut self, t: f64, payload: V2vPayload) {
        self.log(t, MessageEventKind::Sent, t, &payload);
        self.channel.send(t, payload);
    }

    fn fire_events(&mut self, t: f64) {
        for (i, e) in self.cfg.events.iter().enumerate() {
            if self.events_fired[i] || e.t > t + 1e-9 {
                continue;
            }
            self.events_fired[i] = true;
            let target = self.cfg.lane.target_lane;
            for v in self.vehicles.iter_mut() {
                if v.role == Role::Obstacle
                    && v.lane == target
                    && (e.x_min..=e.x_max).contains(&v.state.x)
                {
                    v.removed = true;
                }
            }
        }
    }

    fn process_channel(&mut self, t: f64) -> Result<()> {
        let out = self.channel.step(t);
        for m in &out.dropped {
            self.log(t, MessageEventKind::Dropped, m.sent_at, &m.payload);
        }
        for m in out.delivered {
            self.log(t, MessageEventKind::Delivered, m.sent_at, &m.payload);
            match m.payload {
                V2vPayload::Request(msg) => {
                    let Some(i) = self
                        .vehicles
                        .iter()
                        .position(|v| v.id == msg.receiver_id && !v.removed)
                    else {
                        continue;
                    };
                    let ego = self.ego().clone();
                    let receiver = &self.vehicles[i];
                    let ctx = RespondContext {
                        ego: &ego.state,
                        ego_brake_min: ego.rss.a_brake_min,
                        rho_c: self.cfg.merge.rho_c,
                        rho_m: self.cfg.merge.rho_m,
                        v_max: receiver.params.v_max,
                    };
                    let response = obstacle_respond(
                        &msg,
                        &receiver.state,
                        receiver.policy,
                        &receiver.rss,
                        &ctx,
                    )?;
                    let reply = |accepted: bool, v: Option<f64>| CoopReply {
                        sender_id: msg.receiver_id.clone(),
                        receiver_id: msg.sender_id.clone(),
                        accepted,
                        v_obs_star: v,
                        timestamp: t,
                    };
                    match response {
                        Response::Accept { v_obs_star, limits } => {
                            self.vehicles[i].coop = Some(CoopProfile {
                                v_target: v_obs_star,
                                limits,
                                until: t + self.cfg.merge.rho_c + self.cfg.merge.rho_m,
                            });
                            self.send(t, V2vPayload::Reply(reply(true, Some(v_obs_star))));
                        }
                        Response::Reject => self.send(t, V2vPayload::Reply(reply(false, None))),
                        Response::NoReply => {}
                    }
                }
                V2vPayload::Reply(r) => self.coop.on_reply(&r, t),
            }
        }
        Ok(())
    }

    fn predict(&self, i: usize, horizon: f64, t: f64) -> Prediction {
        let v = &self.vehicles[i];
        let coop = v.active_coop(t);
        let limits = coop.map_or(v.comfort(), |c| {
            AccelLimits::new(
                c.limits.max_accel.min(v.rss.a_accel_max),
                c.limits.max_decel,
            )
        });
        let cruise = v.cruise;
        Prediction::simulate(
            v.state.x,
            v.state.speed_long,
            horizon,
            limits,
            v.params.v_max,
            move |tau| match coop {
                Some(c) if t + tau < c.until => c.v_target,
                _ => cruise,
            },
        )
    }

    /// Plans the merge path for `decision`, or `None` when no midpoint keeps
    /// the ego clear of the gap's follower and leader throughout the crossing.
    fn plan_merge(&self, decision: &MergeDecision, t: f64) -> Result<Option<(SigmoidPath, f64)>> {
        let cfg = self.cfg;
        let planner = &cfg.planner;
        let ego = self.ego();
        let gap = decision.target_gap.unwrap_or(0);
        let v_star = decision
            .v_ego_star
            .unwrap_or(ego.state.speed_long)
            .max(planner.min_merge_speed)
            .min(ego.params.v_max);
        let obstacles = self.target_lane_obstacles();
        if gap > obstacles.len() {
            return Err(Error::Precondition(format!("gap {gap} out of range")));
        }
        let follower = gap.checked_sub(1).map(|k| obstacles[k]);
        let leader = obstacles.get(gap).copied();

        let w = cfg.lane.merge_offset();
        let b = cfg.lane.side_center();
        let v_ref = ego
            .state
            .speed_long
            .max(v_star)
            .max(planner.min_merge_speed);
        let kappa = select_kappa(v_ref, w, planner.a_lat_comfort)?;
        let (z_in, z_out) = lane_crossing_offsets(cfg, ego.state.width);

        let horizon = planner.crossing_horizon
            + (z_out - z_in + PATH_TAIL_KAPPA) / kappa / planner.min_merge_speed
            + CHECK_TAIL
            + 1.0;
        let ego_pred = Prediction::simulate(
            ego.state.x,
            ego.state.speed_long,
            horizon,
            ego.comfort(),
            ego.params.v_max,
            |_| v_star,
        );
        let f_pred = follower.map(|i| (i, self.predict(i, horizon, t)));
        let l_pred = leader.map(|i| (i, self.predict(i, horizon, t)));

        let x0 = ego.state.x;
        let lo = x0 + CP_FLOOR_KAPPA / kappa;
        let reach = ego_pred
            .at(planner.crossing_horizon)
            .map_or(ego_pred.xs[ego_pred.xs.len() - 1], |p| p.0);
        let hi = reach.min(cfg.lane.side_lane_end_x - z_out / kappa - 0.5 * ego.state.length);
        if lo > hi {
            return Ok(None);
        }

        let margin = planner.safety_margin;
        let clear_at = |p_c: f64| -> Result<bool> {
            let Some(t_in) = ego_pred.time_at(p_c + z_in / kappa) else {
                return Ok(false);
            };
            let Some(t_out) = ego_pred.time_at(p_c + z_out / kappa) else {
                return Ok(false);
            };
            let t_end = t_out + CHECK_TAIL;
            let mut tau = t_in;
            loop {
                let Some((xe, ve)) = ego_pred.at(tau) else {
                    return Ok(false);
                };
                let mut states = Vec::with_capacity(2);
                let mut d = CpDistances {
                    d_rss_lead: 0.0,
                    d_rss_star: 0.0,
                    d_rss_next: 0.0,
                };
                if let Some((i, pred)) = &f_pred {
                    let f = &self.vehicles[*i];
                    let Some((xf, vf)) = pred.at(tau) else {
                        return Ok(false);
                    };
                    let dist = longitudinal_safe_distance(
                        vf,
                        ve,
                        &f.rss,
                        ego.rss.a_brake_max,
                        f.state.length,
                        ego.state.length,
                    )?;
                    d.d_rss_star =
                        center_clearance(dist, f.state.length, ego.state.length) + margin;
                    states.push(VehicleState {
                        x: xf,
                        speed_long: vf,
                        ..f.state
                    });
                }
                if let Some((i, pred)) = &l_pred {
                    let l = &self.vehicles[*i];
                    let Some((xl, vl)) = pred.at(tau) else {
                        return Ok(false);
                    };
                    let dist = longitudinal_safe_distance(
                        ve,
                        vl,
                        &ego.rss,
                        l.rss.a_brake_max,
                        ego.state.length,
                        l.state.length,
                    )?;
                    d.d_rss_next =
                        center_clearance(dist, ego.state.length, l.state.length) + margin;
                    d.d_rss_lead = d.d_rss_next;
                    states.push(VehicleState {
                        x: xl,
                        speed_long: vl,
                        ..l.state
                    });
                }
                let local_gap = usize::from(f_pred.is_some());
                if states.len() == 2 && states[0].x > states[1].x {
                    return Ok(false);
                }
                let ego_at = VehicleState {
                    x: xe,
                    speed_long: ve,
                    ..ego.state
                };
                let interval = cp_feasible_interval(&ego_at, &states, local_gap, &d)?;
                if !interval.contains(xe) {
                    return Ok(false);
                }
                if tau >= t_end {
                    return Ok(true);
                }
                tau = (tau + CHECK_STEP).min(t_end);
            }
        };

        let step = planner.cp_grid_step;
        let n = ((hi - lo) / step).floor() as usize;
        let mut run: Option<(f64, f64)> = None;
        for k in 0..=n {
            let p = lo + k as f64 * step;
            if clear_at(p)? {
                run = Some(run.map_or((p, p), |(a, _)| (a, p)));
            } else if run.is_some() {
                break;
            }
        }
        let Some((run_lo, run_hi)) = run else {
            return Ok(None);
        };
        let interval = CpInterval {
            lower: Some(run_lo),
            upper: run_hi,
            feasible: true,
        };

        // Each waypoint is scored against the obstacles where they are
        // predicted to be when the ego reaches it.
        let x_end = run_hi + PATH_TAIL_KAPPA / kappa + PATH_TAIL_FIXED;
        let mut movers = Vec::with_capacity(obstacles.len());
        for &i in &obstacles {
            let o = &self.vehicles[i];
            let d_long = longitudinal_safe_distance(
                ego.state.speed_long,
                o.state.speed_long,
                &ego.rss,
                o.rss.a_brake_max,
                ego.state.length,
                o.state.length,
            )?;
            let d_lat =
                lateral_safe_distance(0.0, 0.0, &ego.rss, &o.rss, ego.state.width, o.state.width)?;
            let sigmas = (sigma_from_distance(d_lat), sigma_from_distance(d_long));
            movers.push((self.predict(i, horizon, t), o.state.y, sigmas));
        }
        let scene = Scene {
            lane: cfg.lane.clone(),
            obstacles: Vec::new(),
            target_waypoint: (x_end, cfg.lane.target_center()),
            mode: FieldMode::LaneMerging,
            ego_width: ego.state.width,
        };
        let t_last = (ego_pred.xs.len() - 1) as f64 * PREDICT_STEP;
        let field = &cfg.field;
        let cost = |p_c: f64| -> Result<f64> {
            let path = generate_path(
                &ego.state,
                w,
                kappa,
                p_c,
                b,
                x_end - x0,
                planner.path_spacing,
            )?;
            Ok(path
                .waypoints
                .iter()
                .map(|wp| {
                    let tau = ego_pred.time_at(wp.x).unwrap_or(t_last);
                    let pos = (wp.x, wp.y);
                    let static_part = total_potential(pos, &scene, &[], field);
                    let moving: f64 = movers
                        .iter()
                        .map(|(pred, y, (s_lat, s_long))| {
                            let x = pred
                                .at(tau.min(t_last - PREDICT_STEP))
                                .map_or(pred.xs[pred.xs.len() - 1], |p| p.0);
                            obstacle_potential_with(pos, (x, *y), *s_lat, *s_long, field)
                        })
                        .sum();
                    (static_part + moving) * planner.path_spacing
                })
                .sum())
        };
        let Some(p_c) = select_cp_by(&interval, x0, step, cost)? else {
            return Ok(None);
        };
        let path = generate_path(
            &ego.state,
            w,
            kappa,
            p_c,
            b,
            x_end - x0,
            planner.path_spacing,
        )?;
        Ok(Some((path, v_star)))
    }

    /// Evaluates the ego's rules for this step and returns the decision in force.
    fn ego_decision(&mut self, t: f64) -> Result<MergeDecision> {
        if let Some(c) = &self.commit {
            if self.settle.settled_at().is_some() {
                return Ok(MergeDecision::lane_keep());
            }
            return Ok(c.decision.clone());
        }
        let idx = self.target_lane_obstacles();
        let traffic = self.traffic(&idx);
        let ego = self.ego().clone();
        let input = DecisionInput {
            ego_id: &ego.id,
            ego: &ego.state,
            ego_rss: &ego.rss,
            ego_v_min: self.cfg.planner.min_merge_speed,
            ego_v_max: ego.params.v_max,
            obstacles: &traffic,
            params: &self.cfg.merge,
            lane: &self.cfg.lane,
            elapsed: t,
        };
        let (decision, next) = decide(&input, &self.coop)?;
        self.coop = next;
        if let Some(msg) = &decision.outgoing {
            self.send(t, V2vPayload::Request(msg.clone()));
        }
        if decision.v_ego_star.is_some() {
            self.pending_speed = decision.v_ego_star;
        }
        match decision.mode {
            MergeMode::MergeNonCoop | MergeMode::MergeCoop => {
                match self.plan_merge(&decision, t)? {
                    Some((path, v_star)) => {
                        self.paths.push(PathDump {
                            t,
                            mode: decision.mode.to_string(),
                            gap: decision.target_gap,
                            path: path.clone(),
                        });
                        self.coop.clear_blocked();
                        self.commit = Some(Commit {
                            decision: decision.clone(),
                            v_star,
                            path,
                        });
                        Ok(decision)
                    }
                    None => {
                        self.coop.mark_blocked(t);
                        // An agreed gap that can no longer be entered is given up.
                        if let Negotiation::Accepted { message, .. } = &self.coop.negotiation {
                            self.coop.negotiation = Negotiation::Failed {
                                receiver_id: message.receiver_id.clone(),
                                at: t,
                            };
                        }
                        if self.coop.halted || halt_required(&input, self.coop.blocked_since) {
                            self.coop.halted = true;
                            Ok(MergeDecision::halt())
                        } else {
                            Ok(MergeDecision::abort())
                        }
                    }
                }
            }
            MergeMode::LaneKeep | MergeMode::Halt => {
                self.pending_speed = None;
                Ok(decision)
            }
            _ => Ok(decision),
        }
    }

    /// Nearest live vehicle ahead of `i` sharing its lane. The ego counts for
    /// a lane whenever its footprint overlaps it.
    fn leader_of(&self, i: usize) -> Option<usize> {
        let me = &self.vehicles[i];
        let lane = &self.cfg.lane;
        let shares = |j: usize| {
            let o = &self.vehicles[j];
            if i == self.ego {
                o.lane == lane.target_lane && lane.occupies_lane(&me.state, lane.target_lane)
                    || o.lane == me.lane
            } else if j == self.ego {
                lane.occupies_lane(&o.state, me.lane)
            } else {
                o.lane == me.lane
            }
        };
        (0..self.vehicles.len())
            .filter(|&j| {
                j != i
                    && !self.vehicles[j].removed
                    && self.vehicles[j].state.x > me.state.x
                    && shares(j)
            })
            .min_by(|&a, &b| {
                self.vehicles[a]
                    .state
                    .x
                    .total_cmp(&self.vehicles[b].state.x)
            })
    }

    /// Applies following-distance limits to a speed command.
    fn follow(&self, i: usize, v_target: f64, limits: AccelLimits) -> Result<(f64, bool)> {
        let me = &self.vehicles[i];
        let mut accel = speed_controller(&me.state, v_target, &limits);
        let mut following = false;
        if let Some(j) = self.leader_of(i) {
            let l = &self.vehicles[j];
            let gap = bumper_gap(&me.state, &l.state);
            let acc_gap = gap - 2.0 * self.cfg.planner.safety_margin;
            let v_safe = max_safe_following_speed(
                acc_gap,
                l.state.speed_long,
                &me.rss,
                l.rss.a_brake_max,
                me.state.length,
                l.state.length,
            );
            if v_safe < v_target {
                accel = accel.min(speed_controller(&me.state, v_safe, &limits));
                following = true;
            }
            let d = longitudinal_safe_distance(
                me.state.speed_long,
                l.state.speed_long,
                &me.rss,
                l.rss.a_brake_max,
                me.state.length,
                l.state.length,
            )?;
            if gap < d && me.state.speed_long > 0.0 {
                accel = accel.min(-me.rss.a_brake_min);
                following = true;
            }
        }
        Ok((AccelLimits::nominal(&me.rss).clamp(accel), following))
    }

    /// Deceleration that stops the ego `halt_margin` short of the lane end.
    fn halt_brake(&self) -> f64 {
        let ego = self.ego();
        let v = ego.state.speed_long;
        if v <= 0.0 {
            return 0.0;
        }
        let remaining = self.cfg.lane.side_lane_end_x - self.cfg.merge.halt_margin - ego.state.x;
        let decel = (v * v / (2.0 * remaining.max(0.1))).max(ego.rss.a_brake_min);
        -decel.min(ego.rss.a_brake_max)
    }

    fn ego_controls(&self, decision: &MergeDecision) -> Result<(f64, f64)> {
        let ego = self.ego();
        let lane = &self.cfg.lane;
        let look = lookahead_distance(ego.state.speed_long);
        let settled = self.settle.settled_at().is_some();
        let steer = match (&self.commit, settled) {
            (Some(c), false) => track_path(&ego.state, &c.path.waypoints, look, &ego.params)?,
            (Some(_), true) => track_lane(&ego.state, lane.target_center(), look, &ego.params),
            (None, _) => track_lane(&ego.state, lane.side_center(), look, &ego.params),
        };
        if decision.mode == MergeMode::Halt {
            return Ok((steer, self.halt_brake()));
        }
        let v_target = match (&self.commit, settled) {
            (Some(c), false) => c.v_star,
            (Some(_), true) => ego.cruise,
            (None, _) => match decision.mode {
                MergeMode::LaneKeep => ego.cruise,
                _ => self.pending_speed.unwrap_or(ego.cruise),
            },
        };
        let (accel, _) = self.follow(self.ego, v_target, ego.comfort())?;
        Ok((steer, accel))
    }

    fn obstacle_controls(&self, i: usize, t: f64) -> Result<(f64, f64, &'static str)> {
        let v = &self.vehicles[i];
        let center = self.cfg.lane.lane_centers[v.lane];
        let steer = track_lane(
            &v.state,
            center,
            lookahead_distance(v.state.speed_long),
            &v.params,
        );
        let (accel, label) = match v.active_coop(t) {
            Some(c) => {
                let limits = AccelLimits::new(
                    c.limits.max_accel.min(v.rss.a_accel_max),
                    c.limits.max_decel,
                );
                let (a, _) = self.follow(i, c.v_target, limits)?;
                (limits.clamp(a), "Cooperate")
            }
            None => {
                let (a, following) = self.follow(i, v.cruise, v.comfort())?;
                (a, if following { "Follow" } else { "Cruise" })
            }
        };
        Ok((steer, accel, label))
    }

    fn leader_sample(&self) -> Result<Option<LeaderSample>> {
        let ego = self.ego();
        let lane = &self.cfg.lane;
        if !lane.occupies_lane(&ego.state, lane.target_lane) {
            return Ok(None);
        }
        let leader = self
            .target_lane_obstacles()
            .into_iter()
            .find(|&i| self.vehicles[i].state.x > ego.state.x);
        let Some(i) = leader else { return Ok(None) };
        let l = &self.vehicles[i];
        let d_rss = longitudinal_safe_distance(
            ego.state.speed_long,
            l.state.speed_long,
            &ego.rss,
            l.rss.a_brake_max,
            ego.state.length,
            l.state.length,
        )?;
        Ok(Some(LeaderSample {
            id: l.id.clone(),
            gap: bumper_gap(&ego.state, &l.state),
            d_rss,
        }))
    }

    fn run(mut self) -> Result<Trace> {
        let cfg = self.cfg;
        let steps = cfg.steps();
        let mut records = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            let t = k as f64 * cfg.dt;
            self.fire_events(t);
            self.process_channel(t)?;
            let decision = self.ego_decision(t)?;

            let mut controls = vec![(0.0, 0.0); self.vehicles.len()];
            let mut labels = vec![String::new(); self.vehicles.len()];
            for i in 0..self.vehicles.len() {
                if self.vehicles[i].removed {
                    continue;
                }
                if i == self.ego {
                    controls[i] = self.ego_controls(&decision)?;
                    labels[i] = decision.mode.to_string();
                } else {
                    let (s, a, l) = self.obstacle_controls(i, t)?;
                    controls[i] = (s, a);
                    labels[i] = l.to_string();
                }
            }

            let vehicles = self
                .vehicles
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.removed)
                .map(|(i, v)| VehicleRecord {
                    id: v.id.clone(),
                    x: v.state.x,
                    y: v.state.y,
                    psi: v.state.heading,
                    beta: v.state.sideslip,
                    r: v.state.yaw_rate,
                    v: v.state.speed_long,
                    accel: controls[i].1,
                    steer: controls[i].0,
                    mode: labels[i].clone(),
                })
                .collect();
            records.push(StepRecord {
                t,
                vehicles,
                decision: Some(decision),
                leader: self.leader_sample()?,
            });

            if self.commit.is_some() {
                let ego = self.ego().state;
                if let Some(s) =
                    self.settle
                        .update(t, ego.y, ego.sideslip, cfg.lane.target_center())
                {
                    if t >= s + POST_SETTLE - 1e-9 {
                        break;
                    }
                }
            }
            if k == steps {
                break;
            }
            for i in 0..self.vehicles.len() {
                if self.vehicles[i].removed {
                    continue;
                }
                let v = &self.vehicles[i];
                let (steer, accel) = controls[i];
                let next = step_dynamics(&v.state, steer, accel, cfg.dt, &v.params, &v.rss)?;
                self.vehicles[i].state = next;
            }
        }

        Ok(Trace {
            meta: TraceMeta {
                scenario: cfg.name.clone(),
                ego_id: self.ego().id.clone(),
                dt: cfg.dt,
                t_m_dec: cfg.merge.t_m_dec,
                target_center: cfg.lane.target_center(),
                side_lane_end_x: cfg.lane.side_lane_end_x,
            },
            records,
            messages: self.messages,
            paths: self.paths,
        })
    }
}

/// Runs one scenario to completion.
pub fn run_scenario(config: &ScenarioConfig) -> Result<(Trace, Metrics)> {
    config.validate()?;
    let trace = Engine::new(config).run()?;
    let metrics = compute_metrics(&trace)?;
    Ok((trace, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prediction_matches_constant_speed() {
        let p = Prediction::simulate(10.0, 20.0, 5.0, AccelLimits::new(2.0, 4.0), 40.0, |_| 20.0);
        let (x, v) = p.at(2.5).unwrap();
        assert!((x - 60.0).abs() < 1e-9 && (v - 20.0).abs() < 1e-12);
        assert!((p.time_at(70.0).unwrap() - 3.0).abs() < 1e-9);
        assert!(p.time_at(1e4).is_none());
    }

    #[test]
    fn crossing_offsets_are_symmetric() {
        let cfg: ScenarioConfig = serde_json::from_value(serde_json::json!({
            "name": "x", "duration": 1.0, "dt": 0.02,
            "lane": {"y_left": 5.25, "y_right": -1.75, "lane_centers": [0.0, 3.5], "side_lane_end_x": 300.0},
            "vehicles": [{"id": "ego", "role": "ego", "initial": {"x": 0.0, "y": 0.0, "v": 20.0}}]
        }))
        .unwrap();
        let (a, b) = lane_crossing_offsets(&cfg, 1.8);
        assert!((a + b).abs() < 1e-12);
        assert!((a - (0.85f64 / 2.65).ln()).abs() < 1e-12);
    }
}
