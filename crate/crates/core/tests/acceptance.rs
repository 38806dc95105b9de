//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the report is printed even when output capture
//! is on; exits non-zero if any criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use lanemerge::domain::{LaneGeometry, RssParams, VehicleState};
use lanemerge::merge_rules::{
    coop_max_obstacle_speed_ego_ahead, coop_min_obstacle_speed_ego_behind,
    noncoop_max_speed_behind, noncoop_min_speed_ahead,
};
use lanemerge::potential_field::{
    lane_center_potential, obstacle_potential, road_marking_potential, FieldMode, FieldParams,
    Scene,
};
use lanemerge::rss::{lateral_safe_distance, longitudinal_safe_distance};
use lanemerge::sigmoid_planner::{
    cp_feasible_interval, select_cp, sigmoid_value, CandidateShape, CpDistances,
};
use lanemerge::sim::trace::MessageEventKind;
use lanemerge::sim::{compare_scenarios, run_scenario, Metrics, ScenarioConfig, Trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn scenario(name: &str) -> ScenarioConfig {
    let path: PathBuf = [
        env!("CARGO_MANIFEST_DIR"),
        "..",
        "..",
        "scenarios",
        &format!("{name}.json"),
    ]
    .iter()
    .collect();
    ScenarioConfig::load(&path, &[]).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn run(name: &str) -> Result<(ScenarioConfig, Trace, Metrics), String> {
    let cfg = scenario(name);
    let (t, m) = run_scenario(&cfg).map_err(|e| format!("{name}: {e}"))?;
    Ok((cfg, t, m))
}

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------------------
// Direct transcriptions used as oracles.

fn oracle_long(
    ve: f64,
    vf: f64,
    t: f64,
    acc: f64,
    bmin: f64,
    bmax_f: f64,
    le: f64,
    lf: f64,
) -> f64 {
    let raw = ve * t + acc * t * t / 2.0 + (le + lf) / 2.0 + (ve + acc * t).powi(2) / (2.0 * bmin)
        - vf.powi(2) / (2.0 * bmax_f);
    if raw > 0.0 {
        raw
    } else {
        0.0
    }
}

#[allow(clippy::too_many_arguments)]
fn oracle_lat(
    ve: f64,
    vo: f64,
    t: f64,
    ae: f64,
    ao: f64,
    be: f64,
    bo: f64,
    we: f64,
    wo: f64,
    mu: f64,
) -> f64 {
    let ve_r = ve + ae * t;
    let vo_r = vo - ao * t;
    let raw = (ve + ve_r) / 2.0 * t + ve_r.powi(2) / (2.0 * be) + (we + wo) / 2.0
        - ((vo + vo_r) / 2.0 * t + vo_r.powi(2) / (2.0 * bo));
    mu + if raw > 0.0 { raw } else { 0.0 }
}

fn oracle_road(y: f64, yb: f64, w: f64, beta: f64, eps: f64) -> f64 {
    let mut denom = (y - yb).abs() - w / 2.0;
    if denom < eps {
        denom = eps;
    }
    beta / 2.0 / (denom * denom)
}

fn oracle_obstacle(x: f64, y: f64, xo: f64, yo: f64, gamma: f64, s1: f64, s2: f64, u: f64) -> f64 {
    gamma * ((-(s1 * (y - yo).powi(2) + s2 * (x - xo).powi(2))).exp() - u).abs()
}

fn oracle_lane_center(d: f64, merging: bool, xi: f64, dstar: f64) -> f64 {
    if merging {
        dstar * xi * d - xi * dstar * dstar / 2.0
    } else {
        xi * d * d / 2.0
    }
}

fn oracle_sigmoid(x: f64, w: f64, k: f64, pc: f64, b: f64) -> f64 {
    w / (1.0 + f64::exp(-k * (x - pc))) + b
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let n = 1000;
    let mut worst = 0.0f64;
    let mut note = |a: f64, b: f64, what: &str| -> Result<(), String> {
        let err = if a == b {
            0.0
        } else {
            (a - b).abs() / a.abs().max(b.abs())
        };
        worst = worst.max(err);
        check(err <= 1e-9, format!("{what}: {a} vs {b}"))
    };
    for _ in 0..n {
        let rss = RssParams {
            t_lag: rng.gen_range(0.0..1.5),
            a_accel_max: rng.gen_range(0.1..5.0),
            a_brake_min: rng.gen_range(1.0..8.0),
            a_brake_max: rng.gen_range(4.0..12.0),
            a_accel_lat_max: rng.gen_range(0.0..2.0),
            a_brake_lat_min: rng.gen_range(0.3..3.0),
            mu: rng.gen_range(0.0..1.0),
        };
        let other = RssParams {
            a_accel_lat_max: rng.gen_range(0.0..2.0),
            a_brake_lat_min: rng.gen_range(0.3..3.0),
            ..rss
        };
        let (ve, vf) = (rng.gen_range(0.0..40.0), rng.gen_range(0.0..40.0));
        let bmax_f = rng.gen_range(4.0..12.0);
        let (le, lf) = (rng.gen_range(3.0..12.0), rng.gen_range(3.0..12.0));
        let got =
            longitudinal_safe_distance(ve, vf, &rss, bmax_f, le, lf).map_err(|e| e.to_string())?;
        note(
            got,
            oracle_long(
                ve,
                vf,
                rss.t_lag,
                rss.a_accel_max,
                rss.a_brake_min,
                bmax_f,
                le,
                lf,
            ),
            "longitudinal distance",
        )?;

        let (vle, vlo) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let (we, wo) = (rng.gen_range(1.5..2.6), rng.gen_range(1.5..2.6));
        let got =
            lateral_safe_distance(vle, vlo, &rss, &other, we, wo).map_err(|e| e.to_string())?;
        let want = oracle_lat(
            vle,
            vlo,
            rss.t_lag,
            rss.a_accel_lat_max,
            other.a_accel_lat_max,
            rss.a_brake_lat_min,
            other.a_brake_lat_min,
            we,
            wo,
            rss.mu,
        );
        note(got, want, "lateral distance")?;

        let fp = FieldParams {
            beta: rng.gen_range(0.01..5.0),
            gamma: rng.gen_range(0.1..20.0),
            sigma_lat: rng.gen_range(0.001..1.0),
            sigma_long: rng.gen_range(0.0001..0.1),
            u_floor: rng.gen_range(0.001..0.999),
            xi: rng.gen_range(0.001..1.0),
            d_star: rng.gen_range(1.0..30.0),
            eps_denominator: rng.gen_range(0.01..0.2),
        };
        let (y, yb, w) = (
            rng.gen_range(-3.0..8.0),
            rng.gen_range(-3.0..8.0),
            rng.gen_range(1.5..2.6),
        );
        note(
            road_marking_potential(y, yb, w, &fp),
            oracle_road(y, yb, w, fp.beta, fp.eps_denominator),
            "road potential",
        )?;

        let pos = (rng.gen_range(-100.0..100.0), rng.gen_range(-3.0..8.0));
        let obs = (rng.gen_range(-100.0..100.0), rng.gen_range(-3.0..8.0));
        note(
            obstacle_potential(pos, obs, &fp),
            oracle_obstacle(
                pos.0,
                pos.1,
                obs.0,
                obs.1,
                fp.gamma,
                fp.sigma_lat,
                fp.sigma_long,
                fp.u_floor,
            ),
            "obstacle potential",
        )?;

        for (mode, merging) in [
            (FieldMode::LaneKeeping, false),
            (FieldMode::LaneMerging, true),
        ] {
            let scene = Scene {
                lane: LaneGeometry::default(),
                obstacles: vec![],
                target_waypoint: obs,
                mode,
                ego_width: 1.8,
            };
            let d = ((pos.0 - obs.0).powi(2) + (pos.1 - obs.1).powi(2)).sqrt();
            note(
                lane_center_potential(pos, &scene, &fp),
                oracle_lane_center(d, merging, fp.xi, fp.d_star),
                "lane-center potential",
            )?;
        }

        let (w, k, pc, b) = (
            rng.gen_range(-7.0..7.0),
            rng.gen_range(0.05..1.0),
            rng.gen_range(-200.0..200.0),
            rng.gen_range(-5.0..5.0),
        );
        let x = rng.gen_range(-300.0..300.0);
        note(
            sigmoid_value(x, w, k, pc, b),
            oracle_sigmoid(x, w, k, pc, b),
            "sigmoid",
        )?;
    }
    let elapsed = start.elapsed();
    check(
        elapsed < Duration::from_secs(5),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "6 formulas x {n} draws, worst rel err {worst:.1e}, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------------------

const GRID: f64 = 0.01;
const SCAN_MAX: f64 = 60.0;

/// First and last grid speeds satisfying `holds`.
fn scan(holds: impl Fn(f64) -> bool) -> (Option<f64>, Option<f64>) {
    let n = (SCAN_MAX / GRID).round() as usize;
    let mut first = None;
    let mut last = None;
    for k in 0..=n {
        let v = k as f64 * GRID;
        if holds(v) {
            first.get_or_insert(v);
            last = Some(v);
        }
    }
    (first, last)
}

/// Brute-force boundary check for a lower-bound constraint `v >= bound`.
fn lower_boundary_matches(bound: f64, first: Option<f64>) -> bool {
    match first {
        Some(g) if bound <= 0.0 => g == 0.0,
        Some(g) => g >= bound - 1e-9 && g - bound <= GRID + 1e-9,
        None => bound > SCAN_MAX - GRID,
    }
}

/// Brute-force boundary check for an upper-bound constraint `v <= bound`.
fn upper_boundary_matches(bound: f64, last: Option<f64>) -> bool {
    match last {
        Some(g) if bound >= SCAN_MAX => (g - SCAN_MAX).abs() < 1e-9,
        Some(g) => g <= bound + 1e-9 && bound - g <= GRID + 1e-9,
        None => bound < GRID,
    }
}

fn equal_sides(lhs: f64, rhs: f64) -> bool {
    (lhs - rhs).abs() <= 1e-9 * lhs.abs().max(rhs.abs()).max(1.0)
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    // Fixed fixtures first.
    check(
        (noncoop_min_speed_ahead(60.0, 40.0, 20.0, 3.0, 4.0, 30.0) - 28.0).abs() < 1e-12,
        "ahead-min fixture",
    )?;
    check(
        (noncoop_max_speed_behind(0.0, 50.0, 20.0, 4.0, 30.0) - 25.0).abs() < 1e-12,
        "behind-max fixture",
    )?;
    check(
        (coop_max_obstacle_speed_ego_ahead(40.0, 22.0, 120.0, 25.0, 1.0, 4.0) - 17.6).abs() < 1e-12,
        "coop-ahead fixture",
    )?;
    check(
        (coop_min_obstacle_speed_ego_behind(0.0, 20.0, 30.0, 18.0, 4.0, 2.0, 45.0) - 29.0).abs()
            < 1e-12,
        "coop-behind fixture",
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let scenes = 500;
    for i in 0..scenes {
        let x = rng.gen_range(0.0..200.0);
        let xo = x + rng.gen_range(-80.0..80.0);
        let vo = rng.gen_range(0.0..35.0);
        let ve = rng.gen_range(0.0..35.0);
        let a = rng.gen_range(0.5..4.0);
        let rho_m = rng.gen_range(1.0..6.0);
        let rho_c = rng.gen_range(0.5..3.0);
        let d = rng.gen_range(0.0..60.0);
        let p_c = x + rng.gen_range(0.0..150.0);

        // Non-cooperative, ego ahead: X_o + v_o ρm/2 + a ρm²/8 <= X + v ρm/2 - D
        let lhs3 = xo + vo * rho_m / 2.0 + a * rho_m * rho_m / 8.0;
        let v3 = noncoop_min_speed_ahead(x, xo, vo, a, rho_m, d);
        check(
            equal_sides(lhs3, x + v3 * rho_m / 2.0 - d),
            format!("scene {i}: ahead-min back-substitution"),
        )?;
        let (first, _) = scan(|v| lhs3 <= x + v * rho_m / 2.0 - d);
        check(
            lower_boundary_matches(v3, first),
            format!("scene {i}: ahead-min boundary {v3} vs {first:?}"),
        )?;

        // Non-cooperative, ego behind: X + v ρm <= X_o + v_o ρm - D
        let v4 = noncoop_max_speed_behind(x, xo, vo, rho_m, d);
        check(
            equal_sides(x + v4 * rho_m, xo + vo * rho_m - d),
            format!("scene {i}: behind-max back-substitution"),
        )?;
        let (_, last) = scan(|v| x + v * rho_m <= xo + vo * rho_m - d);
        check(
            upper_boundary_matches(v4, last),
            format!("scene {i}: behind-max boundary {v4} vs {last:?}"),
        )?;

        // Cooperative, ego ahead: X_o + (v_o + v*)/2 ρc + v* ρm/2 <= P_c - D*
        let lhs5 = |vs: f64| xo + (vo + vs) / 2.0 * rho_c + vs * rho_m / 2.0;
        let v5 = coop_max_obstacle_speed_ego_ahead(xo, vo, p_c, d, rho_c, rho_m);
        check(
            equal_sides(lhs5(v5), p_c - d),
            format!("scene {i}: coop-ahead back-substitution"),
        )?;
        let (_, last) = scan(|vs| lhs5(vs) <= p_c - d);
        check(
            upper_boundary_matches(v5, last),
            format!("scene {i}: coop-ahead boundary {v5} vs {last:?}"),
        )?;

        // Cooperative, ego behind: X + v_e ρc - a ρc²/2 <= X_o + (v* + v_o)/2 ρc - D
        let lhs6 = x + ve * rho_c - a * rho_c * rho_c / 2.0;
        let v6 = coop_min_obstacle_speed_ego_behind(x, ve, xo, vo, a, rho_c, d);
        check(
            equal_sides(lhs6, xo + (v6 + vo) / 2.0 * rho_c - d),
            format!("scene {i}: coop-behind back-substitution"),
        )?;
        let (first, _) = scan(|vs| lhs6 <= xo + (vs + vo) / 2.0 * rho_c - d);
        check(
            lower_boundary_matches(v6, first),
            format!("scene {i}: coop-behind boundary {v6} vs {first:?}"),
        )?;
    }
    let elapsed = start.elapsed();
    check(
        elapsed < Duration::from_secs(30),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "{scenes} scenes x 4 solvers, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------------------

fn car(x: f64, y: f64) -> VehicleState {
    VehicleState::cruising(x, y, 20.0, 4.6, 1.8)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let params = FieldParams::default();
    let layouts = 200;
    let (mut feasible, mut infeasible, mut selected) = (0, 0, 0);

    // Documented untenable case.
    let d = CpDistances {
        d_rss_lead: 0.0,
        d_rss_star: 50.0,
        d_rss_next: 30.0,
    };
    let i = cp_feasible_interval(&car(0.0, 0.0), &[car(100.0, 3.5), car(160.0, 3.5)], 1, &d)
        .map_err(|e| e.to_string())?;
    check(
        !i.feasible,
        "documented infeasible case classified feasible",
    )?;

    for k in 0..layouts {
        let ego = car(rng.gen_range(-50.0..100.0), 0.0);
        let single = k % 4 == 0;
        let x1 = rng.gen_range(0.0..200.0);
        let x2 = x1 + rng.gen_range(0.0..150.0);
        let d = CpDistances {
            d_rss_lead: rng.gen_range(0.0..80.0),
            d_rss_star: rng.gen_range(0.0..80.0),
            d_rss_next: rng.gen_range(0.0..80.0),
        };
        let (obstacles, gap, expect, lower, upper) = if single {
            let up = x1 - d.d_rss_lead;
            (vec![car(x1, 3.5)], 0, ego.x <= up, None, up)
        } else {
            let lo = x1 + d.d_rss_star;
            let up = x2 - d.d_rss_next;
            (vec![car(x1, 3.5), car(x2, 3.5)], 1, lo <= up, Some(lo), up)
        };
        let interval =
            cp_feasible_interval(&ego, &obstacles, gap, &d).map_err(|e| e.to_string())?;
        check(
            interval.feasible == expect,
            format!(
                "layout {k}: feasible {} expected {expect}",
                interval.feasible
            ),
        )?;
        check(
            interval.lower == lower && interval.upper == upper,
            format!("layout {k}: bounds"),
        )?;
        if !expect {
            infeasible += 1;
            continue;
        }
        feasible += 1;
        let scene = Scene {
            lane: LaneGeometry::default(),
            obstacles: obstacles.clone(),
            target_waypoint: (ego.x + 400.0, 3.5),
            mode: FieldMode::LaneMerging,
            ego_width: 1.8,
        };
        let shape = CandidateShape {
            w: 3.5,
            kappa: 0.12,
            b: 0.0,
            x_end: ego.x + 400.0,
            spacing: 1.0,
        };
        let p = select_cp(&interval, &ego, &scene, &[], &params, &shape, 2.0)
            .map_err(|e| e.to_string())?;
        match p {
            Some(p) => {
                selected += 1;
                check(
                    interval.contains(p),
                    format!("layout {k}: P_c {p} outside interval"),
                )?;
            }
            None => check(
                interval.upper < ego.x,
                format!("layout {k}: no P_c although interval reaches past ego"),
            )?,
        }
    }
    check(
        feasible > 20 && infeasible > 20,
        format!("unbalanced sample: {feasible}/{infeasible}"),
    )?;
    Ok(format!("{layouts} layouts ({feasible} feasible, {infeasible} infeasible), {selected} P_c selections inside"))
}

// ---------------------------------------------------------------------------

const DEMOS: [&str; 4] = [
    "situation1_ahead_noncoop",
    "situation2_behind_noncoop",
    "situation3_ahead_coop",
    "situation4_behind_coop",
];

fn criterion_4() -> Outcome {
    let mut parts = Vec::new();
    for name in DEMOS {
        let (_, _, m) = run(name)?;
        check(m.completed, format!("{name}: merge did not complete"))?;
        check(
            m.rss_violations == 0,
            format!("{name}: {} violations", m.rss_violations),
        )?;
        parts.push(format!(
            "{name}: min ratio {}",
            m.min_gap_ratio.map_or("n/a".into(), |r| format!("{r:.2}"))
        ));
    }
    Ok(parts.join("; "))
}

fn criterion_5() -> Outcome {
    let (_, _, non) = run("tight_gap_noncoop")?;
    let (cfg, trace, coop) = run("tight_gap_coop")?;
    let (t_non, t_coop) = match (non.merge_time, coop.merge_time) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err("a tight-gap run did not complete".into()),
    };
    check(
        t_coop <= t_non,
        format!("coop {t_coop:.2}s > non-coop {t_non:.2}s"),
    )?;

    let v0 = cfg.vehicles[cfg.ego_index()].initial.v;
    let dev = trace
        .ego_series()
        .map(|(_, r)| (r.v - v0).abs())
        .fold(0.0, f64::max);
    check(dev <= 0.5, format!("coop ego speed deviates {dev:.3} m/s"))?;

    let receiver = trace
        .messages
        .iter()
        .find_map(|m| match &m.payload {
            lanemerge::sim::channel::V2vPayload::Reply(r)
                if r.accepted && m.event == MessageEventKind::Sent =>
            {
                Some(r.sender_id.clone())
            }
            _ => None,
        })
        .ok_or("no accepted cooperation request")?;
    let p_c = trace.paths.first().ok_or("no merge path")?.path.p_c;
    let t_cross = trace
        .ego_series()
        .find(|(_, r)| r.x >= p_c)
        .map(|(t, _)| t)
        .ok_or("ego never crossed P_c")?;
    let series: Vec<_> = trace.series(&receiver).collect();
    let v_start = series[0].1.v;
    let v_cross = series
        .iter()
        .find(|(t, _)| *t >= t_cross)
        .map(|(_, r)| r.v)
        .ok_or("receiver missing")?;
    let braked_before = series.iter().any(|(t, r)| *t < t_cross && r.accel < -0.1);
    check(
        braked_before && v_cross < v_start - 0.5,
        format!("{receiver} did not slow before crossing at {t_cross:.2}s"),
    )?;
    Ok(format!(
        "merge_time coop {t_coop:.2}s vs non-coop {t_non:.2}s; ego |dv| <= {dev:.3}; {receiver} {v_start:.1}->{v_cross:.1} m/s by CP crossing at {t_cross:.2}s"
    ))
}

fn criterion_6() -> Outcome {
    let (_, _, non) = run("tight_gap_noncoop")?;
    let (_, _, coop) = run("tight_gap_coop")?;
    check(
        non.max_abs_sideslip <= 0.02,
        format!("non-coop |beta| {:.4}", non.max_abs_sideslip),
    )?;
    check(
        non.sideslip_sign_changes <= 2,
        format!("non-coop sign changes {}", non.sideslip_sign_changes),
    )?;
    check(
        coop.max_abs_sideslip <= 0.03,
        format!("coop |beta| {:.4}", coop.max_abs_sideslip),
    )?;
    Ok(format!(
        "non-coop max|beta| {:.4} rad, {} sign changes; coop max|beta| {:.4} rad",
        non.max_abs_sideslip, non.sideslip_sign_changes, coop.max_abs_sideslip
    ))
}

fn criterion_7() -> Outcome {
    let (cfg, trace, _) = run("tight_gap_silent")?;
    let sent = trace
        .messages
        .iter()
        .find(|m| m.event == MessageEventKind::Sent)
        .map(|m| m.t)
        .ok_or("no message sent")?;
    let ego = trace.meta.ego_id.clone();
    let mut saw_negotiation = false;
    let mut left = None;
    for r in &trace.records {
        let Some(v) = r.vehicles.iter().find(|v| v.id == ego) else {
            continue;
        };
        if v.mode == "NegotiateCoop" {
            saw_negotiation = true;
        } else if saw_negotiation {
            left = Some(r.t);
            break;
        }
    }
    let left = left.ok_or("never left NegotiateCoop")?;
    let lag = left - sent;
    check(
        (lag - cfg.merge.rho_c).abs() <= cfg.dt + 1e-9,
        format!("left after {lag:.3}s, rho_c {}", cfg.merge.rho_c),
    )?;
    Ok(format!(
        "sent at {sent:.2}s, fallback at {left:.2}s (rho_c {:.2}s, dt {})",
        cfg.merge.rho_c, cfg.dt
    ))
}

fn criterion_8() -> Outcome {
    let (cfg, trace, m) = run("halt_short_lane")?;
    let end = cfg.lane.side_lane_end_x;
    let gap_open = cfg
        .events
        .first()
        .map(|e| e.t)
        .ok_or("scenario has no gap event")?;
    let (t_stop, stop) = trace
        .ego_series()
        .find(|(_, r)| r.v <= 1e-9)
        .map(|(t, r)| (t, r.clone()))
        .ok_or("ego never stopped")?;
    let front = stop.x + cfg.vehicles[cfg.ego_index()].params.length / 2.0;
    check(
        front < end,
        format!("stopped with front at {front:.2} >= lane end {end}"),
    )?;
    check(t_stop < gap_open, format!("stopped only at {t_stop:.2}s"))?;
    let early = trace
        .ego_series()
        .any(|(t, r)| t < gap_open && r.mode.starts_with("Merge"));
    check(!early, "merged before the gap opened")?;
    let remerge = trace
        .ego_series()
        .find(|(t, r)| *t >= gap_open && r.mode == "MergeNonCoop")
        .map(|(t, _)| t)
        .ok_or("no re-merge after gap opened")?;
    check(m.completed, "re-merge did not settle")?;
    Ok(format!(
        "stopped at {t_stop:.2}s with front bumper {:.1} m before the lane end; re-merge at {remerge:.2}s",
        end - front
    ))
}

fn final_ego_at(trace: &Trace, t: f64) -> (f64, f64) {
    trace
        .ego_series()
        .filter(|(s, _)| *s <= t + 1e-9)
        .last()
        .map(|(_, r)| (r.x, r.y))
        .unwrap_or((f64::NAN, f64::NAN))
}

fn criterion_9() -> Outcome {
    let mut parts = Vec::new();
    for name in ["tight_gap_coop", "tight_gap_noncoop"] {
        let cfg = scenario(name);
        let (a, ma) = run_scenario(&cfg).map_err(|e| e.to_string())?;
        let (b, _) = run_scenario(&cfg).map_err(|e| e.to_string())?;
        check(
            a.csv_string() == b.csv_string(),
            format!("{name}: traces differ between runs"),
        )?;

        let fine = ScenarioConfig {
            dt: cfg.dt / 2.0,
            ..cfg.clone()
        };
        let (c, mc) = run_scenario(&fine).map_err(|e| e.to_string())?;
        let (t1, t2) = match (ma.merge_time, mc.merge_time) {
            (Some(x), Some(y)) => (x, y),
            _ => return Err(format!("{name}: merge incomplete")),
        };
        check(
            (t1 - t2).abs() < 0.05,
            format!("{name}: merge_time {t1} vs {t2}"),
        )?;
        let t_end = a
            .records
            .last()
            .map_or(0.0, |r| r.t)
            .min(c.records.last().map_or(0.0, |r| r.t));
        let (p, q) = (final_ego_at(&a, t_end), final_ego_at(&c, t_end));
        let dist = (p.0 - q.0).hypot(p.1 - q.1);
        check(
            dist < 0.05,
            format!("{name}: final position differs by {dist:.4} m"),
        )?;
        parts.push(format!(
            "{name}: identical CSV, dmerge {:.3}s, dpos {dist:.4}m",
            (t1 - t2).abs()
        ));
    }
    Ok(parts.join("; "))
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    for name in DEMOS {
        run(name)?;
    }
    let pair = [scenario("tight_gap_noncoop"), scenario("tight_gap_coop")];
    compare_scenarios(&pair).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(
        elapsed < Duration::from_secs(60),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "4 demos + compare in {:.2}s",
        elapsed.as_secs_f64()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("formula oracles", criterion_1),
        ("constraint-solver soundness", criterion_2),
        ("CP interval", criterion_3),
        ("safety invariant", criterion_4),
        ("cooperative advantage", criterion_5),
        ("oscillation elimination", criterion_6),
        ("fallback timing", criterion_7),
        ("halt rule", criterion_8),
        ("determinism and convergence", criterion_9),
        ("end-to-end runtime", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
