//! Merge metrics derived from a trace.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::trace::Trace;

/// Lateral tolerance around the target lane center for settlement (m).
pub const SETTLE_LATERAL: f64 = 0.2;
/// Sideslip bound for settlement (rad).
pub const SETTLE_SIDESLIP: f64 = 0.005;
/// Time both settlement conditions must hold continuously (s).
pub const SETTLE_HOLD: f64 = 0.5;
/// Deadband for counting sideslip sign changes (rad).
pub const SIGN_DEADBAND: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metrics {
    /// From the decision time to settlement (s).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merge_time: Option<f64>,
    /// Ego arc length over the merge interval (m).
    pub path_length: f64,
    pub max_abs_sideslip: f64,
    pub sideslip_sign_changes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_gap_ratio: Option<f64>,
    pub rss_violations: usize,
    pub completed: bool,
}

/// Tracks the continuous-hold condition of merge settlement.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SettleDetector {
    window_start: Option<f64>,
    settled_at: Option<f64>,
}

impl SettleDetector {
    /// Feeds one sample; returns the settlement time once the hold completes.
    pub fn update(&mut self, t: f64, y: f64, sideslip: f64, target_y: f64) -> Option<f64> {
        if self.settled_at.is_some() {
            return self.settled_at;
        }
        if (y - target_y).abs() <= SETTLE_LATERAL && sideslip.abs() < SETTLE_SIDESLIP {
            let start = *self.window_start.get_or_insert(t);
            if t - start >= SETTLE_HOLD - 1e-9 {
                self.settled_at = Some(start);
            }
        } else {
            self.window_start = None;
        }
        self.settled_at
    }

    pub fn settled_at(&self) -> Option<f64> {
        self.settled_at
    }
}

/// Counts sign flips of `values`, ignoring excursions inside `±deadband`.
pub fn count_sign_changes(values: impl IntoIterator<Item = f64>, deadband: f64) -> usize {
    let mut sign = 0i8;
    let mut changes = 0;
    for v in values {
        let s = if v > deadband {
            1
        } else if v < -deadband {
            -1
        } else {
            continue;
        };
        if sign != 0 && s != sign {
            changes += 1;
        }
        sign = s;
    }
    changes
}

pub fn compute_metrics(trace: &Trace) -> Result<Metrics> {
    let ego: Vec<_> = trace.ego_series().collect();
    if ego.is_empty() {
        return Err(Error::Precondition("trace has no ego samples".into()));
    }
    let start = ego
        .iter()
        .position(|(_, r)| r.mode != "LaneKeep")
        .unwrap_or(0);

    let mut detector = SettleDetector::default();
    let mut settled = None;
    for (t, r) in &ego[start..] {
        if let Some(s) = detector.update(*t, r.y, r.beta, trace.meta.target_center) {
            settled = Some(s);
            break;
        }
    }
    let end = match settled {
        Some(s) => ego
            .iter()
            .position(|(t, _)| *t >= s - 1e-9)
            .unwrap_or(ego.len() - 1),
        None => ego.len() - 1,
    };
    let end = end.max(start);

    let path_length = ego[start..=end]
        .windows(2)
        .map(|w| (w[1].1.x - w[0].1.x).hypot(w[1].1.y - w[0].1.y))
        .sum();
    let max_abs_sideslip = ego.iter().map(|(_, r)| r.beta.abs()).fold(0.0, f64::max);
    let sideslip_sign_changes =
        count_sign_changes(ego[start..=end].iter().map(|(_, r)| r.beta), SIGN_DEADBAND);

    let t_start = ego[start].0;
    let mut min_ratio: Option<f64> = None;
    let mut rss_violations = 0;
    for rec in trace.records.iter().filter(|r| r.t >= t_start - 1e-9) {
        let Some(l) = &rec.leader else { continue };
        if l.gap < l.d_rss {
            rss_violations += 1;
        }
        if l.d_rss > 0.0 {
            let ratio = (l.gap / l.d_rss).max(0.0);
            min_ratio = Some(min_ratio.map_or(ratio, |m| m.min(ratio)));
        }
    }

    Ok(Metrics {
        merge_time: settled.map(|s| s - trace.meta.t_m_dec),
        path_length,
        max_abs_sideslip,
        sideslip_sign_changes,
        min_gap_ratio: min_ratio,
        rss_violations,
        completed: settled.is_some(),
    })
}
