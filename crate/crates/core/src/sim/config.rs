//! Scenario configuration: JSON schema, validation and dotted-key overrides.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{LaneGeometry, MergeParams, RssParams};
use crate::error::{Error, FieldIssue, Result};
use crate::merge_rules::ObstaclePolicy;
use crate::potential_field::FieldParams;
use crate::vehicle_model::{VehicleParams, MAX_DT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Ego,
    Obstacle,
}

fn default_policy() -> ObstaclePolicy {
    ObstaclePolicy::Cooperative
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub x: f64,
    pub y: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    pub id: String,
    pub role: Role,
    #[serde(default = "default_policy")]
    pub policy: ObstaclePolicy,
    pub initial: InitialState,
    #[serde(default)]
    pub params: VehicleParams,
    #[serde(default)]
    pub rss: RssParams,
    /// Cruise speed; defaults to the initial speed.
    #[serde(default)]
    pub desired_speed: Option<f64>,
}

impl VehicleConfig {
    pub fn cruise_speed(&self) -> f64 {
        self.desired_speed.unwrap_or(self.initial.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerParams {
    /// Peak lateral acceleration allowed on the merge curve (m/s²).
    pub a_lat_comfort: f64,
    /// Midpoint search step (m).
    pub cp_grid_step: f64,
    /// Longitudinal spacing of path waypoints (m).
    pub path_spacing: f64,
    /// Extra clearance on top of every safe distance when timing the crossing (m).
    pub safety_margin: f64,
    /// Latest crossing considered when searching the midpoint (s ahead).
    pub crossing_horizon: f64,
    /// Lowest speed a merge is commanded at (m/s).
    pub min_merge_speed: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            a_lat_comfort: 2.0,
            cp_grid_step: 0.5,
            path_spacing: 1.0,
            safety_margin: 1.0,
            crossing_horizon: 8.0,
            min_merge_speed: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    /// One-way V2V latency (s).
    pub delay: f64,
    pub drop_probability: f64,
    pub seed: u64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            delay: 0.1,
            drop_probability: 0.0,
            seed: 0,
        }
    }
}

/// Removes every main-lane obstacle inside `[x_min, x_max]` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapEvent {
    pub t: f64,
    pub x_min: f64,
    pub x_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub duration: f64,
    pub dt: f64,
    pub lane: LaneGeometry,
    #[serde(default)]
    pub merge: MergeParams,
    #[serde(default)]
    pub field: FieldParams,
    #[serde(default)]
    pub planner: PlannerParams,
    #[serde(default)]
    pub channel: ChannelParams,
    pub vehicles: Vec<VehicleConfig>,
    #[serde(default)]
    pub events: Vec<GapEvent>,
}

fn collect(issues: &mut Vec<FieldIssue>, prefix: &str, r: Result<()>) {
    if let Err(e) = r {
        let issue = match e {
            Error::InvalidParameter { name, reason } => {
                FieldIssue::new(format!("{prefix}.{name}"), reason)
            }
            other => FieldIssue::new(prefix, other.to_string()),
        };
        issues.push(issue);
    }
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_value(serde_json::from_str(text)?)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let config: ScenarioConfig = serde_json::from_value(value)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads, overrides and validates a config file.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut value: Value = serde_json::from_str(&text)?;
        apply_overrides(&mut value, overrides)?;
        Self::from_value(value)
    }

    /// Number of simulation steps after `t = 0`.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn ego_index(&self) -> usize {
        self.vehicles
            .iter()
            .position(|v| v.role == Role::Ego)
            .expect("validated config has an ego")
    }

    /// Checks every field and reports all offending ones together.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        if self.name.trim().is_empty() {
            issues.push(FieldIssue::new("name", "must not be empty"));
        }
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            issues.push(FieldIssue::new(
                "dt",
                format!("must lie in (0, {MAX_DT}], got {}", self.dt),
            ));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            issues.push(FieldIssue::new("duration", "must be finite and > 0"));
        } else if self.dt > 0.0 {
            let ratio = self.duration / self.dt;
            if (ratio - ratio.round()).abs() > 1e-6 {
                issues.push(FieldIssue::new(
                    "duration",
                    "must be an integral number of steps of dt",
                ));
            }
        }
        collect(&mut issues, "lane", self.lane.validate());
        collect(&mut issues, "merge", self.merge.validate());
        collect(&mut issues, "field", self.field.validate());

        let p = &self.planner;
        for (name, v) in [
            ("a_lat_comfort", p.a_lat_comfort),
            ("cp_grid_step", p.cp_grid_step),
            ("path_spacing", p.path_spacing),
            ("crossing_horizon", p.crossing_horizon),
            ("min_merge_speed", p.min_merge_speed),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                issues.push(FieldIssue::new(
                    format!("planner.{name}"),
                    "must be finite and > 0",
                ));
            }
        }
        if !(p.safety_margin >= 0.0) {
            issues.push(FieldIssue::new("planner.safety_margin", "must be >= 0"));
        }

        let c = &self.channel;
        if !(c.delay >= 0.0) || !c.delay.is_finite() {
            issues.push(FieldIssue::new("channel.delay", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&c.drop_probability) {
            issues.push(FieldIssue::new(
                "channel.drop_probability",
                "must lie in [0, 1]",
            ));
        }

        let egos = self.vehicles.iter().filter(|v| v.role == Role::Ego).count();
        if egos != 1 {
            issues.push(FieldIssue::new(
                "vehicles",
                format!("exactly one ego required, found {egos}"),
            ));
        }
        let mut seen = HashSet::new();
        for (i, v) in self.vehicles.iter().enumerate() {
            let prefix = format!("vehicles[{i}]");
            if !seen.insert(v.id.as_str()) {
                issues.push(FieldIssue::new(
                    format!("{prefix}.id"),
                    format!("duplicate id `{}`", v.id),
                ));
            }
            collect(
                &mut issues,
                &format!("{prefix}.params"),
                v.params.validate(),
            );
            collect(&mut issues, &format!("{prefix}.rss"), v.rss.validate());
            let init = &v.initial;
            if !init.x.is_finite() || !init.y.is_finite() {
                issues.push(FieldIssue::new(
                    format!("{prefix}.initial"),
                    "position must be finite",
                ));
            }
            if !(init.v >= 0.0 && init.v <= v.params.v_max) {
                issues.push(FieldIssue::new(
                    format!("{prefix}.initial.v"),
                    "must lie in [0, v_max]",
                ));
            }
            if let Some(s) = v.desired_speed {
                if !(s >= 0.0 && s <= v.params.v_max) {
                    issues.push(FieldIssue::new(
                        format!("{prefix}.desired_speed"),
                        "must lie in [0, v_max]",
                    ));
                }
            }
        }
        for (i, e) in self.events.iter().enumerate() {
            if !(e.t >= 0.0) || !(e.x_min <= e.x_max) {
                issues.push(FieldIssue::new(
                    format!("events[{i}]"),
                    "needs t >= 0 and x_min <= x_max",
                ));
            }
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(issues))
        }
    }
}

fn parse_override_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Sets `key` (dot separated, numeric segments index arrays) to `raw`.
///
/// `raw` is parsed as JSON when possible and kept as a string otherwise.
/// Missing object keys are created; unknown ones are rejected later by the
/// schema.
pub fn set_dotted(root: &mut Value, key: &str, raw: &str) -> Result<()> {
    let bad = |msg: &str| Error::Config(vec![FieldIssue::new(key, msg)]);
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(bad("malformed key"));
    }
    let mut node = root;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), parse_override_value(raw));
                    return Ok(());
                }
                map.entry(part.to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| bad("array segment must be an index"))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| bad(&format!("index {idx} out of range (len {len})")))?;
                if last {
                    *slot = parse_override_value(raw);
                    return Ok(());
                }
                slot
            }
            _ => return Err(bad("path runs through a scalar")),
        };
    }
    Ok(())
}

pub fn apply_overrides(root: &mut Value, overrides: &[(String, String)]) -> Result<()> {
    for (k, v) in overrides {
        set_dotted(root, k, v)?;
    }
    Ok(())
}

/// Splits `key=value`.
pub fn parse_assignment(text: &str) -> Result<(String, String)> {
    match text.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Error::Config(vec![FieldIssue::new(
            text,
            "expected key=value",
        )])),
    }
}
