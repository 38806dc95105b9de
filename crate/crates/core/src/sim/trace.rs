//! Time-indexed simulation output and its file formats.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::merge_rules::MergeDecision;
use crate::sigmoid_planner::SigmoidPath;
use crate::sim::channel::V2vPayload;

pub const TRACE_HEADER: &str = "t,veh_id,x,y,psi,beta,r,v,accel,steer,mode";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub beta: f64,
    pub r: f64,
    pub v: f64,
    pub accel: f64,
    pub steer: f64,
    /// Planner mode for the ego, behavior label for obstacles.
    pub mode: String,
}

/// Gap from the ego to the nearest target-lane vehicle ahead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderSample {
    pub id: String,
    /// Bumper-to-bumper gap (m).
    pub gap: f64,
    /// Longitudinal safe distance owed to it (m).
    pub d_rss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub vehicles: Vec<VehicleRecord>,
    /// Decision in force for the ego this step.
    pub decision: Option<MergeDecision>,
    /// Present while the ego occupies the target lane behind another vehicle.
    pub leader: Option<LeaderSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageEventKind {
    Sent,
    Delivered,
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageEvent {
    pub t: f64,
    pub event: MessageEventKind,
    pub sent_at: f64,
    #[serde(flatten)]
    pub payload: V2vPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDump {
    pub t: f64,
    pub mode: String,
    pub gap: Option<usize>,
    pub path: SigmoidPath,
}

/// Facts about the run that metrics need besides the per-step records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub scenario: String,
    pub ego_id: String,
    pub dt: f64,
    pub t_m_dec: f64,
    pub target_center: f64,
    pub side_lane_end_x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub meta: TraceMeta,
    pub records: Vec<StepRecord>,
    pub messages: Vec<MessageEvent>,
    pub paths: Vec<PathDump>,
}

impl Trace {
    /// Rows of one vehicle, with their timestamps.
    pub fn series<'a>(
        &'a self,
        id: &'a str,
    ) -> impl Iterator<Item = (f64, &'a VehicleRecord)> + 'a {
        self.records
            .iter()
            .filter_map(move |r| r.vehicles.iter().find(|v| v.id == id).map(|v| (r.t, v)))
    }

    pub fn ego_series(&self) -> impl Iterator<Item = (f64, &VehicleRecord)> + '_ {
        self.series(&self.meta.ego_id)
    }

    /// Vehicle ids in order of first appearance.
    pub fn vehicle_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = Vec::new();
        for r in &self.records {
            for v in &r.vehicles {
                if !ids.contains(&v.id) {
                    ids.push(v.id.clone());
                }
            }
        }
        ids
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for r in &self.records {
            for v in &r.vehicles {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    r.t, v.id, v.x, v.y, v.psi, v.beta, v.r, v.v, v.accel, v.steer, v.mode
                )?;
            }
        }
        Ok(())
    }

    pub fn write_messages<W: Write>(&self, mut out: W) -> Result<()> {
        for m in &self.messages {
            serde_json::to_writer(&mut out, m)?;
            writeln!(out)?;
        }
        Ok(())
    }

    /// Writes `path_NNN.csv` per generated path into `dir`.
    pub fn write_paths(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (i, p) in self.paths.iter().enumerate() {
            let file = fs::File::create(dir.join(format!("path_{i:03}.csv")))?;
            p.path.write_csv(std::io::BufWriter::new(file))?;
        }
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("trace is utf-8")
    }
}
