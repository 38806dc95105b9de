//! Side-by-side runs of several scenarios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::config::ScenarioConfig;
use crate::sim::engine::run_scenario;
use crate::sim::metrics::Metrics;
use crate::sim::trace::Trace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub metrics: Metrics,
}

/// Relative change of run `b` against run `a`, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDelta {
    pub a: String,
    pub b: String,
    pub merge_time_pct: Option<f64>,
    pub path_length_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub deltas: Vec<PairDelta>,
}

fn pct(a: f64, b: f64) -> Option<f64> {
    (a.abs() > f64::EPSILON).then(|| (b - a) / a * 100.0)
}

/// Deltas are defined only when both runs completed their merge.
pub fn pair_delta(a: &ComparisonRow, b: &ComparisonRow) -> PairDelta {
    let both = a.metrics.completed && b.metrics.completed;
    let merge_time_pct = match (a.metrics.merge_time, b.metrics.merge_time) {
        (Some(x), Some(y)) if both => pct(x, y),
        _ => None,
    };
    PairDelta {
        a: a.name.clone(),
        b: b.name.clone(),
        merge_time_pct,
        path_length_pct: if both {
            pct(a.metrics.path_length, b.metrics.path_length)
        } else {
            None
        },
    }
}

/// Runs each configuration in order and tabulates the metrics.
pub fn compare_scenarios(configs: &[ScenarioConfig]) -> Result<(Comparison, Vec<Trace>)> {
    let mut rows = Vec::with_capacity(configs.len());
    let mut traces = Vec::with_capacity(configs.len());
    for cfg in configs {
        let (trace, metrics) = run_scenario(cfg).map_err(|e| Error::Scenario {
            scenario: cfg.name.clone(),
            source: Box::new(e),
        })?;
        rows.push(ComparisonRow {
            name: cfg.name.clone(),
            metrics,
        });
        traces.push(trace);
    }
    let mut deltas = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            deltas.push(pair_delta(&rows[i], &rows[j]));
        }
    }
    Ok((Comparison { rows, deltas }, traces))
}
