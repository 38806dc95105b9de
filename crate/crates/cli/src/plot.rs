//! SVG figures of a run.

use std::path::Path;

use lanemerge::sim::Trace;
use plotters::prelude::*;

type PlotResult = Result<(), Box<dyn std::error::Error>>;

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

fn bounds(points: impl Iterator<Item = (f64, f64)>) -> ((f64, f64), (f64, f64)) {
    let mut b = (
        (f64::INFINITY, f64::NEG_INFINITY),
        (f64::INFINITY, f64::NEG_INFINITY),
    );
    for (x, y) in points {
        b.0 = (b.0 .0.min(x), b.0 .1.max(x));
        b.1 = (b.1 .0.min(y), b.1 .1.max(y));
    }
    if !b.0 .0.is_finite() {
        return ((0.0, 1.0), (0.0, 1.0));
    }
    let pad = |(lo, hi): (f64, f64)| {
        let m = ((hi - lo) * 0.05).max(0.1);
        (lo - m, hi + m)
    };
    (pad(b.0), pad(b.1))
}

/// One polyline per named series on a single x/y chart.
fn line_chart(
    file: &Path,
    title: &str,
    labels: (&str, &str),
    series: &[(String, Vec<(f64, f64)>)],
) -> PlotResult {
    let root = SVGBackend::new(file, (1000, 420)).into_drawing_area();
    root.fill(&WHITE)?;
    let ((x0, x1), (y0, y1)) = bounds(series.iter().flat_map(|s| s.1.iter().copied()));
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(55)
        .build_cartesian_2d(x0..x1, y0..y1)?;
    chart
        .configure_mesh()
        .x_desc(labels.0)
        .y_desc(labels.1)
        .draw()?;
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}

/// Trajectories of every vehicle plus the planned paths.
pub fn xy_overlay(trace: &Trace, file: &Path) -> PlotResult {
    let mut series: Vec<(String, Vec<(f64, f64)>)> = trace
        .vehicle_ids()
        .into_iter()
        .map(|id| {
            let pts = trace.series(&id).map(|(_, r)| (r.x, r.y)).collect();
            (id, pts)
        })
        .collect();
    for (i, p) in trace.paths.iter().enumerate() {
        let pts = p.path.waypoints.iter().map(|w| (w.x, w.y)).collect();
        series.push((format!("path {i} ({})", p.mode), pts));
    }
    line_chart(
        file,
        &format!("{}: trajectories", trace.meta.scenario),
        ("x (m)", "y (m)"),
        &series,
    )
}

/// Ego trajectories of several runs.
pub fn compare_overlay(traces: &[Trace], file: &Path) -> PlotResult {
    let series: Vec<_> = traces
        .iter()
        .map(|t| {
            (
                t.meta.scenario.clone(),
                t.ego_series().map(|(_, r)| (r.x, r.y)).collect(),
            )
        })
        .collect();
    line_chart(file, "ego trajectories", ("x (m)", "y (m)"), &series)
}

/// Sideslip, yaw angle and speed of every vehicle against time, one file each.
pub fn motion_states(trace: &Trace, dir: &Path) -> PlotResult {
    let ids = trace.vehicle_ids();
    let signals: [(&str, &str, fn(&lanemerge::sim::trace::VehicleRecord) -> f64); 3] = [
        ("sideslip", "beta (rad)", |r| r.beta),
        ("yaw", "psi (rad)", |r| r.psi),
        ("speed", "v (m/s)", |r| r.v),
    ];
    for (name, unit, f) in signals {
        let series: Vec<_> = ids
            .iter()
            .map(|id| {
                (
                    id.clone(),
                    trace.series(id).map(|(t, r)| (t, f(r))).collect(),
                )
            })
            .collect();
        line_chart(
            &dir.join(format!("{name}.svg")),
            &format!("{}: {name}", trace.meta.scenario),
            ("t (s)", unit),
            &series,
        )?;
    }
    Ok(())
}
