//! Subcommands of the `lanemerge` binary.
//!
//! Every command returns a process exit code: 0 on success, 2 when the input
//! is invalid (nothing is written), 3 when a run fails.

pub mod plot;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use lanemerge::sim::config::parse_assignment;
use lanemerge::sim::{compare_scenarios, run_scenario, Comparison, Metrics, ScenarioConfig, Trace};
use lanemerge::Error;
use rayon::prelude::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Settings shared by every subcommand that loads configs.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Raw `key=value` overrides applied in order.
    pub overrides: Vec<String>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
}

impl LoadOptions {
    fn assignments(&self) -> Result<Vec<(String, String)>, Error> {
        let mut out: Vec<_> = self
            .overrides
            .iter()
            .map(|s| parse_assignment(s))
            .collect::<Result<_, _>>()?;
        if let Some(dt) = self.dt {
            out.push(("dt".into(), dt.to_string()));
        }
        if let Some(seed) = self.seed {
            out.push(("channel.seed".into(), seed.to_string()));
        }
        Ok(out)
    }

    pub fn load(&self, path: &Path) -> Result<ScenarioConfig, Error> {
        ScenarioConfig::load(path, &self.assignments()?)
    }
}

fn invalid(context: &str, e: &Error) -> i32 {
    eprintln!("error: {context}: {e}");
    EXIT_INVALID
}

fn runtime(context: &str, e: &dyn std::fmt::Display) -> i32 {
    eprintln!("error: {context}: {e}");
    EXIT_RUNTIME
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let file = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(file, value)?;
    Ok(())
}

/// Writes the trace, messages, metrics and path dumps of one run.
pub fn write_run(
    out: &Path,
    trace: &Trace,
    metrics: &Metrics,
    plots: bool,
) -> Result<(), Box<dyn std::error::Error>> {
    fs::create_dir_all(out)?;
    trace.write_csv(BufWriter::new(fs::File::create(out.join("trace.csv"))?))?;
    trace.write_messages(BufWriter::new(fs::File::create(
        out.join("messages.jsonl"),
    )?))?;
    write_json(&out.join("metrics.json"), metrics)?;
    trace.write_paths(&out.join("paths"))?;
    if plots {
        plot::xy_overlay(trace, &out.join("xy.svg"))?;
        plot::motion_states(trace, out)?;
    }
    Ok(())
}

pub fn cmd_validate(configs: &[PathBuf], opts: &LoadOptions) -> i32 {
    let mut code = EXIT_OK;
    for path in configs {
        match opts.load(path) {
            Ok(cfg) => println!(
                "{}: ok ({} vehicles, {} steps)",
                path.display(),
                cfg.vehicles.len(),
                cfg.steps()
            ),
            Err(e) => code = invalid(&path.display().to_string(), &e),
        }
    }
    code
}

pub fn cmd_run(config: &Path, out: &Path, opts: &LoadOptions, plots: bool) -> i32 {
    let cfg = match opts.load(config) {
        Ok(c) => c,
        Err(e) => return invalid(&config.display().to_string(), &e),
    };
    let (trace, metrics) = match run_scenario(&cfg) {
        Ok(r) => r,
        Err(e) => return runtime(&cfg.name, &e),
    };
    if let Err(e) = write_run(out, &trace, &metrics, plots) {
        return runtime("writing outputs", &e);
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&metrics).unwrap_or_default()
    );
    EXIT_OK
}

fn fmt_opt(v: Option<f64>, unit: &str) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}{unit}"))
}

/// Aligned text table of a comparison.
pub fn comparison_table(c: &Comparison) -> String {
    let mut s = format!(
        "{:<28} {:>10} {:>11} {:>10} {:>6} {:>9} {:>5} {:>9}\n",
        "scenario", "merge_t", "path_len", "max|beta|", "flips", "min_gap", "viol", "completed"
    );
    for r in &c.rows {
        let m = &r.metrics;
        s += &format!(
            "{:<28} {:>10} {:>11.3} {:>10.5} {:>6} {:>9} {:>5} {:>9}\n",
            r.name,
            fmt_opt(m.merge_time, ""),
            m.path_length,
            m.max_abs_sideslip,
            m.sideslip_sign_changes,
            fmt_opt(m.min_gap_ratio, ""),
            m.rss_violations,
            m.completed
        );
    }
    for d in &c.deltas {
        s += &format!(
            "{} -> {}: merge_time {}, path_length {}\n",
            d.a,
            d.b,
            fmt_opt(d.merge_time_pct, "%"),
            fmt_opt(d.path_length_pct, "%")
        );
    }
    s
}

pub fn cmd_compare(configs: &[PathBuf], out: &Path, opts: &LoadOptions, plots: bool) -> i32 {
    if configs.len() < 2 {
        eprintln!("error: compare needs at least two configs");
        return EXIT_INVALID;
    }
    let mut loaded = Vec::with_capacity(configs.len());
    for path in configs {
        match opts.load(path) {
            Ok(c) => loaded.push(c),
            Err(e) => return invalid(&path.display().to_string(), &e),
        }
    }
    let (comparison, traces) = match compare_scenarios(&loaded) {
        Ok(r) => r,
        Err(e) => return runtime("compare", &e),
    };
    let written = fs::create_dir_all(out)
        .map_err(Error::from)
        .and_then(|_| write_json(&out.join("comparison.json"), &comparison));
    if let Err(e) = written {
        return runtime("writing outputs", &e);
    }
    if plots {
        if let Err(e) = plot::compare_overlay(&traces, &out.join("compare_xy.svg")) {
            return runtime("plotting", &e);
        }
    }
    print!("{}", comparison_table(&comparison));
    EXIT_OK
}

/// One swept parameter: `key=start:stop:step`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<f64>,
}

pub fn parse_sweep_axis(spec: &str) -> Result<SweepAxis, String> {
    let (key, range) = spec
        .split_once('=')
        .ok_or_else(|| format!("`{spec}`: expected key=start:stop:step"))?;
    let nums: Vec<f64> = range
        .split(':')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{spec}`: `{p}` is not a number"))
        })
        .collect::<Result<_, _>>()?;
    let [start, stop, step] = nums[..] else {
        return Err(format!("`{spec}`: expected start:stop:step"));
    };
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 {
        return Err(format!("`{spec}`: step must be positive"));
    }
    if start > stop {
        return Err(format!("`{spec}`: empty range"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    let values = (0..=n).map(|k| start + k as f64 * step).collect();
    Ok(SweepAxis {
        key: key.trim().to_string(),
        values,
    })
}

/// Cartesian product of the axes, first axis varying slowest.
pub fn sweep_grid(axes: &[SweepAxis]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

pub fn cmd_sweep(config: &Path, specs: &[String], out: &Path, opts: &LoadOptions) -> i32 {
    if specs.is_empty() {
        eprintln!("error: sweep needs at least one key=start:stop:step");
        return EXIT_INVALID;
    }
    let axes = match specs
        .iter()
        .map(|s| parse_sweep_axis(s))
        .collect::<Result<Vec<_>, _>>()
    {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let grid = sweep_grid(&axes);
    let configs: Result<Vec<ScenarioConfig>, Error> = grid
        .iter()
        .map(|point| {
            let mut o = opts.clone();
            o.overrides.extend(
                axes.iter()
                    .zip(point)
                    .map(|(a, v)| format!("{}={v}", a.key)),
            );
            o.load(config)
        })
        .collect();
    let configs = match configs {
        Ok(c) => c,
        Err(e) => return invalid(&config.display().to_string(), &e),
    };
    let results: Vec<_> = configs.par_iter().map(run_scenario).collect();

    let mut csv = axes
        .iter()
        .map(|a| a.key.clone())
        .collect::<Vec<_>>()
        .join(",");
    csv += ",completed,merge_time,path_length,max_abs_sideslip,sideslip_sign_changes,min_gap_ratio,rss_violations\n";
    for (point, result) in grid.iter().zip(results) {
        let m = match result {
            Ok((_, m)) => m,
            Err(e) => return runtime(&format!("sweep point {point:?}"), &e),
        };
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        let vals: Vec<String> = point.iter().map(|v| v.to_string()).collect();
        csv += &format!(
            "{},{},{},{},{},{},{},{}\n",
            vals.join(","),
            m.completed,
            opt(m.merge_time),
            m.path_length,
            m.max_abs_sideslip,
            m.sideslip_sign_changes,
            opt(m.min_gap_ratio),
            m.rss_violations
        );
    }
    if let Err(e) = fs::create_dir_all(out).and_then(|_| fs::write(out.join("sweep.csv"), &csv)) {
        return runtime("writing outputs", &e);
    }
    print!("{csv}");
    EXIT_OK
}

/// Re-renders the figures of a saved run directory's scenario.
pub fn cmd_plot(config: &Path, out: &Path, opts: &LoadOptions) -> i32 {
    let cfg = match opts.load(config) {
        Ok(c) => c,
        Err(e) => return invalid(&config.display().to_string(), &e),
    };
    let trace = match run_scenario(&cfg) {
        Ok((t, _)) => t,
        Err(e) => return runtime(&cfg.name, &e),
    };
    let res = fs::create_dir_all(out)
        .map_err(|e| Box::new(e) as Box<dyn std::error::Error>)
        .and_then(|_| plot::xy_overlay(&trace, &out.join("xy.svg")))
        .and_then(|_| plot::motion_states(&trace, out));
    match res {
        Ok(()) => EXIT_OK,
        Err(e) => runtime("plotting", &e),
    }
}
