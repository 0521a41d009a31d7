//! Datasets, scenarios, artifacts and the run drivers behind the CLI.

pub mod dataset;
pub mod output;
pub mod scenario;

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gridcode::{classify, metrics, Classification, GridVerdict, MetricsOptions, ThresholdTable, TraceMetrics};
use crate::sim::{simulate, RunStatus, Trace};
use crate::stability::{stability_verdict, sweep_grid, sweep_parameter, SweepOptions, SweepParameter, SweepReport};

pub use dataset::Dataset;
pub use scenario::{NetworkAttack, ScenarioSpec};

pub const DEFAULT_DT: f64 = 0.01;
pub const MAX_DT: f64 = 0.1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    /// Dataset file or built-in name; `None` for the default.
    pub dataset: Option<String>,
    /// Scenario fixture id or file.
    pub scenario: String,
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub thresholds: Option<PathBuf>,
}

/// Everything a run needs, loaded and checked.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub dataset: Dataset,
    pub scenario: ScenarioSpec,
    pub dt: f64,
    pub duration: f64,
    pub table: ThresholdTable,
}

impl RunConfig {
    pub fn new(scenario: impl Into<String>) -> Self {
        RunConfig {
            scenario: scenario.into(),
            ..Default::default()
        }
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let dt = self.dt.unwrap_or(DEFAULT_DT);
        if !(dt > 0.0 && dt <= MAX_DT) {
            return Err(Error::schema("dt", format!("must lie in (0, {MAX_DT}], got {dt}")));
        }
        let dataset = Dataset::resolve(self.dataset.as_deref())?;
        let scenario = ScenarioSpec::resolve(&self.scenario)?;
        let duration = self.duration.unwrap_or_else(|| scenario.duration());
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::schema("duration", format!("must be positive, got {duration}")));
        }
        let table = match &self.thresholds {
            Some(p) => ThresholdTable::load(p)?,
            None => ThresholdTable::default(),
        };
        Ok(Resolved {
            dataset,
            scenario,
            dt,
            duration,
            table,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaReport {
    pub area: String,
    pub metrics: TraceMetrics,
    pub classification: Classification,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub scenario: String,
    pub trace: Trace,
    pub areas: Vec<AreaReport>,
    pub verdict: GridVerdict,
}

/// Worst verdict across areas.
fn combine(verdicts: impl Iterator<Item = GridVerdict>) -> GridVerdict {
    verdicts.fold(GridVerdict::Compliant, |acc, v| match (acc, v) {
        (GridVerdict::Diverged, _) | (_, GridVerdict::Diverged) => GridVerdict::Diverged,
        (GridVerdict::Violation, _) | (_, GridVerdict::Violation) => GridVerdict::Violation,
        _ => GridVerdict::Compliant,
    })
}

pub fn evaluate_trace(trace: &Trace, names: &[String], table: &ThresholdTable) -> Result<Vec<AreaReport>> {
    let options = MetricsOptions {
        diverged: trace.diverged(),
        ..MetricsOptions::for_table(table)
    };
    (0..trace.areas.len())
        .map(|a| {
            let f = trace.frequency_hz(a);
            Ok(AreaReport {
                area: names.get(a).cloned().unwrap_or_else(|| format!("area {}", a + 1)),
                metrics: metrics(&trace.time, &f, table, &options)?,
                classification: classify(&f, trace.dt, table)?,
            })
        })
        .collect()
}

pub fn execute_scenario(
    dataset: &Dataset,
    spec: &ScenarioSpec,
    dt: f64,
    duration: f64,
    table: &ThresholdTable,
) -> Result<ScenarioRun> {
    let system = dataset.system_model(dt)?;
    let scenario = spec.build(dataset)?;
    let trace = simulate(&system, &scenario, duration)?;
    let names: Vec<String> = dataset.areas.iter().map(|a| a.name.clone()).collect();
    let areas = evaluate_trace(&trace, &names, table)?;
    let verdict = combine(areas.iter().map(|a| a.metrics.verdict));
    Ok(ScenarioRun {
        scenario: spec.id.clone(),
        trace,
        areas,
        verdict,
    })
}

pub const METRIC_COLUMNS: [&str; 7] = [
    "steady_state_hz",
    "settling_time_s",
    "nadir_hz",
    "nadir_time_s",
    "zenith_hz",
    "zenith_time_s",
    "verdict",
];

/// Aligned plain-text table, one row per area, `-` for missing values.
pub fn metrics_text<'a>(rows: impl IntoIterator<Item = (&'a str, &'a TraceMetrics)>) -> String {
    let mut lines: Vec<Vec<String>> = vec![std::iter::once("area".to_string())
        .chain(METRIC_COLUMNS.iter().map(|c| c.to_string()))
        .collect()];
    for (name, m) in rows {
        lines.push(std::iter::once(name.to_string()).chain(m.cells()).collect());
    }
    let widths: Vec<usize> = (0..lines[0].len())
        .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for l in &lines {
        let cells: Vec<String> = l.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct MetricsDocument<'a> {
    scenario: &'a str,
    dataset: &'a str,
    dt: f64,
    duration: f64,
    status: RunStatus,
    verdict: GridVerdict,
    areas: &'a [AreaReport],
}

pub fn metrics_json(run: &ScenarioRun, dataset: &Dataset, duration: f64) -> Result<String> {
    let doc = MetricsDocument {
        scenario: &run.scenario,
        dataset: &dataset.name,
        dt: run.trace.dt,
        duration,
        status: run.trace.status,
        verdict: run.verdict,
        areas: &run.areas,
    };
    serde_json::to_string_pretty(&doc)
        .map(|s| s + "\n")
        .map_err(|e| Error::schema("metrics", e.to_string()))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// `trace.csv`, `metrics.json` and `frequency.svg` for one run.
pub fn write_scenario_artifacts(run: &ScenarioRun, resolved: &Resolved, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut csv = Vec::new();
    output::write_trace_csv(&mut csv, &run.trace, &resolved.dataset.area_generators())?;
    let names: Vec<String> = resolved.dataset.areas.iter().map(|a| a.name.clone()).collect();
    let title = format!("Scenario {}: area frequencies", run.scenario);
    let svg = output::frequency_svg(&run.trace, &resolved.table, &names, &title);
    Ok(vec![
        write_file(dir, "trace.csv", &csv)?,
        write_file(dir, "metrics.json", metrics_json(run, &resolved.dataset, resolved.duration)?.as_bytes())?,
        write_file(dir, "frequency.svg", svg.as_bytes())?,
    ])
}

pub fn run_scenario(config: &RunConfig) -> Result<ScenarioRun> {
    let resolved = config.resolve()?;
    let run = execute_scenario(&resolved.dataset, &resolved.scenario, resolved.dt, resolved.duration, &resolved.table)?;
    if let Some(dir) = &config.out_dir {
        write_scenario_artifacts(&run, &resolved, dir)?;
    }
    Ok(run)
}

/// `<param>@<target>:<lo>:<hi>:<n>`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl FromStr for SweepSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(Error::schema("sweep", format!("`{s}` is not <param>@<target>:<lo>:<hi>:<n>")));
        }
        let num = |t: &str, what: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::schema("sweep", format!("bad {what} `{t}`")))
        };
        let points = parts[3]
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::schema("sweep", format!("bad point count `{}`", parts[3])))?;
        let spec = SweepSpec {
            parameter: parts[0].parse()?,
            lo: num(parts[1], "lower bound")?,
            hi: num(parts[2], "upper bound")?,
            points,
        };
        if points == 0 || !(spec.hi >= spec.lo) {
            return Err(Error::schema("sweep", "need lo <= hi and at least one point"));
        }
        Ok(spec)
    }
}

impl SweepSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        sweep_grid(self.lo, self.hi, self.points)
    }
}

/// Sweep on the dataset's network with the scenario's network attack, if
/// any, applied first.
pub fn execute_stability(dataset: &Dataset, scenario: &ScenarioSpec, sweep: &SweepSpec, options: &SweepOptions) -> Result<SweepReport> {
    let mut net = dataset.network_model()?;
    if let Some(attack) = &scenario.network_attack {
        net = attack.apply(&net)?;
    }
    sweep_parameter(&net, &sweep.parameter, &sweep.values()?, options)
}

#[derive(Serialize)]
struct PointSummary {
    value: f64,
    stable: bool,
    max_real: f64,
    unstable_count: usize,
}

#[derive(Serialize)]
struct StabilityDocument<'a> {
    parameter: String,
    scenario: &'a str,
    tolerance: f64,
    critical_value: Option<crate::stability::CriticalValue>,
    points: Vec<PointSummary>,
}

pub fn stability_json(report: &SweepReport, scenario: &str) -> Result<String> {
    let doc = StabilityDocument {
        parameter: report.parameter.to_string(),
        scenario,
        tolerance: report.tolerance,
        critical_value: report.critical_value,
        points: report
            .locus
            .iter()
            .map(|p| PointSummary {
                value: p.value,
                stable: stability_verdict(&p.spectrum, report.tolerance).is_stable(),
                max_real: p.spectrum.max_real(),
                unstable_count: p.spectrum.eigenvalues.iter().filter(|z| z.re > report.tolerance).count(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc)
        .map(|s| s + "\n")
        .map_err(|e| Error::schema("stability", e.to_string()))
}

/// `locus.csv`, `locus.svg` and `stability.json`.
pub fn write_stability_artifacts(report: &SweepReport, scenario: &str, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut csv = Vec::new();
    output::write_locus_csv(&mut csv, report)?;
    let svg = output::locus_svg(report, &format!("Eigenvalue locus, scenario {scenario}"));
    Ok(vec![
        write_file(dir, "locus.csv", &csv)?,
        write_file(dir, "locus.svg", svg.as_bytes())?,
        write_file(dir, "stability.json", stability_json(report, scenario)?.as_bytes())?,
    ])
}

pub fn run_stability(config: &RunConfig, sweep: &SweepSpec) -> Result<SweepReport> {
    let resolved = config.resolve()?;
    let report = execute_stability(&resolved.dataset, &resolved.scenario, sweep, &SweepOptions::default())?;
    if let Some(dir) = &config.out_dir {
        write_stability_artifacts(&report, &resolved.scenario.id, dir)?;
    }
    Ok(report)
}

/// Metrics for each `area<n>_df_hz` column of a trace CSV. A value past the
/// divergence threshold in any state column marks the run as diverged.
pub fn metrics_from_table(
    table: &output::Table,
    nominal_frequency: f64,
    thresholds: &ThresholdTable,
) -> Result<Vec<(String, TraceMetrics)>> {
    let time = table
        .column("time")
        .ok_or_else(|| Error::schema("csv", "missing `time` column"))?;
    let scaled = |name: &str, v: f64| if name.ends_with("_df_hz") { v / nominal_frequency } else { v };
    let diverged = table.header.iter().enumerate().filter(|(_, n)| *n != "time").any(|(c, n)| {
        table
            .rows
            .iter()
            .any(|r| !r[c].is_finite() || scaled(n, r[c]).abs() > crate::sim::DIVERGENCE_THRESHOLD)
    });
    let options = MetricsOptions {
        diverged,
        ..MetricsOptions::for_table(thresholds)
    };
    let mut out = Vec::new();
    for name in &table.header {
        let Some(area) = name.strip_suffix("_df_hz") else {
            continue;
        };
        let f: Vec<f64> = table
            .column(name)
            .expect("header column")
            .iter()
            .map(|df| nominal_frequency + df)
            .collect();
        out.push((area.to_string(), metrics(&time, &f, thresholds, &options)?));
    }
    if out.is_empty() {
        return Err(Error::schema("csv", "no `*_df_hz` columns found"));
    }
    Ok(out)
}
