use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lfc_laa::gridcode::ThresholdTable;
use lfc_laa::io::{self, output, Dataset, RunConfig, SweepSpec};
use lfc_laa::Error;

#[derive(Parser)]
#[command(name = "lfc-laa", version, about = "Multi-area load frequency control under load altering attacks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trace.csv, metrics.json and frequency.svg.
    Simulate(RunArgs),
    /// Sweep a network parameter and report the eigenvalue locus.
    Stability {
        #[command(flatten)]
        run: RunArgs,
        /// `<param>@<target>:<lo>:<hi>:<n>`, e.g. `K_LG@16,21:0:8:33`.
        #[arg(long)]
        sweep: String,
    },
    /// Grid-code metrics for a trace CSV, or for a fresh run of `--scenario`.
    Metrics {
        /// Trace CSV written by `simulate`.
        trace: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Load and check a dataset, then print a summary.
    ValidateDataset {
        #[arg(long)]
        dataset: Option<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Dataset file or built-in name.
    #[arg(long)]
    dataset: Option<String>,
    /// Scenario fixture id (baseline, I.1 .. I.5, II, III) or file.
    #[arg(long)]
    scenario: Option<String>,
    /// Sample period in seconds.
    #[arg(long)]
    dt: Option<f64>,
    /// Simulated time in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Output directory for artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Threshold table file replacing the default bands.
    #[arg(long)]
    thresholds: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self, default_scenario: Option<&str>) -> Result<RunConfig, Error> {
        let scenario = self
            .scenario
            .clone()
            .or_else(|| default_scenario.map(str::to_string))
            .ok_or_else(|| Error::Schema {
                location: "--scenario".into(),
                message: "a scenario is required".into(),
            })?;
        Ok(RunConfig {
            dataset: self.dataset.clone(),
            scenario,
            dt: self.dt,
            duration: self.duration,
            out_dir: self.out.clone(),
            thresholds: self.thresholds.clone(),
        })
    }
}

fn simulate(args: &RunArgs) -> Result<(), Error> {
    let config = args.config(None)?;
    let run = io::run_scenario(&config)?;
    print!("{}", io::metrics_text(run.areas.iter().map(|a| (a.area.as_str(), &a.metrics))));
    println!("scenario {}: {}", run.scenario, run.verdict);
    if let lfc_laa::sim::RunStatus::Diverged { time } = run.trace.status {
        println!("diverged at t = {time:.2} s");
    }
    Ok(())
}

fn stability(args: &RunArgs, sweep: &str) -> Result<(), Error> {
    let config = args.config(Some("baseline"))?;
    let spec: SweepSpec = sweep.parse()?;
    let report = io::run_stability(&config, &spec)?;
    let unstable = report.locus.iter().filter(|p| !p.stable).count();
    println!(
        "{}: {} points, {} unstable, tolerance {:e}",
        report.parameter,
        report.locus.len(),
        unstable,
        report.tolerance
    );
    match report.critical_value {
        Some(c) => println!(
            "critical value {:.6} in [{:.6}, {:.6}], {} below, {} above",
            c.value, c.lower, c.upper, c.below, c.above
        ),
        None => println!("no verdict change in range"),
    }
    Ok(())
}

fn metrics(trace: Option<&PathBuf>, args: &RunArgs) -> Result<(), Error> {
    let Some(path) = trace else {
        let mut config = args.config(None)?;
        let out = config.out_dir.take();
        let resolved = config.resolve()?;
        let run = io::execute_scenario(
            &resolved.dataset,
            &resolved.scenario,
            resolved.dt,
            resolved.duration,
            &resolved.table,
        )?;
        print!("{}", io::metrics_text(run.areas.iter().map(|a| (a.area.as_str(), &a.metrics))));
        if let Some(dir) = out {
            std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
            let path = dir.join("metrics.json");
            std::fs::write(&path, io::metrics_json(&run, &resolved.dataset, resolved.duration)?)
                .map_err(|e| io_error(&path, e))?;
        }
        return Ok(());
    };
    let dataset = Dataset::resolve(args.dataset.as_deref())?;
    let table = match &args.thresholds {
        Some(p) => ThresholdTable::load(p)?,
        None => ThresholdTable::default(),
    };
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    let csv = output::read_numeric_csv(file)?;
    let rows = io::metrics_from_table(&csv, dataset.nominal_frequency, &table)?;
    print!("{}", io::metrics_text(rows.iter().map(|(n, m)| (n.as_str(), m))));
    Ok(())
}

fn io_error(path: &std::path::Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn validate_dataset(source: Option<&str>) -> Result<(), Error> {
    let ds = Dataset::resolve(source)?;
    let net = ds.network_model()?;
    println!(
        "{}: {} areas, {} generators, {} buses, {} branches, {} ties",
        ds.name,
        ds.areas.len(),
        ds.generators.len(),
        net.gen_buses.len() + net.load_buses.len(),
        ds.network.branches.len(),
        ds.ties.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Stability { run, sweep } => stability(run, sweep),
        Command::Metrics { trace, run } => metrics(trace.as_ref(), run),
        Command::ValidateDataset { dataset } => validate_dataset(dataset.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
