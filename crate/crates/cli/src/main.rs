//! `uavlc`: run the optimizer once on a scenario file, or sweep one
//! parameter over random drops and emit plot-ready CSV.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use uavlc::model::{check_feasibility, load_scenario, random_scenario, Scenario, ScenarioConfig};
use uavlc::orchestrator::{run, RunConfig, RunTrace, Scheme};
use uavlc::Error;

/// Feasibility tolerance applied to every reported solution.
const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "uavlc", version, about = "Transmit-power minimization for RIS-assisted VLC UAV networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one scenario file and write solution.json and summary.csv.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "scheme1-dual", value_parser = parse_scheme)]
        scheme: Scheme,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep one parameter over seeds 0..n and write sweep.csv and plotdata.csv.
    Sweep {
        #[arg(long, value_enum)]
        sweep: SweepVar,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "scheme1-dual,scheme2-greedy,no-ris", value_parser = parse_scheme)]
        schemes: Vec<Scheme>,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Generator settings (TOML); the reference setup when omitted.
        #[arg(long)]
        base: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a random scenario and write it as TOML.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        base: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepVar {
    Users,
    Height,
    RisCount,
    Elements,
}

impl SweepVar {
    fn name(self) -> &'static str {
        match self {
            SweepVar::Users => "users",
            SweepVar::Height => "height",
            SweepVar::RisCount => "ris-count",
            SweepVar::Elements => "elements",
        }
    }

    fn apply(self, cfg: &mut ScenarioConfig, value: f64) -> Result<(), Error> {
        let count = || {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Validation(format!("{} must be a non-negative integer, got {value}", self.name())))
            }
        };
        match self {
            SweepVar::Users => cfg.user_count = count()?,
            SweepVar::Height => cfg.uav_altitude = value,
            SweepVar::RisCount => cfg.ris_count = count()?,
            SweepVar::Elements => cfg.ris_elements = count()?,
        }
        Ok(())
    }
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Serialize)]
struct SummaryRow {
    scheme: Scheme,
    seed: u64,
    #[serde(rename = "total_power_W")]
    total_power_w: f64,
    outer_iters: usize,
    runtime_s: f64,
    feasible: bool,
}

#[derive(Serialize)]
struct SweepRow {
    sweep_var: &'static str,
    value: f64,
    scheme: Scheme,
    seed: u64,
    /// Empty for failed cells.
    #[serde(rename = "total_power_W")]
    total_power_w: Option<f64>,
    runtime_s: f64,
    feasible: bool,
}

#[derive(Serialize)]
struct PlotRow {
    sweep_var: &'static str,
    value: f64,
    scheme: Scheme,
    #[serde(rename = "mean_power_W")]
    mean_power_w: Option<f64>,
    feasible_runs: usize,
    runs: usize,
}

/// Exit status: 1 for input and I/O problems, 2 when the instance cannot be
/// served, 3 when a solver fails.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoCoverage { .. } | Error::InfeasibleChannel { .. } | Error::Infeasible { .. } => 2,
        Error::SolverFailure { .. } => 3,
        _ => 1,
    }
}

fn read_base(path: Option<&Path>) -> Result<ScenarioConfig, Error> {
    let Some(path) = path else {
        return Ok(ScenarioConfig::table1());
    };
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Schema {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Validation(format!("csv: {other:?}")),
    }
}

fn run_once(scenario_path: &Path, scheme: Scheme, seed: u64, out: &Path) -> Result<(), Error> {
    let scenario = load_scenario(scenario_path)?;
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let trace = run(&scenario, &RunConfig::new(scheme, seed)).map_err(|f| f.error)?;
    let runtime_s = start.elapsed().as_secs_f64();
    let report = check_feasibility(&trace.solution, &solved_scenario(&trace, &scenario), FEASIBILITY_TOL)?;
    let feasible = report.feasible;

    let json = serde_json::to_string_pretty(&trace).expect("trace serializes");
    fs::write(out.join("solution.json"), json + "\n")?;
    write_csv(
        &out.join("summary.csv"),
        &[SummaryRow {
            scheme,
            seed,
            total_power_w: trace.final_power(),
            outer_iters: trace.outer_iters(),
            runtime_s,
            feasible,
        }],
    )?;
    if feasible {
        Ok(())
    } else {
        Err(Error::Infeasible {
            constraint: 0,
            violation: -report.worst_normalized_slack,
        })
    }
}

/// The no-ris scheme solves the scenario with every RIS removed.
fn solved_scenario<'a>(trace: &RunTrace, scenario: &'a Scenario) -> std::borrow::Cow<'a, Scenario> {
    if trace.scheme == Scheme::NoRis {
        std::borrow::Cow::Owned(scenario.without_ris())
    } else {
        std::borrow::Cow::Borrowed(scenario)
    }
}

fn feasible(trace: &RunTrace, scenario: &Scenario) -> Result<bool, Error> {
    Ok(check_feasibility(&trace.solution, &solved_scenario(trace, scenario), FEASIBILITY_TOL)?.feasible)
}

fn sweep_cell(base: &ScenarioConfig, var: SweepVar, value: f64, scheme: Scheme, seed: u64) -> SweepRow {
    let start = Instant::now();
    let outcome = (|| {
        let mut cfg = base.clone();
        var.apply(&mut cfg, value)?;
        let scenario = random_scenario(seed, &cfg)?;
        let trace = run(&scenario, &RunConfig::new(scheme, seed)).map_err(|f| f.error)?;
        Ok::<_, Error>((trace.final_power(), feasible(&trace, &scenario)?))
    })();
    let runtime_s = start.elapsed().as_secs_f64();
    let (total_power_w, feasible) = match outcome {
        Ok((p, ok)) => (Some(p), ok),
        Err(e) => {
            eprintln!("{} = {value}, {scheme}, seed {seed}: {e}", var.name());
            (None, false)
        }
    };
    SweepRow {
        sweep_var: var.name(),
        value,
        scheme,
        seed,
        total_power_w,
        runtime_s,
        feasible,
    }
}

fn plot_rows(rows: &[SweepRow], values: &[f64], schemes: &[Scheme]) -> Vec<PlotRow> {
    let mut out = Vec::new();
    for &value in values {
        for &scheme in schemes {
            let cell: Vec<&SweepRow> = rows.iter().filter(|r| r.value == value && r.scheme == scheme).collect();
            let powers: Vec<f64> = cell.iter().filter(|r| r.feasible).filter_map(|r| r.total_power_w).collect();
            out.push(PlotRow {
                sweep_var: cell.first().map_or("", |r| r.sweep_var),
                value,
                scheme,
                mean_power_w: (!powers.is_empty()).then(|| powers.iter().sum::<f64>() / powers.len() as f64),
                feasible_runs: powers.len(),
                runs: cell.len(),
            });
        }
    }
    out
}

fn thread_count() -> usize {
    std::env::var("UAVLC_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn sweep(
    var: SweepVar,
    values: &[f64],
    schemes: &[Scheme],
    seeds: u64,
    base: Option<&Path>,
    out: &Path,
) -> Result<(), Error> {
    let base = read_base(base)?;
    fs::create_dir_all(out)?;
    let cells: Vec<(f64, Scheme, u64)> = values
        .iter()
        .flat_map(|&v| schemes.iter().flat_map(move |&s| (0..seeds).map(move |seed| (v, s, seed))))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::Validation(e.to_string()))?;
    // Workers only compute; rows come back in cell order and are written here.
    let rows: Vec<SweepRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(v, s, seed)| sweep_cell(&base, var, v, s, seed))
            .collect()
    });
    write_csv(&out.join("sweep.csv"), &rows)?;
    write_csv(&out.join("plotdata.csv"), &plot_rows(&rows, values, schemes))
}

fn generate(seed: u64, base: Option<&Path>, out: &Path) -> Result<(), Error> {
    let scenario = random_scenario(seed, &read_base(base)?)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, scenario.to_toml_string())?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            scenario,
            scheme,
            seed,
            out,
        } => run_once(scenario, *scheme, *seed, out),
        Command::Sweep {
            sweep: var,
            values,
            schemes,
            seeds,
            base,
            out,
        } => sweep(*var, values, schemes, *seeds, base.as_deref(), out),
        Command::Generate { seed, base, out } => generate(*seed, base.as_deref(), out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
