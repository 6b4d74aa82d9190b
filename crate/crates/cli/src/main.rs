//! `penrose`: scenario runs, sweeps and single-quantity computations.

use clap::{Parser, Subcommand, ValueEnum};
use penrose_core::capacity::{
    grid_capacity, radial_capacity_fn, radial_weighted_capacity, symmetrized_lower_bound, CapacityResult, Potential,
    Weight,
};
use penrose_core::harness::{
    grid_params, mass_radii, radial_path, reach, run_scenario, run_sweep, validate_scenario_file, ExitStatus, Mode,
    Scenario,
};
use penrose_core::mass::{adm_extrapolate, MassSource};
use penrose_core::symmetrize::{extend_into_omega, rearrange, DEFAULT_BOUNDARY_TOL};
use penrose_core::SchwarzschildData;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "penrose", version, about = "Mass, capacity and volume bounds for conformally flat scenarios")]
struct Cli {
    /// Override the scenario mode: strict or exploratory.
    #[arg(long, global = true)]
    mode: Option<String>,

    /// Directory for reports, tables and sidecars. Without it results go to stdout.
    #[arg(long, global = true, env = "PENROSE_OUT_DIR")]
    out: Option<PathBuf>,

    /// Cells per circumradius: sets h = circumradius / N.
    #[arg(long, global = true)]
    resolution: Option<f64>,

    /// Scenarios run concurrently in a sweep.
    #[arg(long, global = true, env = "PENROSE_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full chain on a scenario and write its report.
    Verify { scenario: PathBuf },
    /// Run a scenario once per value of one parameter and write a CSV table.
    Sweep {
        scenario: PathBuf,
        /// Dotted path into the scenario file, e.g. factor.mass or factor.poles[1].charge.
        #[arg(long)]
        param: String,
        /// Comma-separated values; fractions like 1/24 are accepted.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Capacity of the scenario boundary.
    Capacity {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = Which::Both)]
        metric: Which,
    },
    /// ADM mass of the scenario factor by flux extrapolation.
    Mass { scenario: PathBuf },
    /// Rearrange the flat capacity potential and report the symmetrized bound.
    Symmetrize { scenario: PathBuf },
    /// Closed-form Schwarzschild quantities.
    Schwarzschild {
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Comma-separated masses.
        #[arg(long, default_value = "2")]
        m: String,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Which {
    G,
    Flat,
    Both,
}

struct Failure {
    status: ExitStatus,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Self { status: ExitStatus::InputError, message: message.to_string() }
    }

    fn numerical(message: impl ToString) -> Self {
        Self { status: ExitStatus::NumericalFailure, message: message.to_string() }
    }
}

type Outcome = Result<ExitStatus, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { code(ExitStatus::InputError) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(status) => code(status),
        Err(f) => {
            eprintln!("error: {}", f.message);
            code(f.status)
        }
    }
}

fn code(status: ExitStatus) -> ExitCode {
    ExitCode::from(status.code() as u8)
}

fn run(cli: &Cli) -> Outcome {
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
    }
    match &cli.command {
        Command::Verify { scenario } => verify(cli, &load(cli, scenario)?),
        Command::Sweep { scenario, param, values } => sweep(cli, &load(cli, scenario)?, param, values),
        Command::Capacity { scenario, metric } => capacity(cli, &load(cli, scenario)?, *metric),
        Command::Mass { scenario } => mass(cli, &load(cli, scenario)?),
        Command::Symmetrize { scenario } => symmetrize(cli, &load(cli, scenario)?),
        Command::Schwarzschild { n, m } => schwarzschild(*n, m),
    }
}

/// Reads a scenario and applies the global overrides.
fn load(cli: &Cli, path: &Path) -> Result<Scenario, Failure> {
    let mut s = validate_scenario_file(path).map_err(Failure::input)?;
    if let Some(mode) = &cli.mode {
        s.mode = mode.parse::<Mode>().map_err(Failure::input)?;
    }
    if let Some(cells) = cli.resolution {
        if !(cells >= 4.0) || !cells.is_finite() {
            return Err(Failure::input(format!("--resolution must be at least 4, got {cells}")));
        }
        let mode = s.mode;
        s = s.with_parameter("numerics.h", s.domain.circumradius() / cells).map_err(Failure::input)?;
        s.mode = mode;
    }
    Ok(s)
}

/// `a`, `-a`, or `a/b`.
fn parse_number(text: &str) -> Result<f64, Failure> {
    let t = text.trim();
    let bad = || Failure::input(format!("not a number: {t:?}"));
    let v = match t.split_once('/') {
        Some((a, b)) => {
            let (a, b) = (a.trim().parse::<f64>().map_err(|_| bad())?, b.trim().parse::<f64>().map_err(|_| bad())?);
            a / b
        }
        None => t.parse::<f64>().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

fn parse_list(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',').filter(|v| !v.trim().is_empty()).map(parse_number).collect()
}

fn output_file(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| Failure::numerical(format!("{}: {e}", path.display())))
}

/// Writes `value` as pretty JSON to `<out>/<name>`, or to stdout.
fn emit_json<T: Serialize>(cli: &Cli, name: &str, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(Failure::numerical)?;
    text.push('\n');
    match &cli.out {
        Some(dir) => {
            let mut f = output_file(dir, name)?;
            f.write_all(text.as_bytes()).and_then(|_| f.flush()).map_err(Failure::numerical)?;
            println!("wrote {}", dir.join(name).display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn verify(cli: &Cli, s: &Scenario) -> Outcome {
    let (report, timings) = run_scenario(s).map_err(Failure::numerical)?;
    match &cli.out {
        Some(dir) => {
            let name = format!("{}.report.json", s.name);
            let mut f = output_file(dir, &name)?;
            report.write_json(&mut f).and_then(|_| f.flush()).map_err(Failure::numerical)?;
            summarize(&report);
            println!("wrote {}", dir.join(name).display());
            emit_json(cli, &format!("{}.timings.json", s.name), &timings)?;
        }
        None => print!("{}", report.to_json()),
    }
    Ok(report.exit_status())
}

fn summarize(r: &penrose_core::harness::Report) {
    println!("{}: {}", r.scenario, serde_json::to_string(&r.verdict).unwrap_or_default().trim_matches('"'));
    for name in r.hypotheses.failed() {
        println!("  {name}: FAILED");
    }
    if let (Some(q), Some(m), Some(e)) = (&r.quantities, &r.margins, &r.errors) {
        println!("  m = {:.9}  C_g = {:.9}  C_flat = {:.9}  rhs_vol = {:.9}", q.m, q.C_g, q.C_flat, q.rhs_vol);
        let labels = ["m - C_g", "C_g - C_flat", "C_flat - rhs_vol"];
        for ((label, v), err) in labels.iter().zip(m.as_array()).zip(e.margins) {
            println!("  {label:>16} = {v:+.3e} (error {err:.1e})");
        }
    }
    for note in &r.notes {
        println!("  note: {note}");
    }
}

fn sweep(cli: &Cli, s: &Scenario, param: &str, values: &str) -> Outcome {
    let values = parse_list(values)?;
    let workers = cli.workers.unwrap_or(1);
    let table = run_sweep(s, param, &values, workers);
    match &cli.out {
        Some(dir) => {
            let name = format!("{}.sweep.csv", s.name);
            let f = output_file(dir, &name)?;
            table.write_csv(f).map_err(Failure::numerical)?;
            println!("wrote {}", dir.join(name).display());
        }
        None => table.write_csv(std::io::stdout().lock()).map_err(Failure::numerical)?,
    }
    for row in &table.rows {
        if let Some(e) = &row.error {
            eprintln!("{param} = {}: {e}", row.value);
        }
    }
    Ok(table.exit_status())
}

#[derive(Serialize)]
struct CapacitySummary {
    value: f64,
    energy: f64,
    error_estimate: f64,
    iterations: usize,
    unknowns: usize,
}

impl From<&CapacityResult> for CapacitySummary {
    fn from(c: &CapacityResult) -> Self {
        Self {
            value: c.value,
            energy: c.energy,
            error_estimate: c.error_estimate,
            iterations: c.stats.iterations,
            unknowns: c.stats.unknowns,
        }
    }
}

#[allow(non_snake_case)]
#[derive(Serialize)]
struct CapacityOutput {
    scenario: String,
    path: &'static str,
    h: f64,
    C_g: Option<CapacitySummary>,
    C_flat: Option<CapacitySummary>,
}

fn capacity(cli: &Cli, s: &Scenario, which: Which) -> Outcome {
    let radial = radial_path(s);
    let n = s.dim.n();
    let params = grid_params(s);
    let solve = |weight: Weight| -> Result<CapacityResult, Failure> {
        let r = s.domain.circumradius();
        let result = match (&weight, radial) {
            (Weight::FactorSquared(u), true) => radial_weighted_capacity(u, r),
            (Weight::Unit, true) => radial_capacity_fn(n, r, |_| 1.0),
            (_, false) => grid_capacity(&s.domain, &weight, &params),
        };
        result.map_err(Failure::numerical)
    };
    let c_g = match which {
        Which::G | Which::Both => Some(solve(Weight::FactorSquared(s.factor.clone()))?),
        Which::Flat => None,
    };
    let c_flat = match which {
        Which::Flat | Which::Both => Some(solve(Weight::Unit)?),
        Which::G => None,
    };
    let out = CapacityOutput {
        scenario: s.name.clone(),
        path: if radial { "radial" } else { "grid" },
        h: params.h,
        C_g: c_g.as_ref().map(Into::into),
        C_flat: c_flat.as_ref().map(Into::into),
    };
    emit_json(cli, &format!("{}.capacity.json", s.name), &out)?;
    Ok(ExitStatus::Pass)
}

fn mass(cli: &Cli, s: &Scenario) -> Outcome {
    let est = adm_extrapolate(MassSource::Conformal(&s.factor), &mass_radii(s), reach(s)).map_err(Failure::numerical)?;
    #[derive(Serialize)]
    struct MassOutput<'a> {
        scenario: &'a str,
        error_estimate: f64,
        estimate: &'a penrose_core::mass::MassEstimate,
    }
    let out = MassOutput { scenario: &s.name, error_estimate: est.error_estimate(), estimate: &est };
    emit_json(cli, &format!("{}.mass.json", s.name), &out)?;
    Ok(if est.non_monotone { ExitStatus::NumericalFailure } else { ExitStatus::Pass })
}

fn symmetrize(cli: &Cli, s: &Scenario) -> Outcome {
    if s.dim.n() != 3 {
        return Err(Failure::input("symmetrize needs a three-dimensional scenario"));
    }
    let flat = grid_capacity(&s.domain, &Weight::Unit, &grid_params(s)).map_err(Failure::numerical)?;
    let Potential::Grid(phi) = &flat.potential else {
        return Err(Failure::numerical("grid solve returned no grid potential"));
    };
    let bound = symmetrized_lower_bound(phi, &s.domain).map_err(Failure::numerical)?;
    if let Some(dir) = &cli.out {
        let extended = extend_into_omega(phi, DEFAULT_BOUNDARY_TOL).map_err(Failure::numerical)?;
        let result = rearrange(&extended, Some((0.0, 1.0))).map_err(Failure::numerical)?;
        let profile = output_file(dir, &format!("{}.profile.csv", s.name))?;
        let levels = output_file(dir, &format!("{}.levels.csv", s.name))?;
        result.write_csv(profile, levels).map_err(Failure::numerical)?;
    }
    #[allow(non_snake_case)]
    #[derive(Serialize)]
    struct SymmetrizeOutput<'a> {
        scenario: &'a str,
        C_flat: f64,
        bound: &'a penrose_core::capacity::SymmetrizedBound,
    }
    let out = SymmetrizeOutput { scenario: &s.name, C_flat: flat.value, bound: &bound };
    emit_json(cli, &format!("{}.symmetrize.json", s.name), &out)?;
    Ok(ExitStatus::Pass)
}

fn schwarzschild(n: usize, masses: &str) -> Outcome {
    let masses = parse_list(masses)?;
    println!(
        "{:>3} {:>10} {:>14} {:>14} {:>14} {:>14} {:>14} {:>14}",
        "n", "m", "r_h", "area", "volume", "rhs_rpi", "rhs_vol", "C_flat"
    );
    for m in masses {
        let d = SchwarzschildData::new(n, m).map_err(Failure::input)?;
        println!(
            "{:>3} {:>10} {:>14.9} {:>14.9} {:>14.9} {:>14.9} {:>14.9} {:>14.9}",
            d.n, d.m, d.r_h, d.horizon_area, d.volume, d.rhs_rpi, d.rhs_vol, d.flat_capacity
        );
    }
    Ok(ExitStatus::Pass)
}
