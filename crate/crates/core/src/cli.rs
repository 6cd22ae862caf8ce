//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a tolerance check failed, 2 invalid
//! configuration or arguments, 3 I/O error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::parse_run_config;
use crate::csvio::{read_table, write_columns, ReadError};
use crate::error::Error;
use crate::lab::{run_case, run_sweep, verify_suite_with, write_sweep_csv, SweepPlan, Timing};
use crate::model::RunConfig;
use crate::record::RecordWriter;
use crate::stepper::{FluxFault, Scheme, SimState};
use crate::svg::line_chart;

pub const EXIT_OK: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "chemolab",
    version,
    about = "Radial chemotaxis-consumption lab"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configuration and write its time series and profiles.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        cells: Option<usize>,
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Run every (alpha, data) case of a sweep plan and tabulate verdicts.
    Sweep {
        #[arg(long)]
        plan: PathBuf,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        /// Write zeros in the wall_ms column so output is reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// Run the verification checks and print one CHECK line each.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Step with a deliberately broken flux update.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Render CSV columns as an SVG line chart.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Abscissa column; defaults to the first.
        #[arg(long)]
        x: Option<String>,
        /// Comma-separated columns to draw; defaults to all others.
        #[arg(long, value_delimiter = ',')]
        columns: Vec<String>,
    },
}

#[derive(Debug)]
enum Failure {
    Tolerance(String),
    Config(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Tolerance(_) => EXIT_TOLERANCE,
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Tolerance(m) | Failure::Config(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn io_failure(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn csv_failure(path: &Path) -> impl FnOnce(csv::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(io_failure(path))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(io_failure(path))
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Simulate {
            config,
            out,
            cells,
            t_end,
        } => simulate(&config, &out, cells, t_end),
        Command::Sweep {
            plan,
            out,
            workers,
            no_timing,
        } => sweep(&plan, &out, workers, no_timing),
        Command::Verify {
            config,
            inject_fault,
        } => verify(&config, inject_fault),
        Command::Plot {
            input,
            output,
            x,
            columns,
        } => plot(&input, &output, x.as_deref(), &columns),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = read_text(path)?;
    parse_run_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn write_snapshot(path: &Path, state: &SimState) -> Result<(), Failure> {
    let grid = state.u().grid();
    write_columns(
        create(path)?,
        &[
            ("r", grid.centers()),
            ("value", state.u().values()),
            ("v", state.v().values()),
        ],
    )
    .map_err(io_failure(path))
}

fn simulate(
    config_path: &Path,
    out: &Path,
    cells: Option<usize>,
    t_end: Option<f64>,
) -> Result<(), Failure> {
    let mut config = load_config(config_path)?;
    if let Some(c) = cells {
        config.cells = c;
    }
    if let Some(t) = t_end {
        config.t_end = t;
    }
    config.validate()?;
    let initial = SimState::new(&config)?;

    fs::create_dir_all(out).map_err(io_failure(out))?;
    let report = run_case(&config)?;

    let series = out.join("timeseries.csv");
    let mut w =
        RecordWriter::new(create(&series)?, &config.lp_exponents).map_err(csv_failure(&series))?;
    for r in &report.records {
        w.write(r).map_err(csv_failure(&series))?;
    }
    w.finish().map_err(io_failure(&series))?;
    write_snapshot(&out.join("snapshot_initial.csv"), &initial)?;
    if report.steps > 0 {
        write_snapshot(&out.join("snapshot_final.csv"), &report.final_state)?;
    }

    let mut text = String::new();
    let _ = writeln!(text, "verdict {}", report.verdict.label());
    let _ = writeln!(text, "detail {}", report.verdict);
    let _ = writeln!(text, "status {:?}", report.status);
    let _ = writeln!(text, "terminal_t {:e}", report.terminal_t);
    let _ = writeln!(text, "steps {}", report.steps);
    let _ = writeln!(text, "initial_linf {:e}", report.initial_linf);
    let _ = writeln!(text, "peak_linf {:e}", report.peak_linf);
    let _ = writeln!(
        text,
        "mass_drift {:e}",
        report.final_state.mass() - report.final_state.initial_mass()
    );
    let _ = writeln!(text, "wall_ms {:.3}", report.wall.as_secs_f64() * 1e3);
    let report_path = out.join("report.txt");
    fs::write(&report_path, &text).map_err(io_failure(&report_path))?;
    print!("{text}");

    if report.verdict.is_tolerance_failure() {
        return Err(Failure::Tolerance(report.verdict.to_string()));
    }
    Ok(())
}

fn sweep(
    plan_path: &Path,
    out: &Path,
    workers: Option<usize>,
    no_timing: bool,
) -> Result<(), Failure> {
    let text = read_text(plan_path)?;
    let mut plan = SweepPlan::parse(&text)
        .map_err(|e| Failure::Config(format!("{}: {e}", plan_path.display())))?;
    if let Some(w) = workers {
        if w == 0 {
            return Err(Failure::Config("--workers must be >= 1".into()));
        }
        plan.workers = w;
    }
    let rows = run_sweep(&plan)?;
    let timing = if no_timing {
        Timing::Omitted
    } else {
        Timing::Measured
    };
    write_sweep_csv(create(out)?, &rows, timing).map_err(csv_failure(out))?;

    let mut failed = 0;
    for r in &rows {
        println!("alpha={} data={} {}", r.alpha, r.data_id, r.verdict);
        failed += usize::from(r.verdict.is_tolerance_failure());
    }
    if failed > 0 {
        return Err(Failure::Tolerance(format!(
            "{failed} case(s) failed a tolerance check"
        )));
    }
    Ok(())
}

fn verify(config_path: &Path, inject_fault: bool) -> Result<(), Failure> {
    let config = load_config(config_path)?;
    let scheme = Scheme {
        fault: inject_fault.then_some(FluxFault::OneSidedSignFlip),
    };
    let ledger = verify_suite_with(&config, scheme)?;
    print!("{ledger}");
    let failed: Vec<&str> = ledger.failures().map(|c| c.name.as_str()).collect();
    if !failed.is_empty() {
        return Err(Failure::Tolerance(format!(
            "failed checks: {}",
            failed.join(", ")
        )));
    }
    Ok(())
}

fn plot(input: &Path, output: &Path, x: Option<&str>, columns: &[String]) -> Result<(), Failure> {
    let file = File::open(input).map_err(io_failure(input))?;
    let table = read_table(file).map_err(|e| match e {
        ReadError::Csv(ref c) if c.is_io_error() => {
            Failure::Io(format!("{}: {e}", input.display()))
        }
        other => Failure::Config(format!("{}: {other}", input.display())),
    })?;
    let x_name = match x {
        Some(name) => name.to_owned(),
        None => table
            .headers
            .first()
            .cloned()
            .ok_or_else(|| Failure::Config(format!("{}: no columns", input.display())))?,
    };
    let xs = table
        .column(&x_name)
        .ok_or_else(|| Failure::Config(format!("no column `{x_name}` in {}", input.display())))?;
    let names: Vec<String> = if columns.is_empty() {
        table
            .headers
            .iter()
            .filter(|h| **h != x_name)
            .cloned()
            .collect()
    } else {
        columns.to_vec()
    };
    let series = names
        .iter()
        .map(|name| {
            table
                .column(name)
                .map(|c| (name.clone(), c.to_vec()))
                .ok_or_else(|| {
                    Failure::Config(format!("no column `{name}` in {}", input.display()))
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let svg = line_chart(&x_name, xs, &series);
    let mut w = create(output)?;
    w.write_all(svg.as_bytes())
        .and_then(|_| w.flush())
        .map_err(io_failure(output))
}
