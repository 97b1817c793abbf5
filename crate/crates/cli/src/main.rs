use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use dmxm_core::grid::write_spinor_dump;
use dmxm_core::solver::{outer_minimize, sweep_e, SolveReport, SolverConfig};
use dmxm_core::verify::{check_solution_bounds, CheckKind, IneqResult};
use dmxm_core::{build_grid, CoulombKernel, DiracMultipliers, Error};

const SCHEMA_VERSION: u32 = 1;

const EXIT_CONFIG: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_AUDIT: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "dmxm", version, about = "Min-max solver for normalized Dirac-Poisson ground states")]
struct Cli {
    /// Worker threads for data-parallel kernels
    #[arg(long, global = true, env = "DMXM_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve at a single coupling
    Solve {
        /// Coupling constant, must lie in (0, 1/(8 pi))
        #[arg(long)]
        s: f64,
        #[command(flatten)]
        common: SolverArgs,
    },
    /// Solve at several couplings and check that the energy decreases
    Sweep {
        /// Comma-separated couplings
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.02,0.03")]
        s_list: Vec<f64>,
        #[command(flatten)]
        common: SolverArgs,
    },
    /// Randomized inequality checks
    Verify {
        /// Comma-separated subset of coulomb, kato, appendix
        #[arg(long, value_delimiter = ',', default_value = "coulomb,kato,appendix")]
        checks: Vec<String>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
        #[arg(long, default_value_t = 32)]
        grid_n: usize,
        /// Box length, defaults to 40/m
        #[arg(long)]
        box_l: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    #[arg(long, default_value_t = 32)]
    grid_n: usize,
    /// Box length, defaults to 40/m
    #[arg(long)]
    box_l: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    tol_inner: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol_outer: f64,
    #[arg(long, default_value_t = 500)]
    max_inner: usize,
    #[arg(long, default_value_t = 5000)]
    max_outer: usize,
    /// Initializer scaling parameter, defaults to 0.3 m
    #[arg(long)]
    epsilon_init: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl SolverArgs {
    fn config(&self, coupling: f64) -> SolverConfig {
        SolverConfig {
            coupling,
            mass: self.mass,
            grid_n: self.grid_n,
            box_length: self.box_l.unwrap_or(40.0 / self.mass),
            tol_inner: self.tol_inner,
            tol_outer: self.tol_outer,
            max_inner_iters: self.max_inner,
            max_outer_iters: self.max_outer,
            epsilon_init: self.epsilon_init.unwrap_or(0.3 * self.mass),
            rng_seed: self.seed,
        }
    }
}

#[derive(Serialize, Debug)]
#[serde(rename_all = "snake_case")]
enum CommandKind {
    Solve,
    Sweep,
    Verify,
}

#[derive(Serialize, Debug)]
struct RunManifest {
    schema_version: u32,
    command: CommandKind,
    config: SolverConfig,
    outputs: Vec<PathBuf>,
    started_at: u64,
    finished_at: u64,
    code_version: &'static str,
    threads: usize,
    notes: Vec<String>,
}

impl RunManifest {
    fn new(command: CommandKind, config: SolverConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command,
            config,
            outputs: Vec::new(),
            started_at: now(),
            finished_at: 0,
            code_version: env!("CARGO_PKG_VERSION"),
            threads: rayon::current_num_threads(),
            notes: Vec::new(),
        }
    }

    fn write(mut self, dir: &Path) -> anyhow::Result<()> {
        self.finished_at = now();
        write_json(&dir.join("manifest.json"), &self)
    }
}

#[derive(Serialize)]
struct ReportFile<'a> {
    schema_version: u32,
    report: &'a SolveReport,
    solution_bounds: &'a [IneqResult],
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Errors a subcommand can end with.
enum Failure {
    Solver(Error),
    Other(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Solver(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.into())
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::NotConverged { .. } | Error::LineSearch { .. } | Error::InnerNotConverged(_) => EXIT_NOT_CONVERGED,
        Error::Io(_) | Error::Dump(_) => 1,
        _ => EXIT_CONFIG,
    }
}

struct Model {
    mult: DiracMultipliers,
    kernel: CoulombKernel,
}

fn build_model(config: &SolverConfig) -> Result<Model, Failure> {
    let grid = build_grid(config.grid_n, config.box_length).map_err(|e| Error::Config(e.to_string()))?;
    Ok(Model {
        mult: DiracMultipliers::new(&grid, config.mass).map_err(|e| Error::Config(e.to_string()))?,
        kernel: CoulombKernel::new(&grid),
    })
}

fn write_solve_outputs(dir: &Path, report: &SolveReport, bounds: &[IneqResult], manifest: &mut RunManifest, tag: &str) -> anyhow::Result<()> {
    let report_path = dir.join(format!("report{tag}.json"));
    write_json(
        &report_path,
        &ReportFile {
            schema_version: SCHEMA_VERSION,
            report,
            solution_bounds: bounds,
        },
    )?;
    manifest.outputs.push(report_path);
    if let Some(psi) = &report.psi {
        let dump_path = dir.join(format!("psi{tag}.bin"));
        let file = File::create(&dump_path)?;
        write_spinor_dump(BufWriter::new(file), &psi.to_position()?)?;
        manifest.outputs.push(dump_path);
    }
    Ok(())
}

fn cmd_solve(s: f64, args: &SolverArgs) -> Result<u8, Failure> {
    let config = args.config(s);
    config.validate()?;
    let model = build_model(&config)?;
    fs::create_dir_all(&args.out)?;
    let mut manifest = RunManifest::new(CommandKind::Solve, config.clone());
    let report = outer_minimize(&model.mult, &model.kernel, &config)?;
    let bounds = check_solution_bounds(&model.mult, &model.kernel, &report)?;
    write_solve_outputs(&args.out, &report, &bounds, &mut manifest, "")?;
    manifest.write(&args.out)?;
    println!(
        "E = {:.12}  omega = {:.12}  residual = {:.3e}  outer iterations = {}",
        report.e_value, report.omega, report.residual_l2, report.outer_iters
    );
    let ok = report.passed() && bounds.iter().all(IneqResult::passed);
    Ok(if ok { 0 } else { EXIT_AUDIT })
}

fn cmd_sweep(s_list: &[f64], args: &SolverArgs) -> Result<u8, Failure> {
    if s_list.is_empty() {
        return Err(Error::Config("empty coupling list".into()).into());
    }
    let mut sorted = s_list.to_vec();
    sorted.sort_by(f64::total_cmp);
    for &s in &sorted {
        args.config(s).validate()?;
    }
    let base = args.config(sorted[0]);
    let model = build_model(&base)?;
    fs::create_dir_all(&args.out)?;
    let mut manifest = RunManifest::new(CommandKind::Sweep, base.clone());
    if sorted != s_list {
        manifest.notes.push(format!("coupling list {s_list:?} sorted to {sorted:?}"));
    }
    let result = sweep_e(&model.mult, &model.kernel, &sorted, &base)?;

    let csv_path = args.out.join("sweep.csv");
    let mut csv = BufWriter::new(File::create(&csv_path)?);
    writeln!(csv, "s,e_s,omega,residual,decrease_margin,energy_gap_margin,audits_passed")?;
    let mut audits_ok = true;
    for (i, r) in result.reports.iter().enumerate() {
        let bounds = check_solution_bounds(&model.mult, &model.kernel, r)?;
        let ok = r.passed() && bounds.iter().all(IneqResult::passed);
        audits_ok &= ok;
        let decrease = result.decrease_margins.get(i).copied().map(|d| d.to_string()).unwrap_or_default();
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.coupling,
            r.e_value,
            r.omega,
            r.residual_l2,
            decrease,
            0.5 * r.mass - r.e_value,
            ok
        )?;
        write_solve_outputs(&args.out, r, &bounds, &mut manifest, &format!("_s{}", r.coupling))?;
    }
    csv.flush()?;
    manifest.outputs.push(csv_path);
    for c in &result.doubling_checks {
        manifest.notes.push(format!("{}: margin {:e} passed {}", c.name, c.margin, c.passed));
    }
    manifest.write(&args.out)?;
    for r in &result.reports {
        println!("s = {}  e(s) = {:.12}", r.coupling, r.e_value);
    }
    let ok = audits_ok && result.monotone() && result.doubling_checks.iter().all(|c| c.passed);
    Ok(if ok { 0 } else { EXIT_AUDIT })
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(checks: &[String], trials: usize, seed: u64, mass: f64, grid_n: usize, box_l: Option<f64>, out: Option<&Path>) -> Result<u8, Failure> {
    let kinds = checks
        .iter()
        .map(|c| CheckKind::parse(c.trim()).ok_or_else(|| Error::Config(format!("unknown check '{c}'"))))
        .collect::<Result<Vec<_>, _>>()?;
    let config = SolverConfig {
        mass,
        grid_n,
        box_length: box_l.unwrap_or(40.0 / mass),
        rng_seed: seed,
        ..SolverConfig::default()
    };
    let model = build_model(&config)?;
    let mut lines = Vec::new();
    let mut failures = 0;
    for kind in kinds {
        let r = kind.run(&model.mult, &model.kernel, trials, seed)?;
        failures += r.failures;
        let line = serde_json::to_string(&r).map_err(anyhow::Error::from)?;
        println!("{line}");
        lines.push(line);
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let path = dir.join("verify.jsonl");
        fs::write(&path, lines.join("\n") + "\n")?;
        let mut manifest = RunManifest::new(CommandKind::Verify, config);
        manifest.outputs.push(path);
        manifest.notes.push(format!("trials {trials}, seed {seed}"));
        manifest.write(dir)?;
    }
    Ok(if failures == 0 { 0 } else { EXIT_AUDIT })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let result = match &cli.command {
        Command::Solve { s, common } => cmd_solve(*s, common),
        Command::Sweep { s_list, common } => cmd_sweep(s_list, common),
        Command::Verify {
            checks,
            trials,
            seed,
            mass,
            grid_n,
            box_l,
            out,
        } => cmd_verify(checks, *trials, *seed, *mass, *grid_n, *box_l, out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Solver(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
