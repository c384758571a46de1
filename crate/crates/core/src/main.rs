use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::warn;

use filmnet::config::{self, RunSpec};
use filmnet::diagnostics::{self, DecayStatus};
use filmnet::error::{ConfigError, Error, SolverError};
use filmnet::operators;
use filmnet::output::{self, DiagnosticsMeta, DirectoryOutput};
use filmnet::spectral::{self, EdgeClass};
use filmnet::stepper;

const SCHEMA_HELP: &str = "\
Config files are TOML:

  seed = 0                      # optional
  [graph]
  builtin = \"star3\"             # star3 | cycle4 | paper-example-8
  # or: vertices = [..], boundary = [..], [[graph.edges]] tail/head/length/weight
  [cells]
  default = 128                 # optional per-edge overrides: e1 = 64, ...
  [solver]                      # n, eps, theta, dt_init, dt_min, dt_max,
                                # adapt_target, linear_tol, t_end, steady_tol,
                                # snapshot = { steps = 100 } | { time = 0.1 }, ...
  [initial]
  default = { kind = \"droplet\", center = 1.0, width = 0.3, height = 1.0, base = 0.05 }
  # kinds: constant{value} droplet{center,width,height,base} linear{a,b}
  #        random{base,amplitude,seed?}; per-edge overrides: e2 = { ... }
  [output]
  dir = \"out/star3\"

Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 i/o error.";

#[derive(Parser)]
#[command(name = "filmnet", version, about = "Thin-film flow on metric graphs", after_help = SCHEMA_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write snapshots and diagnostics.
    Run {
        config: PathBuf,
        /// Also write the assembled operators as triplet files.
        #[arg(long)]
        dump_operators: bool,
        /// Override the output directory of the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the lowest eigenvalues and compare them with closed forms.
    Eigen {
        config: PathBuf,
        #[arg(long, default_value_t = 10)]
        modes: usize,
    },
    /// Check the energy decay bound on a diagnostics file.
    CheckDecay {
        diagnostics: PathBuf,
        #[arg(long)]
        n: f64,
    },
    /// Validate a config and report the graph checks.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            dump_operators,
            output,
        } => cmd_run(&config, dump_operators, output),
        Command::Eigen { config, modes } => cmd_eigen(&config, modes),
        Command::CheckDecay { diagnostics, n } => cmd_check_decay(&diagnostics, n),
        Command::Validate { config } => cmd_validate(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load(path: &Path) -> Result<RunSpec, Error> {
    let text = fs::read_to_string(path)?;
    let spec = config::parse_config(&text)?;
    for w in spec.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(spec)
}

fn cmd_run(path: &Path, dump_operators: bool, output: Option<PathBuf>) -> Result<(), Error> {
    let spec = load(path)?;
    let setup = spec.setup()?;
    let grid = &setup.grid;
    let dir = output.unwrap_or_else(|| spec.output_dir.clone());
    let hash = spec.config_hash();
    let meta = DiagnosticsMeta {
        n: spec.solver.n,
        eps: spec.solver.eps,
        total_measure: grid.total_measure(),
        config_hash: hash.clone(),
    };
    let mut out = DirectoryOutput::create(&dir, grid, &meta)?;
    fs::write(dir.join(output::CONFIG_COPY), spec.to_toml())?;
    if dump_operators {
        dump(&dir, &spec, grid, &setup.state0.u).map_err(|e| partial(&dir, e))?;
    }

    let summary = stepper::run(grid, setup.state0, &spec.solver, &mut out).map_err(|e| partial(&dir, e))?;
    let snapshots = out.snapshots_written;
    out.finish().map_err(|e| partial(&dir, e))?;

    let first = summary.records.first().expect("initial record");
    let last = summary.records.last().expect("final record");
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "output_dir,{}", dir.display())?;
    writeln!(stdout, "config_hash,{hash}")?;
    writeln!(stdout, "accepted_steps,{}", summary.final_state.step)?;
    writeln!(stdout, "rejected_steps,{}", summary.rejected_steps)?;
    writeln!(stdout, "final_t,{:.6e}", summary.final_state.t)?;
    writeln!(stdout, "steady,{}", summary.steady)?;
    writeln!(stdout, "steady_value,{:.16e}", summary.steady_value)?;
    writeln!(
        stdout,
        "mass_rel_drift,{:.3e}",
        (last.mass - first.mass).abs() / first.mass.abs().max(f64::MIN_POSITIVE)
    )?;
    writeln!(stdout, "energy_violations,{}", summary.energy_violations.len())?;
    writeln!(stdout, "clamp_events,{}", summary.clamp_events)?;
    writeln!(stdout, "snapshots,{snapshots}")?;
    if summary.hit_max_steps {
        warn!("run stopped at max_steps before t_end or steady state");
    }
    Ok(())
}

/// Marks the output directory as partial when a run aborts.
fn partial(dir: &Path, e: Error) -> Error {
    if let Err(io) = output::mark_partial(dir, &e.to_string()) {
        warn!("could not write partial-output marker: {io}");
    }
    e
}

fn dump(dir: &Path, spec: &RunSpec, grid: &filmnet::GraphGrid, u0: &[f64]) -> Result<(), Error> {
    let ops = dir.join("operators");
    fs::create_dir_all(&ops)?;
    let lap = operators::assemble_neg_laplacian(grid);
    lap.write_triplets(BufWriter::new(File::create(ops.join("neg_laplacian.txt"))?))?;
    let mobility = spec.solver.mobility().map_err(Error::Solver)?;
    let b = operators::assemble_mobility_flux_div(grid, u0, &mobility)?;
    b.write_triplets(BufWriter::new(File::create(ops.join("mobility_flux_div_t0.txt"))?))?;
    let mut m = BufWriter::new(File::create(ops.join("measure.txt"))?);
    for (i, w) in grid.measure().iter().enumerate() {
        writeln!(m, "{i} {w:.16e}")?;
    }
    m.flush()?;
    Ok(())
}

fn cmd_eigen(path: &Path, modes: usize) -> Result<(), Error> {
    let spec = load(path)?;
    let setup = spec.setup()?;
    let grid = &setup.grid;
    if modes == 0 {
        return Err(ConfigError::semantic("--modes", "must be at least 1").into());
    }
    let pairs = spectral::graph_laplacian_eigen(grid, modes)?;
    let mut out = io::stdout().lock();
    writeln!(out, "index,lambda,residual")?;
    for (i, p) in pairs.iter().enumerate() {
        writeln!(
            out,
            "{i},{:.12e},{:.3e}",
            p.lambda,
            spectral::eigen_residual(grid, p.lambda, &p.phi)
        )?;
    }
    let top = pairs.last().map_or(0.0, |p| p.lambda);
    let classes = [EdgeClass::Pendant, EdgeClass::CycleLong, EdgeClass::CycleShort];
    let rows = spectral::compare_with_analytic(&pairs, &classes, modes)?;
    writeln!(out)?;
    writeln!(out, "class,mode,analytic,computed,rel_error")?;
    for r in rows.iter().filter(|r| r.analytic <= top * 1.05) {
        writeln!(
            out,
            "{},{},{:.12e},{:.12e},{:.3e}",
            r.class.name(),
            r.mode,
            r.analytic,
            r.computed,
            r.rel_error
        )?;
    }
    Ok(())
}

fn cmd_check_decay(path: &Path, n: f64) -> Result<(), Error> {
    let (meta, records) = output::read_diagnostics(BufReader::new(File::open(path)?))?;
    if (meta.n - n).abs() > 1e-12 * n.abs().max(1.0) {
        return Err(ConfigError::semantic(
            "--n",
            format!("diagnostics were recorded with n = {}, got --n {n}", meta.n),
        )
        .into());
    }
    let report = diagnostics::decay_bound_check(&records, n);
    let mut out = io::stdout().lock();
    let status = match report.status {
        DecayStatus::Pass => "pass".to_string(),
        DecayStatus::Violation { index, t, energy, bound } => {
            format!("violation at row {index} (t = {t:.6e}): E = {energy:.6e} > bound {bound:.6e} (+5%)")
        }
        DecayStatus::InsufficientData => "insufficient data (fewer than 3 records)".into(),
        DecayStatus::OutOfScope => "out of derivation scope (n outside [1, 2])".into(),
    };
    writeln!(out, "status,{status}")?;
    writeln!(out, "records,{}", records.len())?;
    writeln!(out, "C,{:.16e}", report.c_const)?;
    writeln!(out, "E0,{:.16e}", report.e0)?;
    writeln!(out, "max_ratio,{:.6}", report.max_ratio)?;
    match report.decay_exponent {
        Some(p) => writeln!(out, "decay_exponent,{p:.4}")?,
        None => writeln!(out, "decay_exponent,")?,
    }
    if let DecayStatus::Violation { t, .. } = report.status {
        return Err(SolverError::CheckFailed(format!("energy decay bound violated at t = {t:.6e}")).into());
    }
    Ok(())
}

fn cmd_validate(path: &Path) -> Result<(), Error> {
    let spec = load(path)?;
    let report = filmnet::graph::validate(&spec.graph_spec());
    let mut out = io::stdout().lock();
    for c in &report.checks {
        writeln!(out, "{},{}", c.name, if c.passed { "pass" } else { "fail" })?;
    }
    writeln!(out, "config_hash,{}", spec.config_hash())?;
    Ok(())
}
