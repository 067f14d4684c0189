//! Command-line front end. Every command writes CSV; diagnostics go to the
//! error stream.

pub mod config;
pub mod csv;

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use self::config::{ConfigError, RunConfig};
use self::csv::{num, write_row};
use crate::bifurcation::{run_sweep, SweepSpec};
use crate::equilibria::{
    axial, coexistence_default, pest_free, susceptible_free, Equilibrium, SusceptibleFree,
};
use crate::error::Error;
use crate::integrate::{simulate, TimeGrid};
use crate::model::{Components, State};
use crate::optimal_control::{solve, SweepOptions};
use crate::stability::{classify, hopf_scan, r0, StabilityReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BLOW_UP: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

const SIMULATION_HORIZON: f64 = 2000.0;
const SIMULATION_STEP: f64 = 0.05;
const CONTROL_HORIZON: f64 = 100.0;
const CONTROL_STEP: f64 = 0.01;

#[derive(Debug, Parser)]
#[command(name = "pestaware", version, about = "Crop-pest-awareness dynamics and optimal control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Configuration file with `key = value` lines.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Final time in days.
    #[arg(long)]
    pub tf: Option<f64>,
    /// Integration step in days.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Output CSV file; standard output when omitted or `-`.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Write the effective configuration to this file.
    #[arg(long, value_name = "FILE")]
    pub emit_config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trajectory of the free system.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// All steady states with their stability verdicts.
    Equilibria {
        #[command(flatten)]
        common: Common,
    },
    /// Characteristic polynomials, Routh-Hurwitz margins and eigenvalues;
    /// optionally a Hopf scan in alpha.
    Stability {
        #[command(flatten)]
        common: Common,
        /// Start of the alpha range for a Hopf scan.
        #[arg(long, requires = "hopf_to")]
        hopf_from: Option<f64>,
        /// End of the alpha range for a Hopf scan.
        #[arg(long, requires = "hopf_from")]
        hopf_to: Option<f64>,
        /// Number of alpha samples in the Hopf scan.
        #[arg(long, default_value_t = 101)]
        hopf_samples: usize,
    },
    /// Tail extrema of long runs over a range of one parameter.
    Bifurcate {
        #[command(flatten)]
        common: Common,
        /// Parameter to sweep.
        #[arg(long, default_value = "alpha")]
        parameter: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        /// Number of values, both ends included.
        #[arg(long, default_value_t = 11)]
        steps: usize,
        /// Share of the horizon discarded before taking extrema.
        #[arg(long, default_value_t = crate::bifurcation::DEFAULT_TRANSIENT_FRACTION)]
        transient: f64,
    },
    /// Optimal controls by the forward-backward sweep.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Per-iteration objective and control change; defaults to
        /// `<out>.history.csv`, or follows the trajectory on standard output.
        #[arg(long, value_name = "FILE")]
        history: Option<PathBuf>,
        /// Pin u1 to zero.
        #[arg(long)]
        freeze_u1: bool,
        /// Pin u2 to zero.
        #[arg(long)]
        freeze_u2: bool,
        #[arg(long, default_value_t = 5000)]
        max_iterations: usize,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
        /// Relaxation weight of the new control iterate.
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Model(#[from] Error),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("forward-backward sweep did not converge after {0} iterations")]
    NotConverged(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Model(Error::InvalidParameter { .. } | Error::Contract(_)) => EXIT_CONFIG,
            Self::Model(Error::BlowUp { .. } | Error::NonFinite(_) | Error::NegativeState { .. }) => {
                EXIT_BLOW_UP
            }
            Self::NotConverged(_) => EXIT_NOT_CONVERGED,
            _ => EXIT_FAILURE,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn load_config(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path).map_err(|e| {
            ConfigError::Invalid(format!("cannot read {}: {e}", path.display()))
        })?;
        cfg.merge_str(&text)?;
    }
    for a in &common.overrides {
        cfg.apply_assignment(a)?;
    }
    if let Some(tf) = common.tf {
        cfg.tf = Some(tf);
    }
    if let Some(dt) = common.dt {
        cfg.dt = Some(dt);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Resolved horizon and step; also writes the effective configuration if asked.
fn resolve_grid(common: &Common, cfg: &RunConfig, tf: f64, dt: f64) -> CliResult<TimeGrid> {
    let (tf, dt) = (cfg.tf.unwrap_or(tf), cfg.dt.unwrap_or(dt));
    if let Some(path) = &common.emit_config {
        fs::write(path, cfg.emit(tf, dt))?;
    }
    Ok(TimeGrid::with_step(0.0, tf, dt)?)
}

fn is_stdout(path: &Option<PathBuf>) -> bool {
    path.as_deref().is_none_or(|p| p == Path::new("-"))
}

fn open_out<'a>(path: &Option<PathBuf>, stdout: &'a mut dyn Write) -> CliResult<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) if p != Path::new("-") => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        _ => Box::new(stdout),
    })
}

fn state_cells(s: &State) -> Vec<String> {
    s.to_array().iter().map(|v| num(*v)).collect()
}

fn cmd_simulate(common: &Common, out: &mut dyn Write) -> CliResult<()> {
    let cfg = load_config(common)?;
    let grid = resolve_grid(common, &cfg, SIMULATION_HORIZON, SIMULATION_STEP)?;
    let traj = simulate(&cfg.params, cfg.initial, &grid)?;
    write_row(out, &["t", "X", "S", "I", "A"])?;
    for (t, s) in grid.times().zip(&traj.nodes) {
        let mut row = vec![num(t)];
        row.extend(state_cells(s));
        write_row(out, &row)?;
    }
    Ok(())
}

fn equilibrium_row(report: &StabilityReport, r0: Option<f64>, note: &str) -> Vec<String> {
    let e = &report.equilibrium;
    let mut row = vec![e.kind.to_string()];
    row.extend(state_cells(&e.point));
    row.push(num(e.residual_norm));
    row.push(report.verdict.to_string());
    row.push(num(report.eigen.max_real));
    row.push(r0.map(num).unwrap_or_default());
    row.push(note.to_string());
    row
}

fn cmd_equilibria(common: &Common, out: &mut dyn Write) -> CliResult<()> {
    let cfg = load_config(common)?;
    if common.emit_config.is_some() {
        resolve_grid(common, &cfg, SIMULATION_HORIZON, SIMULATION_STEP)?;
    }
    let p = &cfg.params;
    write_row(
        out,
        &["kind", "X", "S", "I", "A", "residual", "verdict", "max_real", "R0", "note"],
    )?;
    write_row(out, &equilibrium_row(&classify(p, &axial(p)?), None, ""))?;
    let threshold = r0(p).ok();
    write_row(out, &equilibrium_row(&classify(p, &pest_free(p)?), threshold, ""))?;
    let blank = |kind: &str, note: &str| {
        let mut row = vec![kind.to_string()];
        row.extend(std::iter::repeat_n(String::new(), 8));
        row.push(note.to_string());
        row
    };
    match susceptible_free(p) {
        Ok(sf) => match sf.equilibrium() {
            Some(e) => write_row(out, &equilibrium_row(&classify(p, e), None, ""))?,
            None => {
                let note = match sf {
                    SusceptibleFree::Nonexistent {
                        infected_mortality,
                        threshold,
                    } => format!(
                        "nonexistent: d+delta={} >= m2*phi*alpha*K/(c+K)={}",
                        num(infected_mortality),
                        num(threshold)
                    ),
                    SusceptibleFree::Exists(_) => unreachable!(),
                };
                write_row(out, &blank("SusceptibleFree", &note))?
            }
        },
        Err(e) => write_row(out, &blank("SusceptibleFree", &format!("degenerate: {e}")))?,
    }
    let coexistence = coexistence_default(p)?;
    if coexistence.is_empty() {
        write_row(out, &blank("Coexistence", "none admissible"))?;
    }
    for e in &coexistence {
        write_row(out, &equilibrium_row(&classify(p, e), None, ""))?;
    }
    Ok(())
}

fn existing_equilibria(cfg: &RunConfig) -> CliResult<Vec<Equilibrium>> {
    let p = &cfg.params;
    let mut list = vec![axial(p)?, pest_free(p)?];
    if let Ok(sf) = susceptible_free(p) {
        list.extend(sf.equilibrium().copied());
    }
    list.extend(coexistence_default(p)?);
    Ok(list)
}

fn cmd_stability(
    common: &Common,
    hopf: Option<(f64, f64)>,
    samples: usize,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<()> {
    let cfg = load_config(common)?;
    if common.emit_config.is_some() {
        resolve_grid(common, &cfg, SIMULATION_HORIZON, SIMULATION_STEP)?;
    }
    let p = &cfg.params;
    let mut header: Vec<String> = ["kind", "X", "S", "I", "A", "verdict", "max_real", "C1", "C2", "C3", "C4"]
        .map(String::from)
        .to_vec();
    header.extend(["rh_C1", "rh_C2", "rh_C3", "rh_C4", "rh_C1C2-C3", "rh_last"].map(String::from));
    for i in 1..=4 {
        header.push(format!("re{i}"));
        header.push(format!("im{i}"));
    }
    write_row(out, &header)?;
    for e in existing_equilibria(&cfg)? {
        let rep = classify(p, &e);
        let mut row = vec![e.kind.to_string()];
        row.extend(state_cells(&e.point));
        row.push(rep.verdict.to_string());
        row.push(num(rep.eigen.max_real));
        row.extend(rep.char_poly.coefficients().map(num));
        row.extend(rep.routh_hurwitz.margins().map(num));
        for z in rep.eigen.eigenvalues {
            row.push(num(z.re));
            row.push(num(z.im));
        }
        write_row(out, &row)?;
    }
    if let Some(range) = hopf {
        let scan = hopf_scan(p, range, samples)?;
        if !scan.skipped.is_empty() {
            writeln!(err, "hopf scan: no coexistence point at {} of {samples} samples", scan.skipped.len())?;
        }
        writeln!(out)?;
        write_row(
            out,
            &["alpha_star", "psi_lo", "psi_hi", "slope", "C2", "C3", "C4", "C1C2-C3", "frequency", "accepted"],
        )?;
        for c in &scan.candidates {
            let mut row = vec![
                num(c.alpha_star),
                num(c.psi_values.0),
                num(c.psi_values.1),
                num(c.transversality_slope),
            ];
            row.extend(c.side_conditions.map(num));
            row.push(num(c.frequency));
            row.push(c.accepted.to_string());
            write_row(out, &row)?;
        }
    }
    Ok(())
}

fn cmd_bifurcate(
    common: &Common,
    parameter: &str,
    range: (f64, f64),
    steps: usize,
    transient: f64,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<()> {
    let cfg = load_config(common)?;
    let grid = resolve_grid(common, &cfg, SIMULATION_HORIZON, SIMULATION_STEP)?;
    if steps == 0 {
        return Err(ConfigError::Invalid("steps must be at least 1".into()).into());
    }
    let (from, to) = range;
    let values = if steps == 1 {
        vec![from]
    } else {
        (0..steps)
            .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
            .collect()
    };
    let spec = SweepSpec {
        parameter: parameter.to_string(),
        values,
        horizon: grid.end(),
        dt: cfg.dt.unwrap_or(SIMULATION_STEP),
        transient_fraction: transient,
        initial_state: cfg.initial,
    };
    spec.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let rows = run_sweep(&cfg.params, &spec)?;
    write_row(
        out,
        &[
            parameter, "X_min", "X_max", "S_min", "S_max", "I_min", "I_max", "A_min", "A_max", "status",
            "E1", "Estar",
        ],
    )?;
    for row in &rows {
        let mut cells = vec![num(row.value)];
        match &row.tail {
            Some(t) => {
                for i in 0..4 {
                    cells.push(num(t.min[i]));
                    cells.push(num(t.max[i]));
                }
            }
            None => cells.extend(std::iter::repeat_n(String::new(), 8)),
        }
        match &row.failure {
            Some(f) => {
                writeln!(err, "{parameter} = {}: {f}", row.value)?;
                cells.push("failed".into());
            }
            None => cells.push("ok".into()),
        }
        cells.push(row.pest_free.map(|v| v.to_string()).unwrap_or_default());
        let estar: Vec<String> = row.coexistence.iter().map(|(_, v)| v.to_string()).collect();
        cells.push(if estar.is_empty() { "none".into() } else { estar.join(";") });
        write_row(out, &cells)?;
    }
    Ok(())
}

struct OptimizeArgs {
    history: Option<PathBuf>,
    freeze_u1: bool,
    freeze_u2: bool,
    max_iterations: usize,
    tolerance: f64,
    theta: f64,
}

fn history_path(common: &Common, args: &OptimizeArgs) -> Option<PathBuf> {
    if let Some(h) = &args.history {
        return Some(h.clone());
    }
    if is_stdout(&common.out) {
        return None;
    }
    let out = common.out.as_ref()?;
    let stem = out.file_stem()?.to_string_lossy().into_owned();
    Some(out.with_file_name(format!("{stem}.history.csv")))
}

fn cmd_optimize(
    common: &Common,
    args: &OptimizeArgs,
    stdout: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<()> {
    let cfg = load_config(common)?;
    let grid = resolve_grid(common, &cfg, CONTROL_HORIZON, CONTROL_STEP)?;
    let mut opts = SweepOptions::new(grid);
    opts.max_iterations = args.max_iterations;
    opts.tolerance = args.tolerance;
    opts.relaxation_theta = args.theta;
    opts.freeze_pesticide = args.freeze_u1;
    opts.freeze_campaign = args.freeze_u2;
    opts.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let sol = solve(&cfg.params, &cfg.weights, cfg.initial, &opts)?;

    let to_stdout = is_stdout(&common.out);
    {
        let mut out = open_out(&common.out, stdout)?;
        write_row(
            &mut out,
            &["t", "X", "S", "I", "A", "u1", "u2", "p1", "p2", "p3", "p4"],
        )?;
        for (((t, s), u), p) in grid
            .times()
            .zip(&sol.states.nodes)
            .zip(&sol.controls)
            .zip(&sol.costates)
        {
            let mut row = vec![num(t)];
            row.extend(state_cells(s));
            row.push(num(u.pesticide));
            row.push(num(u.campaign));
            row.extend(p.to_array().map(num));
            write_row(&mut out, &row)?;
        }
        out.flush()?;
    }
    let history = history_path(common, args);
    let mut hist: Box<dyn Write> = match &history {
        Some(p) if p != Path::new("-") => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        _ => {
            if to_stdout {
                writeln!(stdout)?;
            }
            Box::new(&mut *stdout)
        }
    };
    write_row(&mut hist, &["iter", "J", "control_change"])?;
    for (i, (j, dc)) in sol.objective_history.iter().zip(&sol.change_history).enumerate() {
        write_row(&mut hist, &[(i + 1).to_string(), num(*j), num(*dc)])?;
    }
    hist.flush()?;
    drop(hist);
    writeln!(
        err,
        "iterations {}, J = {}, stationarity residual = {:e}",
        sol.iterations_used, sol.objective, sol.stationarity_residual
    )?;
    if !sol.converged {
        return Err(CliError::NotConverged(sol.iterations_used));
    }
    Ok(())
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Optimize {
            common,
            history,
            freeze_u1,
            freeze_u2,
            max_iterations,
            tolerance,
            theta,
        } => {
            let args = OptimizeArgs {
                history: history.clone(),
                freeze_u1: *freeze_u1,
                freeze_u2: *freeze_u2,
                max_iterations: *max_iterations,
                tolerance: *tolerance,
                theta: *theta,
            };
            cmd_optimize(common, &args, stdout, err)
        }
        Command::Simulate { common } => with_out(common, stdout, |o| cmd_simulate(common, o)),
        Command::Equilibria { common } => with_out(common, stdout, |o| cmd_equilibria(common, o)),
        Command::Stability {
            common,
            hopf_from,
            hopf_to,
            hopf_samples,
        } => {
            let hopf = hopf_from.zip(*hopf_to);
            with_out(common, stdout, |o| cmd_stability(common, hopf, *hopf_samples, o, err))
        }
        Command::Bifurcate {
            common,
            parameter,
            from,
            to,
            steps,
            transient,
        } => with_out(common, stdout, |o| {
            cmd_bifurcate(common, parameter, (*from, *to), *steps, *transient, o, err)
        }),
    }
}

fn with_out<F>(common: &Common, stdout: &mut dyn Write, body: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> CliResult<()>,
{
    let mut out = open_out(&common.out, stdout)?;
    let result = body(&mut out);
    out.flush()?;
    result
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&cli, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
