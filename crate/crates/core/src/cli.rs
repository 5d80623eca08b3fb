//! Command-line front end. Exit codes: 0 success, 1 usage or validation error, 2 numerical failure.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::analysis::{certify_stability, solve_equilibrium, theorem2_bounds};
use crate::error::{Error, Result};
use crate::grid::build_laplacian;
use crate::io::{
    load_scenario_with, read_trajectory, to_document, write_plot_data, write_sweep, write_trajectory, BoundsDoc,
    CertificateDoc, EquilibriumDoc, Figure, LoadedScenario, SweepRow,
};
use crate::sim::{simulate, Model};
use crate::Scenario;

/// Settling threshold on `‖ẋ‖_∞` used for the simulate verdict.
const SETTLED_RATE: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "mtdc", version, about = "Decentralized frequency reserve sharing over MTDC grids")]
struct Cli {
    /// Warn about unknown scenario keys instead of rejecting them.
    #[arg(long, global = true)]
    lax: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the scenario and write the trajectory CSV.
    Simulate {
        scenario: PathBuf,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the model from the scenario.
        #[arg(long)]
        model: Option<ModelArg>,
        /// Also run the nonlinear model and report the largest voltage difference.
        #[arg(long)]
        compare: bool,
    },
    /// Steady state for a disturbance (default: the last one in the schedule).
    Equilibrium {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        pm: Option<Vec<f64>>,
    },
    /// Check the Lyapunov certificate and the spectrum of the closed loop.
    Certify { scenario: PathBuf },
    /// Steady-state error bounds for uniform gains.
    Bounds {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        pm: Option<Vec<f64>>,
    },
    /// Certificate and bounds over a range of one uniform parameter.
    Sweep {
        scenario: PathBuf,
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        pm: Option<Vec<f64>>,
    },
    /// Two-column series from a trajectory CSV.
    Plotdata {
        csv: PathBuf,
        #[arg(long)]
        figure: FigureArg,
        /// Only this node (1-based).
        #[arg(long)]
        node: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FigureArg {
    Freq,
    Gen,
    Inj,
    Volt,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepParam {
    KOmega,
    KDroop,
    KV,
    Inertia,
    Capacitance,
    VNom,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::KOmega => "k_omega",
            SweepParam::KDroop => "k_droop",
            SweepParam::KV => "k_v",
            SweepParam::Inertia => "inertia",
            SweepParam::Capacitance => "capacitance",
            SweepParam::VNom => "v_nom",
        }
    }

    fn apply(self, scenario: &mut Scenario, value: f64) {
        let p = &mut scenario.params;
        match self {
            SweepParam::KOmega => p.k_omega.fill(value),
            SweepParam::KDroop => p.k_droop.fill(value),
            SweepParam::KV => p.k_v.fill(value),
            SweepParam::Inertia => p.inertia.fill(value),
            SweepParam::Capacitance => p.capacitance.fill(value),
            SweepParam::VNom => p.v_nom = value,
        }
    }
}

/// Runs the CLI on process stdout/stderr.
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs the CLI with explicit output streams.
pub fn run_cli_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn stdout_error(source: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source,
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(stdout_error)
}

fn load(path: &PathBuf, lax: bool) -> Result<LoadedScenario> {
    load_scenario_with(path, !lax)
}

/// `--pm` if given, else the disturbance in force at the end of the schedule.
fn disturbance_for(scenario: &Scenario, pm: &Option<Vec<f64>>) -> Result<DVector<f64>> {
    let n = scenario.params.n();
    match pm {
        Some(values) if values.len() != n => Err(Error::DimensionMismatch {
            what: "--pm",
            expected: n,
            found: values.len(),
        }),
        Some(values) if values.iter().any(|x| !x.is_finite()) => Err(Error::invalid("--pm", None, "must be finite")),
        Some(values) => Ok(DVector::from_column_slice(values)),
        None => Ok(scenario.disturbance.at(scenario.sim.t_end).clone()),
    }
}

fn require_explicit_k_v(loaded: &LoadedScenario) -> Result<()> {
    if loaded.k_v_explicit {
        Ok(())
    } else {
        Err(Error::invalid(
            "params.k_v",
            None,
            "bounds depend on the voltage gain; set it explicitly in the scenario",
        ))
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Simulate {
            scenario,
            out: path,
            model,
            compare,
        } => {
            let mut sc = load(scenario, cli.lax)?.scenario;
            if let Some(m) = model {
                sc.sim.model = match m {
                    ModelArg::Linear => Model::Linear,
                    ModelArg::Nonlinear => Model::Nonlinear,
                };
            }
            let traj = simulate(&sc)?;
            let settled = traj.rate.last().is_some_and(|&r| r < SETTLED_RATE);
            let summary = format!(
                "samples = {}\nsteps = {} accepted, {} rejected\nfinal_rate = {:e}\nsettling_time_s = {}\n",
                traj.len(),
                traj.stats.accepted,
                traj.stats.rejected,
                traj.rate.last().copied().unwrap_or(0.0),
                traj.settling_time(SETTLED_RATE).map_or("none".to_string(), |t| t.to_string()),
            );
            let comparison = if *compare {
                let mut other = sc.clone();
                other.sim.model = match sc.sim.model {
                    Model::Linear => Model::Nonlinear,
                    Model::Nonlinear => Model::Linear,
                };
                let other_traj = simulate(&other)?;
                Some(voltage_comparison(&sc, &traj, &other_traj))
            } else {
                None
            };
            let verdict = format!("VERDICT: {}\n", if settled { "SETTLED" } else { "NOT_SETTLED" });
            match path {
                Some(p) => {
                    let file = fs::File::create(p).map_err(|source| Error::Io {
                        path: p.clone(),
                        source,
                    })?;
                    write_trajectory(&traj, std::io::BufWriter::new(file))?;
                    emit(out, &summary)?;
                    if let Some(c) = &comparison {
                        emit(out, c)?;
                    }
                    emit(out, &verdict)?;
                }
                None => {
                    write_trajectory(&traj, &mut *out)?;
                    log::info!("{}", summary.trim_end().replace('\n', "; "));
                    if let Some(c) = &comparison {
                        log::info!("{}", c.trim_end());
                    }
                    log::info!("{}", verdict.trim_end());
                }
            }
            Ok(())
        }
        Command::Equilibrium { scenario, pm } => {
            let sc = load(scenario, cli.lax)?.scenario;
            let p_m = disturbance_for(&sc, pm)?;
            let lap = build_laplacian(&sc.topology)?;
            let eq = solve_equilibrium(&sc.params, &lap, &p_m)?;
            emit(out, &to_document(&EquilibriumDoc::new(&eq, &p_m))?)
        }
        Command::Certify { scenario } => {
            let sc = load(scenario, cli.lax)?.scenario;
            let lap = build_laplacian(&sc.topology)?;
            let report = certify_stability(&sc.params, &lap)?;
            emit(out, &to_document(&CertificateDoc::from(&report))?)?;
            let verdict = if report.is_stable() { "STABLE" } else { "NOT_CERTIFIED" };
            emit(
                out,
                &format!(
                    "VERDICT: {verdict} q1_min_eig={:e} spectral_abscissa={:e}\n",
                    report.q1_min_eigenvalue(),
                    report.spectral_abscissa
                ),
            )
        }
        Command::Bounds { scenario, pm } => {
            let loaded = load(scenario, cli.lax)?;
            require_explicit_k_v(&loaded)?;
            let sc = &loaded.scenario;
            let p_m = disturbance_for(sc, pm)?;
            let lap = build_laplacian(&sc.topology)?;
            let report = theorem2_bounds(&sc.params, &lap, &p_m)?;
            emit(out, &to_document(&BoundsDoc::new(&report, &p_m))?)?;
            let verdict = if report.satisfied.all() { "BOUNDS_HOLD" } else { "BOUNDS_VIOLATED" };
            let flags = report.satisfied.as_array().map(|b| if b { "ok" } else { "violated" });
            emit(
                out,
                &format!("VERDICT: {verdict} droop={} voltage={} omega={}\n", flags[0], flags[1], flags[2]),
            )
        }
        Command::Sweep {
            scenario,
            param,
            values,
            pm,
        } => {
            let loaded = load(scenario, cli.lax)?;
            let base = &loaded.scenario;
            let p_m = disturbance_for(base, pm)?;
            let lap = build_laplacian(&base.topology)?;
            let with_bounds = loaded.k_v_explicit || matches!(param, SweepParam::KV);
            let rows = values
                .par_iter()
                .map(|&value| sweep_point(base, &lap, *param, value, &p_m, with_bounds))
                .collect::<Result<Vec<_>>>()?;
            write_sweep(&rows, &mut *out)
        }
        Command::Plotdata { csv, figure, node } => {
            let table = read_trajectory(csv)?;
            let figure = match figure {
                FigureArg::Freq => Figure::Freq,
                FigureArg::Gen => Figure::Gen,
                FigureArg::Inj => Figure::Inj,
                FigureArg::Volt => Figure::Volt,
            };
            write_plot_data(&table, figure, *node, &mut *out)
        }
    }
}

fn sweep_point(
    base: &Scenario,
    lap: &crate::LaplacianBundle,
    param: SweepParam,
    value: f64,
    p_m: &DVector<f64>,
    with_bounds: bool,
) -> Result<SweepRow> {
    let mut sc = base.clone();
    param.apply(&mut sc, value);
    sc.params.validate()?;
    let cert = certify_stability(&sc.params, lap)?;
    let bounds = if with_bounds {
        match theorem2_bounds(&sc.params, lap, p_m) {
            Ok(b) => Some(b),
            Err(e @ (Error::NonUniformGains { .. } | Error::UnbalancedNominals { .. })) => {
                log::warn!("{} = {value}: bounds skipped: {e}", param.name());
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(SweepRow {
        param: param.name().to_string(),
        value,
        q1_positive_definite: cert.q1_positive_definite,
        q1_min_eigenvalue: cert.q1_min_eigenvalue(),
        spectral_abscissa: cert.spectral_abscissa,
        e_droop: bounds.as_ref().map(|b| b.e_droop),
        e_v: bounds.as_ref().map(|b| b.e_v),
        e_omega: bounds.as_ref().map(|b| b.e_omega),
        achieved_droop_error: bounds.as_ref().map(|b| b.achieved_droop_error),
        achieved_v_error: bounds.as_ref().map(|b| b.achieved_v_error),
        achieved_omega_error: bounds.as_ref().map(|b| b.achieved_omega_error),
        bounds_hold: bounds.as_ref().map(|b| b.satisfied.all()),
    })
}

/// Largest `|V_a − V_b|` relative to the largest deviation of `a` from its references.
fn voltage_comparison(sc: &Scenario, a: &crate::Trajectory, b: &crate::Trajectory) -> String {
    let mut diff: f64 = 0.0;
    let mut deviation: f64 = 0.0;
    for (sa, sb) in a.states.iter().zip(&b.states) {
        diff = diff.max((&sa.voltage - &sb.voltage).amax());
        deviation = deviation.max((&sa.voltage - &sc.params.v_ref).amax());
    }
    let ratio = if deviation > 0.0 { diff / deviation } else { 0.0 };
    format!("max_voltage_model_difference = {diff:e}\nrelative_to_deviation = {ratio:e}\n")
}
