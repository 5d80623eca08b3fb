//! Scenario files, trajectory CSV and report documents.
//!
//! Scenarios are TOML with 1-based node numbers. Per-node parameters accept either one
//! number (applied to every node) or an array with one entry per node.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Line;
use crate::plant::{Disturbance, DisturbanceStep, SystemParams, SystemState};
use crate::sim::{InitialCondition, Model, SimSettings};
use crate::{BoundsReport, CertificateReport, EquilibriumResult, GridTopology, Scenario, Trajectory};

/// Voltage gain used when a scenario leaves `params.k_v` out.
pub const DEFAULT_K_V: f64 = 10.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScenarioFile {
    grid: GridSection,
    params: ParamsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_state: Option<StateSection>,
    #[serde(default)]
    disturbance: DisturbanceSection,
    sim: SimSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GridSection {
    nodes: usize,
    #[serde(default)]
    lines: Vec<LineEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LineEntry {
    from: usize,
    to: usize,
    resistance_pu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reactance_pu: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum PerNode {
    Uniform(f64),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ParamsSection {
    #[serde(default = "one")]
    omega_ref: f64,
    #[serde(default = "one")]
    v_nom: f64,
    inertia: PerNode,
    capacitance: PerNode,
    k_omega: PerNode,
    k_droop: PerNode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k_v: Option<PerNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v_ref: Option<PerNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_nom: Option<PerNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_inj_nom: Option<PerNode>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StateSection {
    omega: PerNode,
    voltage: PerNode,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct DisturbanceSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_m: Option<PerNode>,
    #[serde(default)]
    steps: Vec<StepEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StepEntry {
    time_s: f64,
    p_m: PerNode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SimSection {
    t_end_s: f64,
    dt_max_s: f64,
    #[serde(default = "default_model")]
    model: String,
    #[serde(default = "default_grid")]
    output_grid_s: f64,
    #[serde(default)]
    record_steps: bool,
}

fn one() -> f64 {
    1.0
}

fn default_model() -> String {
    Model::Linear.name().to_string()
}

fn default_grid() -> f64 {
    0.01
}

impl PerNode {
    fn resolve(&self, field: &str, n: usize) -> Result<DVector<f64>> {
        match self {
            PerNode::Uniform(x) => Ok(DVector::from_element(n, *x)),
            PerNode::Values(v) if v.len() == n => Ok(DVector::from_column_slice(v)),
            PerNode::Values(v) => Err(Error::invalid(
                field,
                None,
                format!("expected {n} values (one per node), got {}", v.len()),
            )),
        }
    }

    fn from_vector(v: &DVector<f64>) -> Self {
        PerNode::Values(v.iter().copied().collect())
    }
}

/// A scenario together with facts about how it was written.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    /// Whether `params.k_v` was given rather than defaulted.
    pub k_v_explicit: bool,
    /// Keys the parser did not recognize (only non-empty in lax mode).
    pub ignored_keys: Vec<String>,
}

/// Loads and validates a scenario, rejecting unknown keys.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    load_scenario_with(path, true).map(|l| l.scenario)
}

/// Loads a scenario; with `strict = false` unknown keys are logged instead of rejected.
pub fn load_scenario_with(path: impl AsRef<Path>, strict: bool) -> Result<LoadedScenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text, path, strict)
}

/// Parses scenario text. `origin` is only used in error messages.
pub fn parse_scenario(text: &str, origin: &Path, strict: bool) -> Result<LoadedScenario> {
    let parse_error = |e: toml::de::Error| {
        let (line, column) = e.span().map_or((1, 1), |span| line_column(text, span.start));
        Error::Parse {
            path: origin.to_path_buf(),
            line,
            column,
            message: e.message().trim().to_string(),
        }
    };
    let de = toml::Deserializer::parse(text).map_err(parse_error)?;
    let mut ignored = Vec::new();
    let file: ScenarioFile = serde_ignored::deserialize(de, |p| ignored.push(p.to_string())).map_err(parse_error)?;
    if !ignored.is_empty() {
        if strict {
            return Err(Error::UnknownKeys { keys: ignored });
        }
        log::warn!("{}: ignoring unknown keys: {}", origin.display(), ignored.join(", "));
    }
    let k_v_explicit = file.params.k_v.is_some();
    let scenario = file.into_scenario()?;
    for line in scenario.topology.lines() {
        if let Some(x) = line.reactance {
            log::info!(
                "line {}-{}: reactance {x} p.u. recorded but not used by the resistive DC model",
                line.from + 1,
                line.to + 1
            );
        }
    }
    Ok(LoadedScenario {
        scenario,
        k_v_explicit,
        ignored_keys: ignored,
    })
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, column)
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario> {
        let n = self.grid.nodes;
        if n == 0 {
            return Err(Error::EmptyGrid);
        }
        let mut lines = Vec::with_capacity(self.grid.lines.len());
        for (k, l) in self.grid.lines.iter().enumerate() {
            if l.from == 0 || l.to == 0 {
                return Err(Error::invalid(
                    format!("grid.lines[{}]", k + 1),
                    None,
                    "node numbers start at 1",
                ));
            }
            let mut line = Line::new(l.from - 1, l.to - 1, l.resistance_pu);
            line.reactance = l.reactance_pu;
            lines.push(line);
        }
        let topology = GridTopology::new(n, lines)?;

        let p = &self.params;
        let zeros = DVector::zeros(n);
        let optional = |field: &str, value: &Option<PerNode>, fallback: &DVector<f64>| match value {
            Some(v) => v.resolve(field, n),
            None => Ok(fallback.clone()),
        };
        let p_nom = optional("params.p_nom", &p.p_nom, &zeros)?;
        let params = SystemParams {
            inertia: p.inertia.resolve("params.inertia", n)?,
            capacitance: p.capacitance.resolve("params.capacitance", n)?,
            k_droop: p.k_droop.resolve("params.k_droop", n)?,
            k_omega: p.k_omega.resolve("params.k_omega", n)?,
            k_v: optional("params.k_v", &p.k_v, &DVector::from_element(n, DEFAULT_K_V))?,
            v_ref: optional("params.v_ref", &p.v_ref, &DVector::from_element(n, p.v_nom))?,
            p_inj_nom: optional("params.p_inj_nom", &p.p_inj_nom, &p_nom)?,
            p_nom,
            omega_ref: p.omega_ref,
            v_nom: p.v_nom,
        };

        let initial_state = match &self.initial_state {
            None => InitialCondition::Equilibrium,
            Some(s) => InitialCondition::State(SystemState {
                omega: s.omega.resolve("initial_state.omega", n)?,
                voltage: s.voltage.resolve("initial_state.voltage", n)?,
            }),
        };

        let d = &self.disturbance;
        let initial = optional("disturbance.p_m", &d.p_m, &zeros)?;
        let steps = d
            .steps
            .iter()
            .enumerate()
            .map(|(k, s)| {
                Ok(DisturbanceStep {
                    time: s.time_s,
                    p_m: s.p_m.resolve(&format!("disturbance.steps[{}].p_m", k + 1), n)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let disturbance = Disturbance::new(initial, steps)?;

        let s = &self.sim;
        let sim = SimSettings {
            t_end: s.t_end_s,
            dt_max: s.dt_max_s,
            model: s.model.parse()?,
            output_grid: s.output_grid_s,
            record_steps: s.record_steps,
        };
        let scenario = Scenario {
            params,
            topology,
            initial_state,
            disturbance,
            sim,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    fn from_scenario(sc: &Scenario) -> Self {
        let p = &sc.params;
        let v = PerNode::from_vector;
        ScenarioFile {
            grid: GridSection {
                nodes: sc.topology.n_nodes(),
                lines: sc
                    .topology
                    .lines()
                    .iter()
                    .map(|l| LineEntry {
                        from: l.from + 1,
                        to: l.to + 1,
                        resistance_pu: l.resistance,
                        reactance_pu: l.reactance,
                    })
                    .collect(),
            },
            params: ParamsSection {
                omega_ref: p.omega_ref,
                v_nom: p.v_nom,
                inertia: v(&p.inertia),
                capacitance: v(&p.capacitance),
                k_omega: v(&p.k_omega),
                k_droop: v(&p.k_droop),
                k_v: Some(v(&p.k_v)),
                v_ref: Some(v(&p.v_ref)),
                p_nom: Some(v(&p.p_nom)),
                p_inj_nom: Some(v(&p.p_inj_nom)),
            },
            initial_state: match &sc.initial_state {
                InitialCondition::Equilibrium => None,
                InitialCondition::State(s) => Some(StateSection {
                    omega: v(&s.omega),
                    voltage: v(&s.voltage),
                }),
            },
            disturbance: DisturbanceSection {
                p_m: Some(v(sc.disturbance.initial())),
                steps: sc
                    .disturbance
                    .steps()
                    .iter()
                    .map(|s| StepEntry {
                        time_s: s.time,
                        p_m: v(&s.p_m),
                    })
                    .collect(),
            },
            sim: SimSection {
                t_end_s: sc.sim.t_end,
                dt_max_s: sc.sim.dt_max,
                model: sc.sim.model.name().to_string(),
                output_grid_s: sc.sim.output_grid,
                record_steps: sc.sim.record_steps,
            },
        }
    }
}

/// Serializes a scenario to the file format with every field written out.
pub fn scenario_to_string(scenario: &Scenario) -> Result<String> {
    toml::to_string_pretty(&ScenarioFile::from_scenario(scenario)).map_err(|e| Error::Scenario(e.to_string()))
}

/// Formats like C's `%.9g`.
pub fn format_g9(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip_zeros(mantissa), exp.abs())
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn trajectory_header(n: usize) -> Vec<String> {
    let mut h = vec!["time".to_string()];
    for prefix in ["omega", "v", "pdroop", "pinj"] {
        h.extend((1..=n).map(|i| format!("{prefix}_{i}")));
    }
    h.push("W".into());
    h
}

/// Writes the trajectory CSV: `time, omega_i, v_i, pdroop_i, pinj_i, W`.
pub fn write_trajectory<W: Write>(trajectory: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_header(trajectory.n()))?;
    let mut row = Vec::new();
    for k in 0..trajectory.len() {
        row.clear();
        row.push(format_g9(trajectory.times[k]));
        let s = &trajectory.states[k];
        for vec in [&s.omega, &s.voltage, &trajectory.p_droop[k], &trajectory.p_inj[k]] {
            row.extend(vec.iter().map(|&x| format_g9(x)));
        }
        row.push(format_g9(trajectory.lyapunov_w[k]));
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: PathBuf::from("<trajectory>"),
        source,
    })?;
    Ok(())
}

/// Trajectory CSV read back column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl TrajectoryTable {
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.header.iter().position(|h| h == name).map(|k| self.columns[k].as_slice())
    }

    /// Node count implied by the header.
    pub fn n(&self) -> usize {
        self.header.iter().filter(|h| h.starts_with("omega_")).count()
    }
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<TrajectoryTable> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut r = csv::Reader::from_reader(file);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let n = header.iter().filter(|h| h.starts_with("omega_")).count();
    if header != trajectory_header(n) {
        return Err(Error::Scenario(format!(
            "{}: not a trajectory file (unexpected header)",
            path.display()
        )));
    }
    let mut columns = vec![Vec::new(); header.len()];
    for (k, record) in r.records().enumerate() {
        let record = record?;
        for (col, field) in columns.iter_mut().zip(record.iter()) {
            let value = field.trim().parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: k + 2,
                column: 1,
                message: format!("`{field}` is not a number"),
            })?;
            col.push(value);
        }
    }
    Ok(TrajectoryTable { header, columns })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Area frequencies.
    Freq,
    /// Generator power change from droop control.
    Gen,
    /// Converter injections.
    Inj,
    /// DC voltages.
    Volt,
}

impl Figure {
    pub fn prefix(self) -> &'static str {
        match self {
            Figure::Freq => "omega",
            Figure::Gen => "pdroop",
            Figure::Inj => "pinj",
            Figure::Volt => "v",
        }
    }
}

impl std::str::FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "freq" => Ok(Figure::Freq),
            "gen" => Ok(Figure::Gen),
            "inj" => Ok(Figure::Inj),
            "volt" => Ok(Figure::Volt),
            other => Err(Error::invalid("figure", None, format!("expected freq, gen, inj or volt, got `{other}`"))),
        }
    }
}

/// Two-column `time value` blocks, one per node, separated by blank lines.
pub fn write_plot_data<W: Write>(table: &TrajectoryTable, figure: Figure, node: Option<usize>, mut out: W) -> Result<()> {
    let n = table.n();
    let nodes: Vec<usize> = match node {
        Some(k) if k == 0 || k > n => {
            return Err(Error::invalid("node", None, format!("must be in 1..={n}, got {k}")));
        }
        Some(k) => vec![k],
        None => (1..=n).collect(),
    };
    let time = table.column("time").expect("validated header");
    let io = |source| Error::Io {
        path: PathBuf::from("<stdout>"),
        source,
    };
    for (b, k) in nodes.iter().enumerate() {
        let name = format!("{}_{k}", figure.prefix());
        let series = table.column(&name).expect("validated header");
        if b > 0 {
            writeln!(out).map_err(io)?;
        }
        writeln!(out, "# {name}").map_err(io)?;
        for (t, y) in time.iter().zip(series) {
            writeln!(out, "{} {}", format_g9(*t), format_g9(*y)).map_err(io)?;
        }
    }
    Ok(())
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumDoc {
    pub p_m: Vec<f64>,
    pub omega_hat: Vec<f64>,
    pub v_hat: Vec<f64>,
    pub p_droop: Vec<f64>,
    pub residual_norm: f64,
}

impl EquilibriumDoc {
    pub fn new(eq: &EquilibriumResult, p_m: &DVector<f64>) -> Self {
        EquilibriumDoc {
            p_m: to_vec(p_m),
            omega_hat: to_vec(&eq.omega_hat),
            v_hat: to_vec(&eq.v_hat),
            p_droop: to_vec(&eq.pdroop),
            residual_norm: eq.residual_norm,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateDoc {
    pub q1_positive_definite: bool,
    pub q1_min_eigenvalue: f64,
    pub q1_eigenvalues: Vec<f64>,
    pub q1_scaled_eigenvalues: Vec<f64>,
    pub schur_matrix_eigenvalues: Vec<f64>,
    pub spectral_abscissa: f64,
    pub a_eigenvalues: AEigenvalues,
}

#[derive(Debug, Clone, Serialize)]
pub struct AEigenvalues {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&CertificateReport> for CertificateDoc {
    fn from(r: &CertificateReport) -> Self {
        CertificateDoc {
            q1_positive_definite: r.q1_positive_definite,
            q1_min_eigenvalue: r.q1_min_eigenvalue(),
            q1_eigenvalues: to_vec(&r.q1_eigenvalues),
            q1_scaled_eigenvalues: to_vec(&r.q1_scaled_eigenvalues),
            schur_matrix_eigenvalues: to_vec(&r.schur_matrix_eigenvalues),
            spectral_abscissa: r.spectral_abscissa,
            a_eigenvalues: AEigenvalues {
                re: r.a_eigenvalues.iter().map(|z| z.re).collect(),
                im: r.a_eigenvalues.iter().map(|z| z.im).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsDoc {
    pub bounds: BoundTriple,
    pub achieved: BoundTriple,
    pub satisfied: SatisfiedDoc,
    pub fairness_spread: f64,
    pub equilibrium: EquilibriumDoc,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundTriple {
    pub droop: f64,
    pub voltage: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SatisfiedDoc {
    pub droop: bool,
    pub voltage: bool,
    pub omega: bool,
}

impl BoundsDoc {
    pub fn new(r: &BoundsReport, p_m: &DVector<f64>) -> Self {
        BoundsDoc {
            bounds: BoundTriple {
                droop: r.e_droop,
                voltage: r.e_v,
                omega: r.e_omega,
            },
            achieved: BoundTriple {
                droop: r.achieved_droop_error,
                voltage: r.achieved_v_error,
                omega: r.achieved_omega_error,
            },
            satisfied: SatisfiedDoc {
                droop: r.satisfied.droop,
                voltage: r.satisfied.voltage,
                omega: r.satisfied.omega,
            },
            fairness_spread: r.fairness_spread,
            equilibrium: EquilibriumDoc::new(&r.equilibrium, p_m),
        }
    }
}

/// Renders a report as a TOML document.
pub fn to_document<D: Serialize>(doc: &D) -> Result<String> {
    toml::to_string_pretty(doc).map_err(|e| Error::Numerical(format!("report serialization: {e}")))
}

/// One row of a parameter sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub q1_positive_definite: bool,
    pub q1_min_eigenvalue: f64,
    pub spectral_abscissa: f64,
    pub e_droop: Option<f64>,
    pub e_v: Option<f64>,
    pub e_omega: Option<f64>,
    pub achieved_droop_error: Option<f64>,
    pub achieved_v_error: Option<f64>,
    pub achieved_omega_error: Option<f64>,
    pub bounds_hold: Option<bool>,
}

pub const SWEEP_HEADER: [&str; 12] = [
    "param",
    "value",
    "q1_positive_definite",
    "q1_min_eigenvalue",
    "spectral_abscissa",
    "e_droop",
    "e_v",
    "e_omega",
    "achieved_droop_error",
    "achieved_v_error",
    "achieved_omega_error",
    "bounds_hold",
];

pub fn write_sweep<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    let opt = |x: Option<f64>| x.map(format_g9).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.param.clone(),
            format_g9(r.value),
            r.q1_positive_definite.to_string(),
            format_g9(r.q1_min_eigenvalue),
            format_g9(r.spectral_abscissa),
            opt(r.e_droop),
            opt(r.e_v),
            opt(r.e_omega),
            opt(r.achieved_droop_error),
            opt(r.achieved_v_error),
            opt(r.achieved_omega_error),
            r.bounds_hold.map(|b| b.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: PathBuf::from("<sweep>"),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[grid]
nodes = 2
lines = [{ from = 1, to = 2, resistance_pu = 0.5 }]

[params]
inertia = 1
capacitance = 1
k_omega = [1, 2]
k_droop = 1

[sim]
t_end_s = 1.0
dt_max_s = 0.1
"#;

    fn parse(text: &str, strict: bool) -> Result<LoadedScenario> {
        parse_scenario(text, Path::new("test.scenario"), strict)
    }

    #[test]
    fn g9_formatting() {
        assert_eq!(format_g9(0.0), "0");
        assert_eq!(format_g9(1.0), "1");
        assert_eq!(format_g9(-0.1), "-0.1");
        assert_eq!(format_g9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_g9(123456789.0), "123456789");
        assert_eq!(format_g9(1234567890.0), "1.23456789e+09");
        assert_eq!(format_g9(1.5e-5), "1.5e-05");
        assert_eq!(format_g9(0.0001), "0.0001");
        assert_eq!(format_g9(2.0 / 3.0 * 1e-7), "6.66666667e-08");
    }

    #[test]
    fn minimal_scenario_defaults() {
        let l = parse(MINIMAL, true).unwrap();
        assert!(!l.k_v_explicit);
        let p = &l.scenario.params;
        assert_eq!(p.k_v, DVector::from_element(2, DEFAULT_K_V));
        assert_eq!(p.k_omega, DVector::from_vec(vec![1.0, 2.0]));
        assert_eq!(p.v_ref, DVector::from_element(2, 1.0));
        assert_eq!(l.scenario.initial_state, InitialCondition::Equilibrium);
        assert_eq!(l.scenario.sim.model, Model::Linear);
        assert_eq!(l.scenario.sim.output_grid, 0.01);
        assert_eq!(l.scenario.topology.lines()[0].from, 0);
    }

    #[test]
    fn unknown_keys_strict_and_lax() {
        let text = MINIMAL.replace("k_droop = 1", "k_droop = 1\nk_dorop = 2");
        let err = parse(&text, true).unwrap_err();
        assert!(matches!(err, Error::UnknownKeys { ref keys } if keys == &["params.k_dorop".to_string()]), "{err}");
        let lax = parse(&text, false).unwrap();
        assert_eq!(lax.ignored_keys, vec!["params.k_dorop".to_string()]);
    }

    #[test]
    fn syntax_error_has_position() {
        let text = MINIMAL.replace("inertia = 1", "inertia = = 1");
        match parse(&text, true).unwrap_err() {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 7);
                assert!(column > 1);
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn zero_resistance_names_line() {
        let text = MINIMAL.replace("resistance_pu = 0.5", "resistance_pu = 0.0");
        let err = parse(&text, true).unwrap_err();
        assert!(matches!(err, Error::NonPositiveResistance { line: 1, .. }));
        assert!(err.to_string().contains("(1-2)"), "{err}");
    }

    #[test]
    fn wrong_length_names_field() {
        let text = MINIMAL.replace("k_omega = [1, 2]", "k_omega = [1, 2, 3]");
        let err = parse(&text, true).unwrap_err();
        assert!(err.to_string().contains("params.k_omega"), "{err}");
    }

    #[test]
    fn zero_node_number_rejected() {
        let text = MINIMAL.replace("from = 1", "from = 0");
        assert!(parse(&text, true).unwrap_err().to_string().contains("start at 1"));
    }

    #[test]
    fn round_trip_is_identical() {
        let mut sc = parse(MINIMAL, true).unwrap().scenario;
        sc.disturbance = Disturbance::new(
            DVector::from_vec(vec![0.1, -0.2]),
            vec![DisturbanceStep {
                time: 0.5,
                p_m: DVector::from_vec(vec![1.0 / 3.0, 0.0]),
            }],
        )
        .unwrap();
        let text = scenario_to_string(&sc).unwrap();
        let back = parse(&text, true).unwrap();
        assert_eq!(back.scenario, sc);
        assert!(back.k_v_explicit);
    }

    #[test]
    fn figure_names() {
        assert_eq!("volt".parse::<Figure>().unwrap(), Figure::Volt);
        assert!("voltage".parse::<Figure>().is_err());
    }
}
