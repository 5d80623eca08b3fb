use std::path::PathBuf;

use thiserror::Error;

/// Joins 0-based node indices as a 1-based list for messages.
fn one_based(nodes: &[usize]) -> String {
    nodes
        .iter()
        .map(|i| (i + 1).to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn format_components(groups: &[Vec<usize>]) -> String {
    groups
        .iter()
        .map(|g| format!("{{{}}}", one_based(g)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Every failure the toolkit can report. Node indices are stored 0-based and displayed 1-based.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: node {node} is out of range for a grid with {n_nodes} nodes", node = .node + 1)]
    NodeOutOfRange { line: usize, node: usize, n_nodes: usize },

    #[error("line {line}: both ends are node {node}", node = .node + 1)]
    SelfLoop { line: usize, node: usize },

    #[error("line {line}: duplicate connection between nodes {from} and {to}", from = .from + 1, to = .to + 1)]
    DuplicateLine { line: usize, from: usize, to: usize },

    #[error("line {line} ({from}-{to}): resistance must be finite and > 0, got {value}", from = .from + 1, to = .to + 1)]
    NonPositiveResistance { line: usize, from: usize, to: usize, value: f64 },

    #[error("grid must contain at least one node")]
    EmptyGrid,

    #[error("grid is disconnected; components: {}", format_components(.components))]
    Disconnected { components: Vec<Vec<usize>> },

    #[error("invalid parameter `{field}`{}: {reason}", .node.map(|n| format!(" at node {}", n + 1)).unwrap_or_default())]
    InvalidParameter {
        field: String,
        node: Option<usize>,
        reason: String,
    },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("nominal generation differs from nominal injection at nodes {}", one_based(.nodes))]
    UnbalancedNominals { nodes: Vec<usize> },

    #[error("reference voltages are not a DC load-flow equilibrium (|L_R v_ref| = {residual:e}); use uniform references")]
    ReferenceNotEquilibrium { residual: f64 },

    #[error("gain `{gain}` is not uniform; nodes {} differ from node 1", one_based(.nodes))]
    NonUniformGains { gain: &'static str, nodes: Vec<usize> },

    #[error("voltage at node {node} is {value} (must stay > 0){}", .time.map(|t| format!(" at t = {t} s")).unwrap_or_default(), node = .node + 1)]
    VoltageSingularity {
        node: usize,
        value: f64,
        time: Option<f64>,
    },

    #[error("step size underflow at t = {time} s (dt = {dt:e} s); the system is too stiff for the explicit integrator")]
    StepSizeUnderflow { time: f64, dt: f64 },

    #[error("non-finite state encountered at t = {time} s")]
    NonFiniteState { time: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown keys: {}", .keys.join(", "))]
    UnknownKeys { keys: Vec<String> },

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Numerical failures (exit code 2) as opposed to input/validation failures (exit code 1).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::VoltageSingularity { .. }
                | Error::StepSizeUnderflow { .. }
                | Error::NonFiniteState { .. }
                | Error::Numerical(_)
        )
    }

    pub(crate) fn invalid(field: impl Into<String>, node: Option<usize>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            node,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
