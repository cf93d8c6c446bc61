use thiserror::Error;

/// Errors produced while loading or validating a grid configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
    #[error("unknown reference in config: {0}")]
    UnknownReference(String),
}

/// Errors from the transient solver.
#[derive(Debug, Error)]
pub enum EmtError {
    #[error("singular conductance matrix: nodes {nodes:?} have no path to ground")]
    FloatingSubnetwork { nodes: Vec<String> },
    #[error("steady state did not settle within {limit_ms} ms of simulated time")]
    NoSteadyState { limit_ms: f64 },
    #[error("numerical divergence at t = {t_ms:.4} ms (step {step}): |v| = {v_kv:.1} kV on node {node}")]
    Diverged {
        step: usize,
        t_ms: f64,
        node: String,
        v_kv: f64,
    },
    #[error("fault position {position_km} km outside cable {cable} (length {length_km} km)")]
    FaultOutsideCable {
        cable: String,
        position_km: f64,
        length_km: f64,
    },
    #[error("no cable named {0} in the model")]
    NoSuchCable(String),
}

/// Errors from the analytical sizing formulas.
#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("converter {id}: no DC current headroom (K*i_a_r = {lhs:.4} kA <= i_ac_hat/2 = {rhs:.4} kA)")]
    NoHeadroom { id: String, lhs: f64, rhs: f64 },
    #[error("converter inductor formula: non-positive denominator ({0:.4} kA)")]
    NonPositiveDenominator(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Errors from the sizing orchestration.
#[derive(Debug, Error)]
pub enum SizingError {
    #[error("part {part} iteration cap ({cap}) reached for breaker {breaker} while sizing zone {zone}")]
    IterationCap {
        part: char,
        cap: usize,
        breaker: String,
        zone: String,
    },
    #[error(transparent)]
    Emt(#[from] EmtError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("reports cover different breaker sets: {0}")]
    MismatchedBreakerSets(String),
    #[error("no simulator registered under name {0:?}")]
    UnknownSimulator(String),
}
