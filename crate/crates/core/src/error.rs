use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A strategy constraint that failed at a witnessing capital level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Withdrawal must vanish on the non-positive half-line.
    ZeroOnNonPositive,
    /// Withdrawal must stay within `[0, M]`.
    WithinCap,
    /// Withdrawal must be a finite number.
    Finite,
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Rule::ZeroOnNonPositive => "a(x) = 0 for x <= 0",
            Rule::WithinCap => "0 <= a(x) <= M",
            Rule::Finite => "a(x) finite",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("strategy is not admissible: {} violation(s), first at x = {} ({})", .violations.len(), .violations[0].0, .violations[0].1)]
    NotAdmissible { violations: Vec<(f64, Rule)> },

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("state {value} exceeded blow-up bound {bound} at step {step}")]
    BlowUp { step: usize, value: f64, bound: f64 },

    #[error("{} path(s) failed: indices {:?}", .failures.len(), .failures.iter().map(|f| f.0).collect::<Vec<_>>())]
    EnsembleFailures { failures: Vec<(usize, Box<Error>)> },

    #[error("unsupported strategy: {0}")]
    UnsupportedStrategy(String),

    #[error("strategy is transient (no invariant density): {0}")]
    Transient(String),

    #[error("strategy does not match density: {0}")]
    StrategyMismatch(String),

    #[error("singular linear system (zero pivot at row {row})")]
    SingularSystem { row: usize },

    #[error("insufficient domain: {0}")]
    InsufficientDomain(String),

    #[error("no polynomial-growth solution for r = {r}: C2 = {c2}, C2~ = {c2_tilde}")]
    GrowthViolation { r: f64, c2: f64, c2_tilde: f64 },

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Failures of the numerics themselves, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFinite { .. }
            | Error::BlowUp { .. }
            | Error::SingularSystem { .. }
            | Error::InsufficientDomain(_)
            | Error::GrowthViolation { .. } => true,
            Error::EnsembleFailures { failures } => failures.iter().all(|(_, e)| e.is_numerical()),
            _ => false,
        }
    }
}
