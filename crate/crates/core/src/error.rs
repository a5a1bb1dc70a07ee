use thiserror::Error;

/// Errors raised by the set arithmetic, analysis and filtering layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DsmfError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("operation `{0}` is undefined on an empty set")]
    EmptySet(&'static str),

    #[error("ill-conditioned linear program: residual {residual:.3e} exceeds {tolerance:.1e}")]
    IllConditioned { residual: f64, tolerance: f64 },

    #[error("simplex exceeded its iteration limit ({0} pivots)")]
    IterationLimit(usize),

    #[error("eigenvalue iteration did not converge for a {0}x{0} matrix")]
    EigenNonConvergence(usize),

    #[error("the pair (A, C) is not observable: rank {rank} < {dim}")]
    NotObservable { rank: usize, dim: usize },

    #[error("rank test and left-eigenvector test disagree at lambda = {re:.6}{im:+.6}i")]
    CertificateDisagreement { re: f64, im: f64 },

    #[error("belief of sensor {sensor} became empty at step {step} ({stage})")]
    EmptyBelief {
        step: usize,
        sensor: usize,
        stage: &'static str,
        measurement: Vec<f64>,
    },

    #[error("set representation grew to {generators} generators, above the cap of {cap}; use a smaller horizon")]
    GrowthCap { generators: usize, cap: usize },

    #[error("invalid scenario [{}]: {message}", kind.code())]
    InvalidScenario { kind: ScenarioIssue, message: String },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Category of a scenario validation failure; each maps to a stable code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioIssue {
    DimMismatch,
    UnboundedBox,
    SingularA,
    InitialStateOutside,
    BadGraph,
    BadValue,
}

impl ScenarioIssue {
    pub fn code(self) -> &'static str {
        match self {
            ScenarioIssue::DimMismatch => "DIM_MISMATCH",
            ScenarioIssue::UnboundedBox => "UNBOUNDED_BOX",
            ScenarioIssue::SingularA => "SINGULAR_A",
            ScenarioIssue::InitialStateOutside => "X0_OUTSIDE_BELIEF",
            ScenarioIssue::BadGraph => "BAD_GRAPH",
            ScenarioIssue::BadValue => "BAD_VALUE",
        }
    }
}

pub(crate) fn invalid(kind: ScenarioIssue, message: impl Into<String>) -> DsmfError {
    DsmfError::InvalidScenario {
        kind,
        message: message.into(),
    }
}

pub type Result<T> = std::result::Result<T, DsmfError>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(DsmfError::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
