use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure category, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// A mathematical hypothesis of the selected method does not hold.
    Hypothesis,
    /// The numerics failed (no convergence, rejected seeds, lost certificates).
    Numerical,
    /// Malformed input, parse errors, file-system errors.
    Input,
}

/// Pipeline stage an error originated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Normalize,
    ConjugateExpLog,
    CertifyClasses,
    Solve,
    ExtendToLine,
    ConjugateBack,
    VerifyMultiplicative,
    NegationExtend,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Normalize => "normalize",
            Stage::ConjugateExpLog => "conjugate-explog",
            Stage::CertifyClasses => "certify-classes",
            Stage::Solve => "solve",
            Stage::ExtendToLine => "extend-to-line",
            Stage::ConjugateBack => "conjugate-back",
            Stage::VerifyMultiplicative => "verify-multiplicative",
            Stage::NegationExtend => "negation-extend",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("x = {x} lies outside the domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("y = {y} lies outside the value span [{lo}, {hi}]")]
    OutOfRange { y: f64, lo: f64, hi: f64 },
    #[error("function is not strictly increasing on its core interval")]
    NotMonotone,
    #[error("composition domain mismatch: inner value {value} is outside the outer domain [{lo}, {hi}]")]
    DomainMismatch { value: f64, lo: f64, hi: f64 },
    #[error("invalid grid function: {0}")]
    InvalidGrid(String),

    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("pieces disagree at seam x = {at}: left {left}, right {right}")]
    DiscontinuousSeam { at: f64, left: f64, right: f64 },
    #[error("guard intervals overlap near x = {at}")]
    GuardOverlap { at: f64 },
    #[error("math domain error: {0}")]
    MathDomain(String),
    #[error("schema violation in field `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("non-positive values where positive ones are required: {0}")]
    NonPositiveValues(String),
    #[error("class parameter out of range: {0}")]
    ClassParameter(String),

    #[error("exponents violate the negation parity rule: {0}")]
    ParityViolation(String),
    #[error("exponent sum is zero; cannot normalize")]
    ZeroSum,

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("no convergence after {iterations} iterations (last gap {last_gap:e})")]
    NoConvergence { iterations: usize, last_gap: f64, trace: Vec<f64> },
    #[error("iterate left its class: {0}")]
    CertificateLost(String),
    #[error("target value {0} is not bracketed by L_f over the core interval")]
    NotBracketed(f64),

    #[error("seed sequence rejected at index {index}: {message}")]
    SeedRejected { index: usize, message: String },
    #[error("sequence stalled above the anchor after {terms} terms (distance {distance:e})")]
    AnchorNotApproached { terms: usize, distance: f64 },
    #[error("no valid seeds found on a mesh of {mesh} points")]
    NoValidSeeds { mesh: usize },
    #[error("piece {0} is not strictly increasing")]
    PieceNotMonotone(usize),
    #[error("piece {index} does not map onto its target interval: {message}")]
    RangeMismatch { index: usize, message: String },
    #[error("range hypothesis R(F) = R(F|I) violated at x = {x}: F(x) = {value} outside [{lo}, {hi}]")]
    RangeHypothesisViolated { x: f64, value: f64, lo: f64, hi: f64 },
    #[error("iterate g^{k}({x}) = {value} is not positive")]
    NonPositiveIterate { k: usize, x: f64, value: f64 },

    #[error("[{stage}] {source}")]
    AtStage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn hypothesis(msg: impl Into<String>) -> Self {
        Error::HypothesisViolation(msg.into())
    }

    pub fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn at(self, stage: Stage) -> Self {
        match self {
            e @ Error::AtStage { .. } => e,
            e => Error::AtStage {
                stage,
                source: Box::new(e),
            },
        }
    }

    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            AtStage { source, .. } => source.category(),
            HypothesisViolation(_) | ParityViolation(_) | ZeroSum | ClassParameter(_)
            | RangeHypothesisViolated { .. } | NonPositiveValues(_) => ErrorCategory::Hypothesis,
            NoConvergence { .. }
            | CertificateLost(_)
            | NotBracketed(_)
            | SeedRejected { .. }
            | AnchorNotApproached { .. }
            | NoValidSeeds { .. }
            | PieceNotMonotone(_)
            | RangeMismatch { .. }
            | NotMonotone
            | DomainMismatch { .. }
            | NonPositiveIterate { .. }
            | OutOfRange { .. } => ErrorCategory::Numerical,
            OutOfDomain { .. }
            | InvalidGrid(_)
            | Syntax { .. }
            | DiscontinuousSeam { .. }
            | GuardOverlap { .. }
            | MathDomain(_)
            | Schema { .. }
            | Io { .. } => ErrorCategory::Input,
        }
    }

    /// The innermost error, with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
