//! Error type shared by every stage of the pipeline.

use thiserror::Error;

/// Coarse error classes, mapped to CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Validation,
    Positivity,
    Numeric,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 2,
            ErrorClass::Validation => 3,
            ErrorClass::Positivity => 4,
            ErrorClass::Numeric => 5,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: {reason}")]
    MalformedRow { row: usize, column: String, reason: String },
    #[error("history `{id}`: {reason}")]
    InvalidHistory { id: String, reason: String },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("hazard `{which}` = {value} outside [0,1] in state {state}")]
    InvalidHazard { which: String, value: f64, state: String },
    #[error("state space of {size} cells exceeds enumeration bound {bound}")]
    StateSpaceTooLarge { size: usize, bound: usize },
    #[error("positivity violation at interval {k}: {stratum}")]
    Positivity { k: usize, stratum: String },
    #[error("a_y != a_d requires a declared l_d covariate block")]
    MissingLdPartition,
    #[error("estimand {spec} is not supported by engine {engine}")]
    Unsupported { spec: String, engine: String },
    #[error("design matrix rank deficient at time {time}")]
    RankDeficient { time: f64 },
    #[error("no {kind} events to fit")]
    NoEvents { kind: String },
    #[error("zero denominator in smoothed hazard ratio at time {time}")]
    ZeroDenominator { time: f64 },
    #[error("survival factor 1 - dA vanishes at time {time}")]
    SingularSurvival { time: f64 },
    #[error("division by zero: {0}")]
    DivisionByZero(String),
    #[error("Hajek denominator is zero at time {time}")]
    ZeroH { time: f64 },
    #[error("{failed} of {total} bootstrap replicates failed (last: {last})")]
    ReplicateFailure { failed: usize, total: usize, last: String },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } | Error::InvalidArgument(_) | Error::Unsupported { .. } => ErrorClass::Usage,
            Error::Csv(_)
            | Error::Json(_)
            | Error::MissingColumn(_)
            | Error::MalformedRow { .. }
            | Error::InvalidHistory { .. }
            | Error::InvalidGrid(_)
            | Error::InvalidConfig(_)
            | Error::InvalidHazard { .. }
            | Error::MissingLdPartition
            | Error::NoEvents { .. } => ErrorClass::Validation,
            Error::Positivity { .. } => ErrorClass::Positivity,
            Error::StateSpaceTooLarge { .. }
            | Error::RankDeficient { .. }
            | Error::ZeroDenominator { .. }
            | Error::SingularSurvival { .. }
            | Error::DivisionByZero(_)
            | Error::ZeroH { .. }
            | Error::ReplicateFailure { .. } => ErrorClass::Numeric,
            Error::Stage { source, .. } => source.class(),
        }
    }

    /// Stable variant name used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
            Error::MissingColumn(_) => "MissingColumn",
            Error::MalformedRow { .. } => "MalformedRow",
            Error::InvalidHistory { .. } => "InvalidHistory",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::InvalidHazard { .. } => "InvalidHazard",
            Error::StateSpaceTooLarge { .. } => "StateSpaceTooLarge",
            Error::Positivity { .. } => "PositivityError",
            Error::MissingLdPartition => "MissingLDPartition",
            Error::Unsupported { .. } => "UnsupportedEstimand",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::NoEvents { .. } => "NoEvents",
            Error::ZeroDenominator { .. } => "ZeroDenominator",
            Error::SingularSurvival { .. } => "SingularSurvival",
            Error::DivisionByZero(_) => "DivisionByZero",
            Error::ZeroH { .. } => "ZeroH",
            Error::ReplicateFailure { .. } => "ReplicateFailure",
            Error::Stage { source, .. } => source.kind(),
        }
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Error {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
