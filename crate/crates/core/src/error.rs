use thiserror::Error;

/// Errors raised across the modeling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(String),

    #[error("input files share no covered hours")]
    EmptyIntersection,

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("collinear design columns: {}", .0.join(", "))]
    Collinear(Vec<String>),

    #[error("rank deficient design: {0}")]
    RankDeficient(String),

    #[error("parameters violate stationarity or invertibility: {0}")]
    NonStationary(String),

    #[error("optimizer did not converge after {iterations} iterations (best objective {best_value})")]
    NoConvergence {
        iterations: usize,
        best_value: f64,
        best_params: Vec<f64>,
    },

    #[error("all candidate orders failed: {}", format_candidates(.0))]
    AllCandidatesFailed(Vec<(String, String)>),

    #[error("energy balance violated at interval {0}")]
    EnergyBalance(usize),

    #[error("not fitted: {0}")]
    NotFitted(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_candidates(c: &[(String, String)]) -> String {
    c.iter()
        .map(|(order, why)| format!("{order}: {why}"))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// Short machine-readable identifier for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Parse { .. } => "parse",
            Error::DuplicateTimestamp(_) => "duplicate_timestamp",
            Error::EmptyIntersection => "empty_intersection",
            Error::Degenerate(_) => "degenerate",
            Error::Collinear(_) => "collinear",
            Error::RankDeficient(_) => "rank_deficient",
            Error::NonStationary(_) => "non_stationary",
            Error::NoConvergence { .. } => "no_convergence",
            Error::AllCandidatesFailed(_) => "all_candidates_failed",
            Error::EnergyBalance(_) => "energy_balance",
            Error::NotFitted(_) => "not_fitted",
            Error::Precondition(_) => "precondition",
            Error::Stage { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    /// Wraps the error with the name of the pipeline stage that raised it.
    pub fn in_stage(self, stage: impl Into<String>) -> Error {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
