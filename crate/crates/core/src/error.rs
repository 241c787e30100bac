use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid data in column `{column}`: {reason}")]
    InvalidData { column: String, reason: String },

    #[error("missing values in column `{0}`")]
    MissingValues(String),

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("perfect or quasi-complete separation (max |coefficient| = {max_abs_coef:.3})")]
    Separation { max_abs_coef: f64 },

    #[error("category `{0}` has no observations")]
    EmptyCategory(String),

    #[error("optimizer did not converge after {iterations} iterations (max |score| = {score:.3e})")]
    NotConverged { iterations: usize, score: f64 },

    #[error("all observations are censored")]
    AllCensored,

    #[error("nothing to impute: dataset has no missing cells")]
    NothingToImpute,

    #[error("imputation failed in chain {chain}, sweep {sweep}, column `{column}`: {source}")]
    Imputation {
        chain: usize,
        sweep: usize,
        column: String,
        #[source]
        source: Box<Error>,
    },

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable tag used in replicate records.
    pub fn class(&self) -> &'static str {
        match self {
            Error::UnknownColumn(_) => "unknown_column",
            Error::DuplicateColumn(_) => "duplicate_column",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::InvalidData { .. } => "invalid_data",
            Error::MissingValues(_) => "missing_values",
            Error::RankDeficient => "rank_deficient",
            Error::Separation { .. } => "separation",
            Error::EmptyCategory(_) => "empty_category",
            Error::NotConverged { .. } => "not_converged",
            Error::AllCensored => "all_censored",
            Error::NothingToImpute => "nothing_to_impute",
            Error::Imputation { source, .. } => source.class(),
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
