use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("allele {allele} at marker {marker} is missing from the frequency table")]
    MissingAllele { marker: String, allele: String },

    #[error("profile {profile} has no genotype for marker {marker}")]
    MissingGenotype { profile: String, marker: String },

    #[error("hypothesis cannot explain the observed peaks at marker {0}")]
    ZeroLikelihood(String),

    #[error("both hypotheses have zero likelihood")]
    UndefinedRatio,

    #[error("log-density is not concave near x = {x}: {detail}")]
    NotConcave { x: f64, detail: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{failed} of {total} bootstrap refits failed")]
    TooManyFailures { failed: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
