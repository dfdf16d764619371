use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkSumError {
    #[error("{what}: {requested} requested, cap is {cap}")]
    Capacity {
        what: &'static str,
        requested: u128,
        cap: u128,
    },
    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("configuration {0} is not a vertex of the graph")]
    UnknownVertex(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("sites {0:?} and {1:?} coincide")]
    CoincidentSites((i64, i64), (i64, i64)),
    #[error("site {0} is outside the lattice")]
    SiteOutOfRange(String),
    #[error("operator list is invalid: {0}")]
    InvalidOperator(String),
}

pub type Result<T> = std::result::Result<T, WalkSumError>;
