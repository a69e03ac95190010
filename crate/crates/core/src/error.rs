//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coordinate {index} of the evaluation point is zero")]
    ZeroCoordinate { index: usize },

    #[error("operation requires a nonzero Laurent polynomial")]
    ZeroPolynomial,

    #[error("oracle band exceeded: coefficient at {alpha:?} is outside the alias-free band {band}")]
    OracleBandExceeded { alpha: Vec<i64>, band: usize },

    #[error("block pivot H[{0}] is numerically singular; measure is not quasi-definite at this truncation")]
    SingularBlock(usize),

    #[error("failed to find a poised node set after {attempts} attempts (last |det| = {last_det:.3e})")]
    PoisednessFailure { attempts: usize, last_det: f64 },

    #[error("node sampling supports D=2 weights of degree <= 2 in the last variable; supply nodes explicitly")]
    UnsupportedNodeSampling,

    #[error("shell index {index} out of range (max {max})")]
    ShellOutOfRange { index: usize, max: usize },

    #[error("oracle does not expose a banded Fourier series; operation needs a Laurent-polynomial weight")]
    NonBandedOracle,

    #[error("oracle does not expose a pointwise weight; quadrature is unavailable")]
    NoPointwiseWeight,

    #[error("matrix {name} is rank deficient: rank {rank} < {required}")]
    RankDeficient { name: &'static str, rank: usize, required: usize },

    #[error("evaluation point lies on the zero set of the perturbing polynomial")]
    EvaluationOnZeroSet,

    #[error("invalid weight specification: {0}")]
    InvalidWeightSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
