use thiserror::Error;

/// Errors produced anywhere in the key-rate pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("state is not normalized: |a0|^2 + |a1|^2 = {norm_sq}")]
    NotNormalized { norm_sq: f64 },

    #[error("basis states are (nearly) parallel: Gram determinant {gram} <= 1e-12")]
    DegenerateBasis { gram: f64 },

    #[error("invalid statistics: {}", .0.join("; "))]
    InvalidStats(Vec<String>),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no basis-0 clicks: p(1|0,0)+p(1|1,1)+p(1|0,1)+p(1|1,0) = 0, key rate undefined")]
    NoClicks,

    #[error("statistics are infeasible: no expansion coefficients in [0, {c_max}]^4 satisfy the mismatched-basis constraints")]
    Infeasible { c_max: f64 },

    #[error("table does not satisfy the symmetric conditions within tol {tol}; use epsilon_max")]
    NotSymmetric { tol: f64 },

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
