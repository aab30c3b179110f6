use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("matrix is not Hermitian: max asymmetry {asymmetry:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { asymmetry: f64, tol: f64 },

    #[error("eigensolver failed to converge (off-diagonal norm {off:.3e})")]
    EigensolverStalled { off: f64 },

    #[error("domain has empty interior")]
    EmptyInterior,

    #[error("domain interior is disconnected ({components} components)")]
    DisconnectedInterior { components: usize },

    #[error("finite-difference stencil leaves the domain at flat index {index}")]
    Stencil { index: usize },

    #[error("glue boundary condition violated at flat index {index}: v - u = {excess:.3e}")]
    GlueBoundary { index: usize, excess: f64 },

    #[error("mollifier radius {epsilon} leaves an empty shrunken interior")]
    MollifierTooWide { epsilon: f64 },

    #[error("linear program error: {0}")]
    Lp(String),

    #[error("test family member {index} failed m-subharmonicity certification (margin {margin:.3e})")]
    FamilyMember { index: usize, margin: f64 },

    #[error("prerequisite verdict failed: {0}")]
    Prerequisite(String),

    #[error("series truncation failed: {0}")]
    Truncation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
