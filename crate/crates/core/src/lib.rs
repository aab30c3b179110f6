//! Numerical laboratory for m-subharmonic functions on gridded domains in
//! C^n: Garding-cone algebra of (1,1)-forms, finite-difference complex
//! Hessians and m-subharmonicity certification, monotone envelope solves
//! (obstacle, boundary, and relative extremal problems), m-Hessian measure
//! densities, and Jensen-measure linear programs with Edwards duality checks.

pub mod cone;
pub mod error;
pub mod envelope;
pub mod field;
pub mod grid;
pub mod io;
pub mod jensen;
pub mod measure;
pub mod simplex;
pub mod scalar;

pub use error::{Error, Result};

pub use num_complex;
pub use scalar::{real, Scalar};

/// Default scalar used by the CLI and the concrete aliases below.
pub type Real = f64;

pub type HermitianForm64 = cone::HermitianForm<Real>;
pub type Spectrum64 = cone::Spectrum<Real>;
pub type ConeReport64 = cone::ConeReport<Real>;
