//! Explicit solution of constrained linear-quadratic regulation by active-set enumeration.
//!
//! The pipeline is: [`model`] (system, weights, terminal set) → [`condense`] (parametric QP) →
//! [`enumeration`] (optimal active sets, using the certificate programs in [`lp`]) →
//! [`regions`] (critical regions and the piecewise-affine law). [`qp`] is an independent
//! online solver used for cross-checks, and [`cli`] drives everything from the command line.

pub mod cli;
pub mod condense;
pub mod enumeration;
pub mod io;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod plot;
pub mod qp;
pub mod regions;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Condense(#[from] condense::CondenseError),
    #[error(transparent)]
    Lp(#[from] lp::LpError),
    #[error(transparent)]
    Enumeration(#[from] enumeration::EnumerationError),
    #[error(transparent)]
    Region(#[from] regions::RegionError),
    #[error(transparent)]
    Io(#[from] io::IoError),
}

impl Error {
    /// Process exit code: 1 for file access, 2 for invalid input, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use model::ModelError as M;
        let model_code = |e: &M| match e {
            M::NonConvergence(_) | M::NoFiniteDetermination(_) | M::Lp(_) => 3,
            _ => 2,
        };
        match self {
            Error::Io(io::IoError::File { .. }) => 1,
            Error::Io(io::IoError::Model(e)) | Error::Model(e) => model_code(e),
            Error::Io(_) => 2,
            _ => 3,
        }
    }
}
