use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("beam {index} (branch {branch}) at t={t:.6}: P is singular (|det P| = {det:.3e})")]
    SingularP {
        index: usize,
        branch: char,
        t: f64,
        det: f64,
    },

    #[error("beam {index} (branch {branch}) at t={t:.6}: Im M lost positive definiteness")]
    LostPositivity { index: usize, branch: char, t: f64 },

    #[error("beam {index} (branch {branch}) at t={t:.6}: M = R P^-1 asymmetric by {asymmetry:.3e}")]
    AsymmetricHessian {
        index: usize,
        branch: char,
        t: f64,
        asymmetry: f64,
    },

    #[error("level-set Jacobian singular at y={y:?}, xi={xi:?} (|det| = {det:.3e})")]
    SingularJacobian { y: Vec<f64>, xi: Vec<f64>, det: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical invariant (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularP { .. }
                | Error::LostPositivity { .. }
                | Error::AsymmetricHessian { .. }
                | Error::SingularJacobian { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
