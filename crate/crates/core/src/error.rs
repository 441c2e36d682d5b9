use thiserror::Error;

use crate::probes::ProbeState;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular Green's function at energy {energy:.17e}")]
    Singular { energy: f64 },

    #[error(
        "quadrature did not converge: worst panel [{lo:.6e}, {hi:.6e}] has error {error:.3e} \
         (total {total_error:.3e} > tolerance {tolerance:.3e})"
    )]
    Quadrature { lo: f64, hi: f64, error: f64, total_error: f64, tolerance: f64 },

    #[error("floating-probe solve failed: {reason} (best residual {:.3e} after {} iterations)", best.residual_norm, best.iterations)]
    ProbeSolve { reason: String, best: Box<ProbeState> },

    #[error("reservoir size did not converge; trace (M, change): {trace:?}")]
    ReservoirConvergence { trace: Vec<(usize, f64)> },

    #[error("eigenvalue iteration did not converge for a matrix of size {0}")]
    Eigen(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
