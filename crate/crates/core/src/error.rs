use thiserror::Error;

use crate::grid::{DyadicCube, DyadicGrid};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: DyadicGrid, right: DyadicGrid },

    #[error("cube {0} lies at the finest level and has no children")]
    FinestLevel(DyadicCube),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error(
        "target characteristic 2^{requested} is unreachable at depth {depth}; \
         achievable range is [1, {max_characteristic:.6e}]"
    )]
    Unreachable {
        requested: u32,
        depth: u32,
        max_characteristic: f64,
    },

    #[error(
        "power iteration did not converge after {iterations} iterations \
         (last bracket {previous:.12e} .. {last:.12e})"
    )]
    NotConverged {
        iterations: usize,
        previous: f64,
        last: f64,
    },

    #[error("structural violation: {0}")]
    Structural(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn ensure_same_grid(left: DyadicGrid, right: DyadicGrid) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(Error::GridMismatch { left, right })
    }
}
