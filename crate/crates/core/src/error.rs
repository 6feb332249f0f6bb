use thiserror::Error;

use crate::fol::ParseError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("power iteration did not converge after {iterations} iterations (last estimate {estimate})")]
    NotConverged { iterations: usize, estimate: f64 },

    #[error("cannot rescale a matrix with zero spectral radius")]
    ZeroSpectralRadius,

    #[error("linear system is singular")]
    Singular,

    #[error("{0}")]
    Parse(#[from] ParseError),

    #[error("invalid signature: {0}")]
    Signature(String),

    #[error("symbol `{0}` has no grounding")]
    Unmapped(String),

    #[error("quantifier over an empty domain")]
    EmptyDomain,

    #[error("theory has no clauses")]
    EmptyTheory,

    #[error("formula is not closed: free variable `{0}`")]
    OpenFormula(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("degenerate box: zero area")]
    DegenerateBox,

    #[error("no positive labels in score list")]
    NoPositives,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("infeasible dataset spec: {0}")]
    Infeasible(String),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("malformed data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
