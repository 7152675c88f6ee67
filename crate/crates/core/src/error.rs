use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("SVD did not converge for a {rows}x{cols} matrix")]
    SvdNoConvergence { rows: usize, cols: usize },

    #[error("{sites} sites exceeds the dense limit of {cap}")]
    Capacity { sites: usize, cap: usize },

    #[error("integration failed at t = {time} us: {reason}")]
    Integration { time: f64, reason: String },
}

pub type Result<T> = core::result::Result<T, Error>;
