use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, FigError>;

#[derive(Debug, Error)]
pub enum FigError {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Every pairwise distance is zero, so no kernel bandwidth can be chosen.
    #[error("all points are identical; the affinity graph is undefined")]
    IdenticalPoints,

    #[error("point {0} has no affinity to any point (zero row in the kernel)")]
    DisconnectedPoint(usize),

    #[error("correlation undefined: zero variance in {0}")]
    UndefinedCorrelation(&'static str),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl FigError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            FigError::InvalidData(_) | FigError::InvalidConfig(_) => 1,
            _ => 2,
        }
    }
}

pub(crate) fn invalid_data(msg: impl Into<String>) -> FigError {
    FigError::InvalidData(msg.into())
}

pub(crate) fn invalid_config(msg: impl Into<String>) -> FigError {
    FigError::InvalidConfig(msg.into())
}
