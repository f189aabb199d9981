use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("cell ({i}, {j}) is outside the {nx}x{ny} grid")]
    Index { i: isize, j: isize, nx: usize, ny: usize },

    #[error("degenerate direction: |xi| = {norm:e} is below the gradient floor")]
    DegenerateDirection { norm: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical divergence: non-finite value at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("instance too large: {0}")]
    Size(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
