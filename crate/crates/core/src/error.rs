use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A query touched lattice points outside the stored box.
    #[error("index out of range on axis {axis}: {value} not in [{lo}, {hi}]")]
    Range {
        axis: usize,
        value: i64,
        lo: i64,
        hi: i64,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("not doubling-admissible: {0}")]
    NotDoubling(String),

    #[error("base plan inadmissible: {0}")]
    Inadmissible(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("kernel truncation: discarded mass {discarded:.3e} exceeds {limit:.3e}; raise the truncation length (currently {length:.3e})")]
    Truncation {
        discarded: f64,
        limit: f64,
        length: f64,
    },

    #[error("quadrature did not converge: estimate {estimate} with error {error:.3e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("memory budget exceeded: need {required} bytes, allowed {allowed}")]
    Memory { required: u64, allowed: u64 },

    #[error("malformed field data: {0}")]
    Format(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
