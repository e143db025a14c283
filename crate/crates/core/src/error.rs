use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("hermiticity violation in {block} at ({row},{col}): |h - h^H| = {deviation:e}")]
    NotHermitian {
        block: String,
        row: usize,
        col: usize,
        deviation: f64,
    },

    #[error("dimension mismatch: {first} is {first_dims:?} but {second} is {second_dims:?}")]
    DimensionMismatch {
        first: String,
        first_dims: (usize, usize),
        second: String,
        second_dims: (usize, usize),
    },

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: String, message: String },

    #[error("transverse momentum supplied for a model without a periodic transverse direction")]
    UnexpectedMomentum,

    #[error("transverse momentum required for a transversely periodic model")]
    MissingMomentum,

    #[error("eta must be positive and finite, got {0}")]
    InvalidEta(f64),

    #[error("surface Green function did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular linear system in {context} (condition estimate {condition:e})")]
    Singular { context: String, condition: f64 },

    #[error("ill-conditioned Bloch pencil: {message} (condition estimate {condition:e})")]
    IllConditionedPencil { message: String, condition: f64 },

    #[error(
        "open-channel count mismatch: {bloch} outgoing Bloch states vs {channels} open channels \
         (tau_prop = {tau_prop:e}, tau_open = {tau_open:e})"
    )]
    OpenCountMismatch {
        bloch: usize,
        channels: usize,
        tau_prop: f64,
        tau_open: f64,
    },

    #[error("channel {index} is closed (lambda = {lambda:e}); unit-flux normalization is undefined")]
    ClosedChannelFlux { index: usize, lambda: f64 },

    #[error("insufficient points: {found} inside the fit window, at least {required} required")]
    InsufficientPoints { found: usize, required: usize },

    #[error("fit window starts at {dmin:e}, inside the broadening region |E - E0| < {limit:e}")]
    WindowInBroadening { dmin: f64, limit: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::Singular { .. }
                | Error::IllConditionedPencil { .. }
                | Error::OpenCountMismatch { .. }
        )
    }
}
