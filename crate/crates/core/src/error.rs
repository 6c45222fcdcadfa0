use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("band W = {band} at resolution t = {resolution} gives W*2^t = {product}, which is not a positive integer")]
    NonIntegralGrid {
        band: f64,
        resolution: u32,
        product: f64,
    },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("frequency grids differ: {0}")]
    GridMismatch(String),

    #[error("{what} requires n ≥ {required} observations, got n = {actual}")]
    SampleTooSmall {
        what: &'static str,
        required: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "cannot parse model spec {spec:?}: {reason}; expected {}",
        crate::densities::MODEL_GRAMMAR
    )]
    ModelSpec { spec: String, reason: String },

    #[error("degenerate breakpoint: |f^|^2 carries no mass between {lower} and {upper}")]
    DegenerateBreakpoint { lower: f64, upper: f64 },

    #[error("grid resolution t = {grid_resolution} is too coarse for wavelet scale s = {scale}")]
    ResolutionTooCoarse { grid_resolution: u32, scale: i32 },

    #[error("{path}:{line}: cannot parse {text:?} as a real number")]
    ParseValue {
        path: String,
        line: usize,
        text: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
