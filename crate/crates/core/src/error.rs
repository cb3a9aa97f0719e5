use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite entry at index {0}")]
    NonFinite(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("inverse transform produced imaginary part {max_imag:e} (limit {limit:e})")]
    NotConjugateSymmetric { max_imag: f64, limit: f64 },

    #[error("relative error against a zero reference")]
    ZeroReference,

    #[error("operation requires a nonzero tensor: {0}")]
    ZeroInput(&'static str),

    #[error("tube is not invertible: min spectral magnitude {min_magnitude:e}, max {max_magnitude:e}")]
    NonInvertibleTube { min_magnitude: f64, max_magnitude: f64 },

    #[error("spectral slice {slice} is rank deficient (smallest singular value {smallest:e}, ratio {ratio:e})")]
    RankDeficient {
        slice: usize,
        smallest: f64,
        ratio: f64,
    },

    #[error("singular triangular factor in spectral slice {slice} at diagonal index {index}")]
    SingularTriangular { slice: usize, index: usize },

    #[error("Golub-Kahan process broke down before the first step")]
    BreakdownAtStart,

    #[error("no invertible tube in the residual row: per-column min magnitudes {0:?}")]
    NoInvertibleTube(Vec<f64>),

    #[error("lateral slice {slice}: {source}")]
    Slice {
        slice: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad tensor file: {0}")]
    Format(String),

    #[error("session error: {0}")]
    Session(String),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}
