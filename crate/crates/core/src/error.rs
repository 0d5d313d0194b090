use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value {value} at {location}")]
    NonFinite { location: String, value: f64 },

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("point ({t}, {x:?}, {y:?}) lies outside the domain of the test function")]
    OutsideDomain { t: f64, x: Vec<f64>, y: Vec<f64> },

    #[error("{clamped} of {total} samples clamped to the space grid (fraction {fraction:.3e} above {threshold:.1e})")]
    ClampedFraction {
        clamped: usize,
        total: usize,
        fraction: f64,
        threshold: f64,
    },

    #[error("no certifiable domain: {0}")]
    NoCertifiableDomain(String),

    #[error("driver `{label}` failed validation ({growth} growth, {regularity} regularity violations)")]
    DriverValidation {
        label: String,
        growth: usize,
        regularity: usize,
    },

    #[error("empty test-function set")]
    EmptyFamily,

    #[error("stage `{stage}` failed at k = {k}: {source}")]
    Stage {
        stage: &'static str,
        k: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str, k: f64) -> Error {
        Error::Stage {
            stage,
            k,
            source: Box::new(self),
        }
    }
}
