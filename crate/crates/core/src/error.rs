use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid reset state: {0}")]
    InvalidReset(String),

    /// Step size collapsed below machine resolution.
    #[error("integrator stalled at t = {time} us (step size {step:e}); system too stiff for the explicit solver")]
    Stiffness { time: f64, step: f64 },

    #[error("photon-number cutoff would exceed the hard cap {cap} at t = {time} us")]
    CutoffOverflow { cap: usize, time: f64 },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("distribution truncated at t = {time} us: leakage {leakage:e} exceeds {limit:e}")]
    Truncated { time: f64, leakage: f64, limit: f64 },

    #[error("no plateau reached within horizon {horizon} us (relative drift {drift:e}); try a horizon of at least {suggested} us")]
    Horizon {
        horizon: f64,
        drift: f64,
        suggested: f64,
    },

    #[error("curve has no defined points")]
    EmptyCurve,

    #[error("aliasing: pmf mass {mass:e} at n = {index}; increase the number of phase points above {points}")]
    Aliasing {
        mass: f64,
        index: usize,
        points: usize,
    },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("sweep point {axis} = {value}: {source}")]
    SweepPoint {
        axis: String,
        value: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_point(self, axis: &str, value: f64) -> Error {
        Error::SweepPoint {
            axis: axis.to_string(),
            value,
            source: Box::new(self),
        }
    }

    /// Short machine-readable tag, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::InvalidState(_) => "invalid-state",
            Error::InvalidReset(_) => "invalid-reset",
            Error::Stiffness { .. } => "stiffness",
            Error::CutoffOverflow { .. } => "cutoff-overflow",
            Error::Grid(_) => "grid",
            Error::Shape(_) => "shape",
            Error::Truncated { .. } => "truncated",
            Error::Horizon { .. } => "horizon",
            Error::EmptyCurve => "empty-curve",
            Error::Aliasing { .. } => "aliasing",
            Error::Fit(_) => "fit",
            Error::SweepPoint { source, .. } => source.kind(),
        }
    }
}
