use std::path::PathBuf;

/// Errors raised by the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dipole singularity between {first} and {second}: separation {distance:.3e} m below guard radius")]
    Singularity {
        first: String,
        second: String,
        distance: f64,
    },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("boundary polygon self-intersects near ({x:.4}, {y:.4}) mm")]
    SelfIntersection { x: f64, y: f64 },

    #[error("region crosses the axis of revolution (y = {y:.4e})")]
    AxisCrossing { y: f64 },

    #[error("failed to parse {what} at `{path}`: {message}")]
    Parse {
        what: String,
        path: String,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
