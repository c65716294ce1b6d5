use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("scatterer at elevation {elevation} m lies outside the grid [{min}, {max}]")]
    OutOfGrid { elevation: f64, min: f64, max: f64 },

    #[error("cell (azimuth {azimuth}, range {range}) holds {count} scatterers, cap is {cap}")]
    SparsityExceeded {
        azimuth: usize,
        range: usize,
        count: usize,
        cap: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("solver diverged: objective rose for {0} consecutive iterations, reduce the step")]
    StepSize(usize),

    #[error("cell (azimuth {azimuth}, range {range}): {source}")]
    Cell {
        azimuth: usize,
        range: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("range slice {range}: {source}")]
    Slice {
        range: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("graph error: {0}")]
    Graph(String),

    #[error("non-finite loss at epoch {epoch}, slice {slice}")]
    NonFinite { epoch: usize, slice: usize },

    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),

    #[error("archive: {0}")]
    Archive(String),

    #[error("{path}: {source}")]
    Config {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-parseable category used on the command line.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidGeometry(_) | Error::InvalidParameter(_) => "invalid-parameter",
            Error::OutOfGrid { .. } | Error::SparsityExceeded { .. } => "scene",
            Error::Shape(_) => "shape",
            Error::StepSize(_) | Error::NonFinite { .. } => "numeric",
            Error::Cell { source, .. } | Error::Slice { source, .. } | Error::Stage { source, .. } => {
                source.category()
            }
            Error::Graph(_) => "graph",
            Error::UndefinedMetric(_) => "metric",
            Error::Archive(_) => "archive",
            Error::Config { .. } => "config",
            Error::Io { .. } => "io",
        }
    }

    /// Process exit code for this error category.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 3,
            "io" => 4,
            "archive" => 5,
            "invalid-parameter" | "scene" | "shape" => 6,
            "numeric" => 7,
            "metric" => 8,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage {
            stage,
            source: Box::new(e),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
