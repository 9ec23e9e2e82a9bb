use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid NIfTI file: {0}")]
    Format(String),

    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedType(i16),

    #[error("truncated NIfTI data: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },

    #[error("value {value} cannot be stored as {datatype}")]
    Range { value: f64, datatype: &'static str },

    #[error("invalid spacing {0:?}: every component must be positive and finite")]
    InvalidSpacing([f64; 3]),

    #[error("degenerate intensity: {0}")]
    DegenerateIntensity(String),

    #[error("no foreground voxels above the intensity threshold")]
    EmptyForeground,

    #[error("orientation matrix is not invertible")]
    InvalidOrientation,

    #[error("mask is not binary: found value {0}")]
    NotBinary(f64),

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: [usize; 3], right: [usize; 3] },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("dataset {dataset} has {found} subjects, at least {required} required")]
    TooFewSubjects {
        dataset: String,
        found: usize,
        required: usize,
    },

    #[error("unknown dataset {0}")]
    UnknownDataset(String),

    #[error("record for subject {subject} (dataset {dataset}) is not in any evaluation set")]
    OrphanRecord { subject: String, dataset: String },

    #[error("could not place {what} after {attempts} attempts")]
    PlacementFailure { what: String, attempts: usize },

    #[error("manifest schema error: {0}")]
    Schema(String),

    #[error("duplicate manifest entry: subject {subject}, dataset {dataset}, algorithm {algorithm}")]
    DuplicateSubject {
        subject: String,
        dataset: String,
        algorithm: String,
    },

    #[error("missing files:\n{}", format_missing(.0))]
    MissingFile(Vec<MissingEntry>),

    #[error("incompatible run configurations between {0} and {1}")]
    ConfigMismatch(PathBuf, PathBuf),

    #[error("prediction grid {algo:?} does not match manual grid {manual:?}")]
    GridMismatch { manual: [usize; 3], algo: [usize; 3] },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("TOML error: {0}")]
    Toml(#[from] toml::de::Error),

    /// Failure while reading a manifest, plan or configuration, before any
    /// subject is processed.
    #[error("{0}")]
    Setup(Box<Error>),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

/// A file referenced by a manifest row that does not exist.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingEntry {
    pub subject_id: String,
    pub dataset_id: String,
    pub column: String,
    pub path: PathBuf,
}

fn format_missing(entries: &[MissingEntry]) -> String {
    entries
        .iter()
        .map(|e| {
            format!(
                "  subject {} ({}), column {}: {}",
                e.subject_id,
                e.dataset_id,
                e.column,
                e.path.display()
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn setup(self) -> Self {
        match self {
            Error::Setup(_) => self,
            other => Error::Setup(Box::new(other)),
        }
    }

    /// The innermost error, with context and setup wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } | Error::Setup(source) => source.root(),
            other => other,
        }
    }

    /// Whether the error happened while reading inputs that describe the run.
    pub fn is_setup(&self) -> bool {
        match self {
            Error::Setup(_) => true,
            Error::Context { source, .. } => source.is_setup(),
            _ => false,
        }
    }
}

pub trait ResultExt<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T, E: Into<Error>> ResultExt<T> for std::result::Result<T, E> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| e.into().context(context()))
    }
}
