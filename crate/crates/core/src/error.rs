use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = VaxError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum VaxError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("{0} class(es) after cleaning, at least 2 are required")]
    TooFewClasses(usize),
    #[error("no rows left after cleaning")]
    NoRows,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("{0} row(s) share identical values but carry different labels")]
    AmbiguousRows(usize),
    #[error("cannot discretize a constant target")]
    ConstantTarget,
    #[error("discretization needs at least 2 bins, got {0}")]
    InvalidBinCount(usize),
    #[error("unknown class {0}")]
    UnknownClass(String),
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("partition is empty")]
    EmptyPartition,
    #[error("partitions overlap")]
    OverlappingPartitions,
    #[error("confidence is undefined for a pattern that supports no rows")]
    UndefinedConfidence,
    #[error("degenerate contingency table: {0}")]
    DegenerateTable(&'static str),
    #[error("tree count must be at least 1")]
    ZeroTrees,
    #[error("lambda {0} is outside [0, 1]")]
    InvalidLambda(f64),
    #[error("lambda grid is empty")]
    EmptyGrid,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("silhouette needs at least two groups")]
    SingleGroup,
    #[error("all high-dimensional distances are zero")]
    ZeroDistances,
    #[error("distance lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid permutation of {0} rows")]
    InvalidPermutation(usize),
    #[error("pattern set is empty")]
    EmptyPatternSet,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("internal consistency failure: {0}")]
    Inconsistent(String),
    #[error("artifact {path}: {source}")]
    Artifact {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<VaxError>,
    },
}

impl VaxError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        VaxError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        VaxError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage wrappers.
    pub fn root(&self) -> &VaxError {
        match self {
            VaxError::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True when the failure is an internal invariant violation rather than
    /// bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self.root(), VaxError::Inconsistent(_))
    }

    /// Process exit code: 2 for input errors, 3 for consistency failures.
    pub fn exit_code(&self) -> i32 {
        if self.is_internal() {
            3
        } else {
            2
        }
    }
}
