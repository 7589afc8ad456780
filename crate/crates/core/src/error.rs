use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed record at line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("malformed document: {0}")]
    MalformedDocument(String),

    #[error("negative count at line {line}")]
    NegativeCount { line: usize },

    #[error("unknown label at line {line}: {label:?}")]
    UnknownLabel { line: usize, label: String },

    #[error("duplicate function {0}")]
    DuplicateFunction(String),

    #[error("duplicate block {function}:{block}")]
    DuplicateBlock { function: String, block: String },

    #[error("duplicate successor {function}:{block}→{succ}")]
    DuplicateSuccessor {
        function: String,
        block: String,
        succ: String,
    },

    #[error("dangling successor {function}:{block}→{succ}")]
    DanglingSuccessor {
        function: String,
        block: String,
        succ: String,
    },

    #[error("dangling call target {function}:{block}→{target}")]
    DanglingCallTarget {
        function: String,
        block: String,
        target: String,
    },

    #[error("duplicate indirect site {0}")]
    DuplicateSite(String),

    #[error("missing entry block {function}:{entry}")]
    MissingEntry { function: String, entry: String },

    #[error("empty block {function}:{block}")]
    EmptyBlock { function: String, block: String },

    #[error("size mismatch {function}: declared {declared}, blocks sum to {actual}")]
    SizeMismatch {
        function: String,
        declared: u64,
        actual: u64,
    },

    #[error("unknown indirect site {0}")]
    UnknownSite(String),

    #[error("unknown function {0}")]
    UnknownFunction(String),

    #[error("indirect site {site} belongs to {owner}, not {caller}")]
    SiteCallerMismatch {
        site: String,
        owner: String,
        caller: String,
    },

    #[error("profile references unknown block {function}:{block}")]
    UnknownBlock { function: String, block: String },

    #[error("block {function}:{block} is unreachable from its function entry")]
    UnreachableBlock { function: String, block: String },

    #[error("count overflow at {function}:{block}")]
    CountOverflow { function: String, block: String },

    #[error("unknown compartment {0}")]
    UnknownCompartment(String),

    #[error("compartment {0} is already retired")]
    AlreadyRetired(String),

    #[error("unknown column {0:?}")]
    UnknownColumn(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid sim spec: {0}")]
    InvalidSimSpec(String),

    #[error("empty seed list")]
    EmptySeeds,

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::InFile {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with file context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::InFile { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for errors caused by broken internal invariants rather than bad input.
    pub fn is_invariant(&self) -> bool {
        matches!(self.root(), Error::Invariant(_))
    }
}

pub trait ResultExt<T> {
    fn in_file(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn in_file(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|e| e.in_file(path))
    }
}
