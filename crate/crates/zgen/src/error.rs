use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("cannot read `{path}`: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write `{path}`: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: expected {expected} fields, found {found}")]
    Arity { line: u64, expected: usize, found: usize },
    #[error("line {line}, column `{column}`: cannot parse `{value}` as {kind}")]
    Parse { line: u64, column: String, value: String, kind: &'static str },
    #[error("column `{0}` declared in the schema is missing from the CSV header")]
    MissingColumn(String),
    #[error("invalid schema file `{path}`: {message}")]
    SchemaFile { path: PathBuf, message: String },
    #[error("JSON error in `{path}`: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("unsupported {what} format version {found} (expected {expected})")]
    Version { what: &'static str, found: u32, expected: u32 },
    #[error(transparent)]
    Core(#[from] zgen_core::Error),
}

pub type Result<T, E = IoError> = std::result::Result<T, E>;
