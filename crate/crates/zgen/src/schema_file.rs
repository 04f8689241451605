//! Schema sidecar files.
//!
//! ```toml
//! [[column]]
//! name = "Survived"
//! kind = "categorical"   # numeric | categorical | datetime
//! role = "target"        # feature | target | time_index | macro
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use zgen_core::table::{ColumnSpec, Schema};

use crate::error::{IoError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaFile {
    #[serde(rename = "column")]
    pub columns: Vec<ColumnSpec>,
}

pub fn parse_schema(text: &str, path: &Path) -> Result<Schema> {
    let file: SchemaFile =
        toml::from_str(text).map_err(|e| IoError::SchemaFile { path: path.to_path_buf(), message: e.to_string() })?;
    Ok(Schema::new(file.columns)?)
}

pub fn load_schema(path: &Path) -> Result<Schema> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Read { path: path.to_path_buf(), source })?;
    parse_schema(&text, path)
}
