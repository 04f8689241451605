pub mod commands;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod manifest;
pub mod model_file;
pub mod par;
pub mod schema_file;

pub use error::{IoError, Result};
