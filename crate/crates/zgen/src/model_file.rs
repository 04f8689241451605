//! Versioned JSON model files.
//!
//! Every file is an envelope `{"format": "zgen-<kind>", "version": N,
//! "model": …}`. Floats are written with shortest round-trip formatting, so
//! weights reload bit for bit.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{IoError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Gan,
    Cvae,
    Gbdt,
    Nnet,
}

impl ModelKind {
    pub fn format_name(self) -> &'static str {
        match self {
            ModelKind::Gan => "zgen-gan",
            ModelKind::Cvae => "zgen-cvae",
            ModelKind::Gbdt => "zgen-gbdt",
            ModelKind::Nnet => "zgen-nnet",
        }
    }
}

#[derive(Serialize)]
struct EnvelopeOut<'a, T> {
    format: &'a str,
    version: u32,
    model: &'a T,
}

#[derive(Deserialize)]
struct EnvelopeIn<T> {
    format: String,
    version: u32,
    model: T,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

pub fn to_bytes<T: Serialize>(kind: ModelKind, model: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec(&EnvelopeOut { format: kind.format_name(), version: FORMAT_VERSION, model })
        .expect("models serialize to JSON");
    v.push(b'\n');
    v
}

pub fn from_bytes<T: DeserializeOwned>(kind: ModelKind, bytes: &[u8], path: &Path) -> Result<T> {
    let json = |source| IoError::Json { path: path.to_path_buf(), source };
    let header: Header = serde_json::from_slice(bytes).map_err(json)?;
    if header.format != kind.format_name() {
        return Err(IoError::SchemaFile {
            path: path.to_path_buf(),
            message: format!("expected a `{}` file, found `{}`", kind.format_name(), header.format),
        });
    }
    if header.version != FORMAT_VERSION {
        return Err(IoError::Version { what: kind.format_name(), found: header.version, expected: FORMAT_VERSION });
    }
    let env: EnvelopeIn<T> = serde_json::from_slice(bytes).map_err(json)?;
    debug_assert_eq!(env.format, kind.format_name());
    debug_assert_eq!(env.version, FORMAT_VERSION);
    Ok(env.model)
}

pub fn save<T: Serialize>(path: &Path, kind: ModelKind, model: &T) -> Result<()> {
    fs::write(path, to_bytes(kind, model)).map_err(|source| IoError::Write { path: path.to_path_buf(), source })
}

pub fn load<T: DeserializeOwned>(path: &Path, kind: ModelKind) -> Result<T> {
    let bytes = fs::read(path).map_err(|source| IoError::Read { path: path.to_path_buf(), source })?;
    from_bytes(kind, &bytes, path)
}
