//! Versioned JSON documents.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("{kind} document: syntax error at line {line}, column {column}: {message}")]
    Syntax {
        kind: &'static str,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{kind} document: unsupported version {found}, expected {supported}")]
    Version {
        kind: &'static str,
        found: String,
        supported: u32,
    },
    #[error("{kind} document: {path}: {message} (line {line}, column {column})")]
    Schema {
        kind: &'static str,
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{kind} document: {message}")]
    Invalid { kind: &'static str, message: String },
    #[error("{kind} document: {source}")]
    Io {
        kind: &'static str,
        #[source]
        source: std::io::Error,
    },
}

/// Parses a versioned JSON document, reporting positions on failure.
pub fn parse_versioned<T: serde::de::DeserializeOwned>(kind: &'static str, text: &str, supported: u32) -> Result<T, DocumentError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| DocumentError::Syntax {
        kind,
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    match value.get("version") {
        Some(v) if v.as_u64() == Some(supported as u64) => {}
        Some(v) => {
            return Err(DocumentError::Version {
                kind,
                found: v.to_string(),
                supported,
            })
        }
        None => {
            return Err(DocumentError::Version {
                kind,
                found: "none".into(),
                supported,
            })
        }
    }
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        DocumentError::Schema {
            kind,
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })
}

