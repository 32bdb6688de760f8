use serde::{Deserialize, Serialize};
use std::fmt;

/// Category of a descriptor failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DescriptorErrorCode {
    /// The document is not well-formed TOML (or not UTF-8).
    Syntax,
    /// A key is missing, unknown, has the wrong type, or names something that does not exist.
    Schema,
    /// A value is well-typed but violates a domain invariant.
    Invariant,
    /// The topology graph is not connected.
    Disconnected,
}

impl DescriptorErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DescriptorErrorCode::Syntax => "SYNTAX",
            DescriptorErrorCode::Schema => "SCHEMA",
            DescriptorErrorCode::Invariant => "INVARIANT",
            DescriptorErrorCode::Disconnected => "DISCONNECTED",
        }
    }
}

impl fmt::Display for DescriptorErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Structured parse/validation error. Serializes as `{code, key_path, message}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{code} at `{key_path}`: {message}")]
pub struct DescriptorError {
    pub code: DescriptorErrorCode,
    pub key_path: String,
    pub message: String,
}

impl DescriptorError {
    pub fn new(code: DescriptorErrorCode, key_path: impl Into<String>, message: impl Into<String>) -> Self {
        DescriptorError {
            code,
            key_path: key_path.into(),
            message: message.into(),
        }
    }

    pub fn syntax(message: impl Into<String>) -> Self {
        Self::new(DescriptorErrorCode::Syntax, "", message)
    }

    pub fn schema(key_path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::new(DescriptorErrorCode::Schema, key_path, message)
    }

    pub fn invariant(key_path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::new(DescriptorErrorCode::Invariant, key_path, message)
    }

    /// One-line JSON rendering used by the CLI.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }
}

pub type Result<T> = std::result::Result<T, DescriptorError>;
