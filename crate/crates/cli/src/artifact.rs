//! Artifact headers, output sinks and machine-readable error records.

use std::fmt;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex SHA-256 of the canonical JSON form of a command's settings.
pub fn config_hash(command: &str, settings: &impl Serialize) -> String {
    let json = serde_json::to_string(&serde_json::json!({ "command": command, "settings": settings }))
        .expect("settings serialize");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// First line of every text artifact.
pub fn header_line(hash: &str) -> String {
    format!("# pathnat {VERSION} config={hash}")
}

#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        CliError { kind, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new("usage", message)
    }

    pub fn io(path: &FsPath, e: std::io::Error) -> Self {
        Self::new("io", format!("{}: {e}", path.display()))
    }

    /// One-line JSON record written to stderr on failure.
    pub fn record(&self) -> String {
        serde_json::json!({ "error": { "kind": self.kind, "message": self.message } }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl From<pathnat_core::Error> for CliError {
    fn from(e: pathnat_core::Error) -> Self {
        CliError::new(e.kind(), e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn read_text(path: &FsPath) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Writes `body` after the header line, to `out` or to stdout.
pub fn emit(out: Option<&PathBuf>, hash: &str, body: &str) -> CliResult<()> {
    let text = format!("{}\n{body}", header_line(hash));
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::new("io", format!("stdout: {e}")))
        }
    }
}

/// Arrow-notation paths, one per line; blank and `#` lines skipped.
pub fn read_paths(path: &FsPath) -> CliResult<Vec<pathnat_core::graph::Path>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            l.trim()
                .parse()
                .map_err(|e: pathnat_core::Error| CliError::new("parse", format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Words, one per line; blank and `#` lines skipped.
pub fn read_words(path: &FsPath) -> CliResult<std::collections::BTreeSet<String>> {
    Ok(read_text(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}
