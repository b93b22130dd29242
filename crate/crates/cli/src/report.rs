//! Machine-readable run reports and the exit-code contract.

use std::fmt;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const EXIT_OK: u8 = 0;
/// A graphical criterion was checked and does not hold.
pub const EXIT_CRITERION: u8 = 2;
/// The input is well formed but the quantity is not identified, or the
/// observed table is inconsistent with the assumed model.
pub const EXIT_NOT_IDENTIFIED: u8 = 3;
pub const EXIT_INPUT: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Info,
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub level: Level,
    pub code: String,
    pub message: String,
    /// Identifiability condition at fault, when there is one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
}

impl Diagnostic {
    pub fn new(level: Level, code: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            level,
            code: code.to_string(),
            message: message.into(),
            condition: None,
        }
    }

    pub fn warning(code: &str, message: impl Into<String>) -> Self {
        Self::new(Level::Warning, code, message)
    }

    pub fn info(code: &str, message: impl Into<String>) -> Self {
        Self::new(Level::Info, code, message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.level {
            Level::Info => "info",
            Level::Warning => "warning",
            Level::Error => "error",
        };
        write!(f, "{level}[{}]: {}", self.code, self.message)?;
        if let Some(c) = &self.condition {
            write!(f, " (condition {c})")?;
        }
        Ok(())
    }
}

/// A failed run: the exit status and the diagnostic explaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub exit: u8,
    pub diagnostic: Diagnostic,
}

impl Failure {
    pub fn new(exit: u8, code: &str, message: impl Into<String>) -> Self {
        Failure {
            exit,
            diagnostic: Diagnostic::new(Level::Error, code, message),
        }
    }

    pub fn input(code: &str, message: impl Into<String>) -> Self {
        Self::new(EXIT_INPUT, code, message)
    }

    pub fn with_condition(mut self, condition: Option<&str>) -> Self {
        self.diagnostic.condition = condition.map(str::to_string);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputFile {
    /// File name without its directory.
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Inputs {
    /// SHA-256 over the per-file digests, in argument order.
    pub digest: String,
    pub files: Vec<InputFile>,
}

impl Inputs {
    pub fn push(&mut self, path: &str, contents: &[u8]) {
        let name = std::path::Path::new(path)
            .file_name()
            .map_or_else(|| path.to_string(), |n| n.to_string_lossy().into_owned());
        self.files.push(InputFile {
            name,
            sha256: hex(&Sha256::digest(contents)),
            bytes: contents.len(),
        });
        let mut h = Sha256::new();
        for f in &self.files {
            h.update(f.sha256.as_bytes());
            h.update(b"\n");
        }
        self.digest = hex(&h.finalize());
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub inputs: Inputs,
    pub parameters: Value,
    /// `null` when the run failed before producing results.
    pub outputs: Value,
    pub diagnostics: Vec<Diagnostic>,
    pub exit_status: u8,
}

impl RunReport {
    pub fn to_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
