pub mod bounds;
pub mod check;
pub mod identify;
pub mod simulate;

use latentid::bounds::BoundsError;
use latentid::exec::Execution;
use latentid::identify::IdentifyError;
use latentid::{GraphError, TableError};
use serde_json::Value;

use crate::report::{Diagnostic, Failure, Inputs, EXIT_INPUT, EXIT_NOT_IDENTIFIED, EXIT_OK};

/// Per-run state shared by the subcommands.
pub struct Ctx {
    pub exec: Execution,
    pub inputs: Inputs,
    pub parameters: Value,
    pub diagnostics: Vec<Diagnostic>,
}

impl Ctx {
    pub fn new(exec: Execution) -> Self {
        Ctx {
            exec,
            inputs: Inputs::default(),
            parameters: Value::Null,
            diagnostics: Vec::new(),
        }
    }

    /// Reads an input file and records its digest.
    pub fn read(&mut self, path: &str) -> Result<String, Failure> {
        let bytes = std::fs::read(path).map_err(|e| Failure::input("io", format!("cannot read {path}: {e}")))?;
        self.inputs.push(path, &bytes);
        String::from_utf8(bytes).map_err(|_| Failure::input("io", format!("{path} is not UTF-8")))
    }

    pub fn warn(&mut self, code: &str, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic::warning(code, message));
    }
}

pub struct Outcome {
    pub outputs: Value,
    /// Human-readable result, newline terminated.
    pub summary: String,
    pub exit: u8,
}

impl Outcome {
    pub fn ok(outputs: Value, summary: String) -> Self {
        Outcome {
            outputs,
            summary,
            exit: EXIT_OK,
        }
    }
}

/// `"A,B , C"` to `["A", "B", "C"]`; empty items are rejected.
pub fn split_list(flag: &str, s: &str) -> Result<Vec<String>, Failure> {
    let items: Vec<String> = s.split(',').map(|p| p.trim().to_string()).collect();
    if items.iter().any(String::is_empty) {
        return Err(Failure::input("usage", format!("--{flag}: empty name in {s:?}")));
    }
    Ok(items)
}

pub fn table_failure(path: &str, e: TableError) -> Failure {
    Failure::input("table", format!("{path}: {e}"))
}

pub fn graph_failure(e: GraphError) -> Failure {
    Failure::input("graph", e.to_string())
}

pub fn identify_failure(e: IdentifyError) -> Failure {
    let exit = if e.is_identification_failure() { EXIT_NOT_IDENTIFIED } else { EXIT_INPUT };
    Failure::new(exit, e.code(), e.to_string()).with_condition(e.condition())
}

pub fn bounds_failure(e: BoundsError) -> Failure {
    let exit = match e {
        BoundsError::Table(_) | BoundsError::Format(_) => EXIT_INPUT,
        BoundsError::Lp(_) | BoundsError::ZeroMass(_) | BoundsError::Infeasible(_) => EXIT_NOT_IDENTIFIED,
    };
    Failure::new(exit, e.code(), e.to_string())
}
