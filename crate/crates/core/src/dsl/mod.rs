//! Workflow ingestion: the script language and the JSONL record formats.

mod jsonl;
mod script;

pub use jsonl::{load_graphs, load_tasks, parse_graphs, parse_tasks, read_jsonl, to_jsonl, write_jsonl};
pub use script::{extract_graph, parse_script, Arg, Statement, WorkflowScript};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DslError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unbound variable `{name}` at {line}:{column}")]
    UnboundVariable { name: String, line: usize, column: usize },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

impl DslError {
    pub(crate) fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        DslError::Syntax { line, column, message: message.into() }
    }
}
