use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::dsl::DslError;
use crate::graph::WorkflowGraph;
use crate::task::TaskInstance;

/// Parses one JSON record per non-blank line; errors carry 1-based line numbers.
pub fn read_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<(usize, T)>, DslError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|e| DslError::Format { line: i + 1, message: e.to_string() })?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("records serialize"));
        s.push('\n');
    }
    s
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), DslError> {
    fs::write(path, to_jsonl(records)).map_err(|source| DslError::Io { path: path.to_owned(), source })
}

fn read(path: &Path) -> Result<String, DslError> {
    fs::read_to_string(path).map_err(|source| DslError::Io { path: path.to_owned(), source })
}

pub fn parse_graphs(text: &str) -> Result<Vec<WorkflowGraph>, DslError> {
    let mut ids = HashSet::new();
    let mut out = Vec::new();
    for (line, g) in read_jsonl::<WorkflowGraph>(text)? {
        let report = g.validate();
        if !report.is_valid() {
            return Err(DslError::Format { line, message: format!("graph {}: {report}", g.id) });
        }
        if !ids.insert(g.id.clone()) {
            return Err(DslError::Format { line, message: format!("duplicate graph id {}", g.id) });
        }
        out.push(g);
    }
    Ok(out)
}

pub fn parse_tasks(text: &str) -> Result<Vec<TaskInstance>, DslError> {
    let mut ids = HashSet::new();
    let mut out = Vec::new();
    for (line, t) in read_jsonl::<TaskInstance>(text)? {
        if t.text.trim().is_empty() {
            return Err(DslError::Format { line, message: format!("task {} has empty text", t.id) });
        }
        if !ids.insert(t.id.clone()) {
            return Err(DslError::Format { line, message: format!("duplicate task id {}", t.id) });
        }
        out.push(t);
    }
    Ok(out)
}

pub fn load_graphs(path: &Path) -> Result<Vec<WorkflowGraph>, DslError> {
    parse_graphs(&read(path)?)
}

pub fn load_tasks(path: &Path) -> Result<Vec<TaskInstance>, DslError> {
    parse_tasks(&read(path)?)
}
