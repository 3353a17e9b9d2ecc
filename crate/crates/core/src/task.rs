use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Coding,
    Math,
    Reason,
    Synthetic,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Coding => "coding",
            Domain::Math => "math",
            Domain::Reason => "reason",
            Domain::Synthetic => "synthetic",
        })
    }
}

/// Criterion consumed by the synthetic executor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticEvalSpec {
    #[serde(rename = "seq")]
    pub required_sequence: Vec<String>,
    pub max_nodes: usize,
    #[serde(rename = "noise", default)]
    pub noise_rate: f64,
    #[serde(default)]
    pub noise_seed: u64,
}

/// Either a synthetic criterion or an opaque descriptor carried through from
/// external task files (executed elsewhere; labels arrive via label files).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EvalSpec {
    Synthetic(SyntheticEvalSpec),
    External(serde_json::Map<String, serde_json::Value>),
}

impl EvalSpec {
    pub fn as_synthetic(&self) -> Option<&SyntheticEvalSpec> {
        match self {
            EvalSpec::Synthetic(s) => Some(s),
            EvalSpec::External(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub text: String,
    pub domain: Domain,
    #[serde(rename = "eval")]
    pub eval_spec: EvalSpec,
}

impl TaskInstance {
    pub fn synthetic(id: impl Into<String>, text: impl Into<String>, spec: SyntheticEvalSpec) -> Self {
        Self { id: id.into(), text: text.into(), domain: Domain::Synthetic, eval_spec: EvalSpec::Synthetic(spec) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_format() {
        let t: TaskInstance = serde_json::from_str(
            r#"{"id":"t1","text":"plan it","domain":"synthetic","eval":{"seq":["plan"],"max_nodes":4}}"#,
        )
        .unwrap();
        let spec = t.eval_spec.as_synthetic().unwrap();
        assert_eq!(spec.required_sequence, ["plan"]);
        assert_eq!((spec.noise_rate, spec.noise_seed), (0.0, 0));
        let back = serde_json::to_string(&t).unwrap();
        assert_eq!(back, r#"{"id":"t1","text":"plan it","domain":"synthetic","eval":{"seq":["plan"],"max_nodes":4,"noise":0.0,"noise_seed":0}}"#);

        let ext: TaskInstance =
            serde_json::from_str(r#"{"id":"h1","text":"def f()","domain":"coding","eval":{"metric":"pass@1"}}"#).unwrap();
        assert!(ext.eval_spec.as_synthetic().is_none());
    }
}
