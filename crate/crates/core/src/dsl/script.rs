//! A small workflow script language.
//!
//! ```text
//! # comment
//! x1 = agent("Custom", instruction="analyze the question")(task)
//! x2 = agent("Review", instruction="check the answer")(task, x1)
//! ```
//!
//! Every statement binds a fresh variable to one agent call. Arguments are
//! `task` or an earlier variable; consuming a variable creates an edge from
//! the agent that produced it.

use std::collections::{BTreeSet, HashMap};

use crate::graph::{AgentNode, NodeId, WorkflowGraph};
use crate::dsl::DslError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arg {
    Task,
    Var(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub var: String,
    pub agent: String,
    pub instruction: String,
    pub args: Vec<Arg>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkflowScript {
    pub statements: Vec<Statement>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Eq,
    LParen,
    RParen,
    Comma,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, DslError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let (l0, c0) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        match c {
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump(&mut chars);
                }
            }
            c if c.is_whitespace() => {
                bump(&mut chars);
            }
            '=' | '(' | ')' | ',' => {
                bump(&mut chars);
                let tok = match c {
                    '=' => Tok::Eq,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    _ => Tok::Comma,
                };
                out.push(Spanned { tok, line: l0, col: c0 });
            }
            '"' => {
                bump(&mut chars);
                let mut s = String::new();
                loop {
                    match bump(&mut chars) {
                        None | Some('\n') => {
                            return Err(DslError::syntax(l0, c0, "unterminated string literal"));
                        }
                        Some('"') => break,
                        Some('\\') => match bump(&mut chars) {
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            Some(e @ ('"' | '\\')) => s.push(e),
                            _ => return Err(DslError::syntax(l0, c0, "invalid escape in string literal")),
                        },
                        Some(ch) => s.push(ch),
                    }
                }
                out.push(Spanned { tok: Tok::Str(s), line: l0, col: c0 });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        bump(&mut chars);
                    } else {
                        break;
                    }
                }
                out.push(Spanned { tok: Tok::Ident(s), line: l0, col: c0 });
            }
            other => return Err(DslError::syntax(l0, c0, format!("unexpected character {other:?}"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map_or(self.end, |t| (t.line, t.col))
    }

    fn next(&mut self, what: &str) -> Result<Spanned, DslError> {
        let (l, c) = self.here();
        let t = self.toks.get(self.pos).cloned().ok_or_else(|| DslError::syntax(l, c, format!("expected {what}, found end of input")))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), DslError> {
        let t = self.next(what)?;
        if t.tok == tok {
            Ok(())
        } else {
            Err(DslError::syntax(t.line, t.col, format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<Spanned, DslError> {
        let t = self.next(what)?;
        match t.tok {
            Tok::Ident(_) => Ok(t),
            _ => Err(DslError::syntax(t.line, t.col, format!("expected {what}"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), DslError> {
        let t = self.ident(&format!("`{kw}`"))?;
        match &t.tok {
            Tok::Ident(s) if s == kw => Ok(()),
            _ => Err(DslError::syntax(t.line, t.col, format!("expected `{kw}`"))),
        }
    }

    fn string(&mut self, what: &str) -> Result<String, DslError> {
        let t = self.next(what)?;
        match t.tok {
            Tok::Str(s) => Ok(s),
            _ => Err(DslError::syntax(t.line, t.col, format!("expected {what}"))),
        }
    }
}

pub fn parse_script(text: &str) -> Result<WorkflowScript, DslError> {
    let toks = lex(text)?;
    let last_line = text.lines().count().max(1);
    let last_col = text.lines().last().map_or(1, |l| l.chars().count() + 1);
    let mut p = Parser { toks, pos: 0, end: (last_line, last_col) };
    let mut statements = Vec::new();
    let mut bound: HashMap<String, usize> = HashMap::new();
    while p.peek().is_some() {
        let var_tok = p.ident("variable name")?;
        let Tok::Ident(var) = var_tok.tok else { unreachable!() };
        if var == "task" || var == "agent" {
            return Err(DslError::syntax(var_tok.line, var_tok.col, format!("`{var}` cannot be assigned")));
        }
        if let Some(prev) = bound.get(&var) {
            return Err(DslError::syntax(
                var_tok.line,
                var_tok.col,
                format!("variable `{var}` already bound on line {prev}"),
            ));
        }
        p.expect(Tok::Eq, "`=`")?;
        p.keyword("agent")?;
        p.expect(Tok::LParen, "`(`")?;
        let agent = p.string("agent name string")?;
        p.expect(Tok::Comma, "`,`")?;
        p.keyword("instruction")?;
        p.expect(Tok::Eq, "`=`")?;
        let instruction = p.string("instruction string")?;
        p.expect(Tok::RParen, "`)`")?;
        p.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        loop {
            let a = p.ident("argument")?;
            let Tok::Ident(name) = a.tok else { unreachable!() };
            if name == "task" {
                args.push(Arg::Task);
            } else if bound.contains_key(&name) {
                args.push(Arg::Var(name));
            } else {
                return Err(DslError::UnboundVariable { name, line: a.line, column: a.col });
            }
            let t = p.next("`,` or `)`")?;
            match t.tok {
                Tok::Comma => continue,
                Tok::RParen => break,
                _ => return Err(DslError::syntax(t.line, t.col, "expected `,` or `)`")),
            }
        }
        bound.insert(var.clone(), var_tok.line);
        statements.push(Statement { var, agent, instruction, args, line: var_tok.line });
    }
    if statements.is_empty() {
        let (l, c) = p.end;
        return Err(DslError::syntax(l, c, "script contains no statements"));
    }
    Ok(WorkflowScript { statements })
}

/// One node per statement (ids 1..=n in statement order); an edge `i → j`
/// whenever statement `j` consumes the variable bound by statement `i`.
pub fn extract_graph(script: &WorkflowScript, id: impl Into<String>) -> WorkflowGraph {
    let mut producer: HashMap<&str, NodeId> = HashMap::new();
    let mut nodes = Vec::with_capacity(script.statements.len());
    let mut edges = Vec::new();
    for (i, st) in script.statements.iter().enumerate() {
        let node = NodeId(i as u32 + 1);
        let mut preds = BTreeSet::new();
        for a in &st.args {
            if let Arg::Var(v) = a {
                if let Some(&src) = producer.get(v.as_str()) {
                    preds.insert(src);
                }
            }
        }
        edges.extend(preds.into_iter().map(|src| (src, node)));
        nodes.push(AgentNode::new(node, format!("{}: {}", st.agent, st.instruction)));
        producer.insert(&st.var, node);
    }
    WorkflowGraph::new(id, nodes, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SINGLE_AGENT: &str = r#"x1 = agent("Custom", instruction="analyze the following question and provide a detailed answer")(task)"#;

    #[test]
    fn single_statement() {
        let s = parse_script(SINGLE_AGENT).unwrap();
        assert_eq!(s.statements.len(), 1);
        assert_eq!(s.statements[0].args, vec![Arg::Task]);
        let g = extract_graph(&s, "single");
        assert_eq!(g.nodes.len(), 1);
        assert!(g.edges.is_empty());
        assert_eq!(g.nodes[0].prompt, "Custom: analyze the following question and provide a detailed answer");
    }

    #[test]
    fn review_chain() {
        let text = format!("{SINGLE_AGENT}\nx2 = agent(\"Custom\", instruction=\"review the solution\")(task, x1)\n");
        let g = extract_graph(&parse_script(&text).unwrap(), "single");
        assert_eq!(g.node_ids(), vec![NodeId(1), NodeId(2)]);
        assert_eq!(g.edges, vec![(NodeId(1), NodeId(2))]);
    }

    #[test]
    fn empty_input_is_syntax_error() {
        assert!(matches!(parse_script(""), Err(DslError::Syntax { .. })));
        assert!(matches!(parse_script("  # only a comment\n"), Err(DslError::Syntax { .. })));
    }

    #[test]
    fn unbound_variable() {
        let err = parse_script(r#"x2 = agent("Review", instruction="check")(x1)"#).unwrap_err();
        match err {
            DslError::UnboundVariable { name, line, column } => {
                assert_eq!(name, "x1");
                assert_eq!((line, column), (1, 43));
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn syntax_error_positions() {
        let err = parse_script("x1 = agent(\"A\", instruction=\"b\")(task)\nx2 = agnt(\"A\", instruction=\"b\")(x1)").unwrap_err();
        assert!(matches!(err, DslError::Syntax { line: 2, column: 6, .. }), "{err:?}");
        let err = parse_script("x1 = agent(\"A\", instruction=\"b)(task)").unwrap_err();
        assert!(matches!(err, DslError::Syntax { line: 1, column: 29, .. }), "{err:?}");
        let err = parse_script("x1 = agent(\"A\", instruction=\"b\")(task").unwrap_err();
        assert!(matches!(err, DslError::Syntax { line: 1, .. }), "{err:?}");
        let err = parse_script("x1 = agent(\"A\", instruction=\"b\")(task)\nx1 = agent(\"A\", instruction=\"b\")(x1)").unwrap_err();
        assert!(matches!(err, DslError::Syntax { line: 2, column: 1, .. }), "{err:?}");
    }

    #[test]
    fn whitespace_and_comments() {
        let text = "# header\n  x1   =agent( \"A\" ,\n instruction = \"b # not a comment\" ) ( task )  # trailing\n";
        let s = parse_script(text).unwrap();
        assert_eq!(s.statements[0].instruction, "b # not a comment");
    }

    #[test]
    fn repeated_consumption_is_one_edge() {
        let text = r#"
            a = agent("A", instruction="x")(task)
            b = agent("B", instruction="y")(a, a, task, a)
        "#;
        let g = extract_graph(&parse_script(text).unwrap(), "r");
        assert_eq!(g.edges, vec![(NodeId(1), NodeId(2))]);
        assert!(g.validate().is_valid());
    }

    pub(crate) const CODING_SCRIPT: &str = r#"
        # coding workflow: init, three code blocks, aggregate, review, validate, respond
        init = agent("Initializer", instruction="restate the task")(task)
        b1 = agent("Coder", instruction="fill code block one")(task, init)
        b2 = agent("Coder", instruction="fill code block two")(task, init)
        b3 = agent("Coder", instruction="fill code block three")(task, init)
        merged = agent("Aggregator", instruction="aggregate the blocks")(b1, b2, b3)
        reviewed = agent("Reviewer", instruction="review the solution")(merged)
        validated = agent("Validator", instruction="verify the final version")(reviewed)
        answer = agent("Responder", instruction="give the final response")(task, init, validated)
    "#;

    #[test]
    fn coding_workflow_wiring() {
        let g = extract_graph(&parse_script(CODING_SCRIPT).unwrap(), "coding_workflow");
        let mut edges: Vec<(u32, u32)> = g.edges.iter().map(|(u, v)| (u.0, v.0)).collect();
        edges.sort();
        assert_eq!(edges, vec![(1, 2), (1, 3), (1, 4), (1, 8), (2, 5), (3, 5), (4, 5), (5, 6), (6, 7), (7, 8)]);
    }
}
