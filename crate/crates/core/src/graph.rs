//! Workflow DAG data model: agents with system prompts, task-dependency edges,
//! validation and topological utilities.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::cmp::Reverse;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of an agent inside one workflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentNode {
    pub id: NodeId,
    pub prompt: String,
}

impl AgentNode {
    pub fn new(id: impl Into<NodeId>, prompt: impl Into<String>) -> Self {
        Self { id: id.into(), prompt: prompt.into() }
    }
}

/// An agentic workflow. Construction does not validate; call
/// [`WorkflowGraph::validate`] or [`WorkflowGraph::validated`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowGraph {
    pub id: String,
    pub nodes: Vec<AgentNode>,
    pub edges: Vec<(NodeId, NodeId)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateNode(NodeId),
    EmptyPrompt(NodeId),
    SelfLoop(NodeId),
    DuplicateEdge(NodeId, NodeId),
    DanglingEdge(NodeId, NodeId),
    /// One directed cycle, listed in traversal order starting from its
    /// smallest reachable entry point.
    Cycle(Vec<NodeId>),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateNode(id) => write!(f, "duplicate node id {id}"),
            Violation::EmptyPrompt(id) => write!(f, "node {id} has an empty prompt"),
            Violation::SelfLoop(id) => write!(f, "self-loop on node {id}"),
            Violation::DuplicateEdge(u, v) => write!(f, "duplicate edge ({u},{v})"),
            Violation::DanglingEdge(u, v) => write!(f, "edge ({u},{v}) references a missing node"),
            Violation::Cycle(c) => {
                let ids: Vec<String> = c.iter().map(|n| n.to_string()).collect();
                write!(f, "cycle [{}]", ids.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn cycle(&self) -> Option<&[NodeId]> {
        self.violations.iter().find_map(|v| match v {
            Violation::Cycle(c) => Some(c.as_slice()),
            _ => None,
        })
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph {graph} is not a valid DAG: {report}")]
    CyclicGraph { graph: String, report: ValidationReport },
    #[error("unknown node {node} in graph {graph}")]
    UnknownNode { graph: String, node: NodeId },
}

impl WorkflowGraph {
    pub fn new(id: impl Into<String>, nodes: Vec<AgentNode>, edges: Vec<(NodeId, NodeId)>) -> Self {
        Self { id: id.into(), nodes, edges }
    }

    /// Convenience constructor from `(id, prompt)` pairs and integer edges.
    pub fn from_parts(id: impl Into<String>, nodes: &[(u32, &str)], edges: &[(u32, u32)]) -> Self {
        Self::new(
            id,
            nodes.iter().map(|&(i, p)| AgentNode::new(i, p)).collect(),
            edges.iter().map(|&(u, v)| (NodeId(u), NodeId(v))).collect(),
        )
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.nodes.iter().map(|n| n.id).collect()
    }

    pub fn node(&self, id: NodeId) -> Option<&AgentNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Position of each node id in `nodes`.
    pub fn index_map(&self) -> HashMap<NodeId, usize> {
        self.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect()
    }

    pub fn contains_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.edges.iter().any(|&(a, b)| a == u && b == v)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut seen = BTreeSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id) {
                violations.push(Violation::DuplicateNode(n.id));
            }
            if n.prompt.trim().is_empty() {
                violations.push(Violation::EmptyPrompt(n.id));
            }
        }
        let mut edge_set = BTreeSet::new();
        for &(u, v) in &self.edges {
            if u == v {
                violations.push(Violation::SelfLoop(u));
            }
            if !seen.contains(&u) || !seen.contains(&v) {
                violations.push(Violation::DanglingEdge(u, v));
            }
            if !edge_set.insert((u, v)) {
                violations.push(Violation::DuplicateEdge(u, v));
            }
        }
        if let Some(cycle) = find_cycle(&seen, &edge_set) {
            violations.push(Violation::Cycle(cycle));
        }
        ValidationReport { violations }
    }

    pub fn validated(self) -> Result<Self, GraphError> {
        let report = self.validate();
        if report.is_valid() {
            Ok(self)
        } else {
            Err(GraphError::CyclicGraph { graph: self.id.clone(), report })
        }
    }

    fn ensure_valid(&self) -> Result<(), GraphError> {
        let report = self.validate();
        if report.is_valid() {
            Ok(())
        } else {
            Err(GraphError::CyclicGraph { graph: self.id.clone(), report })
        }
    }

    /// Kahn's algorithm; among ready nodes the smallest id goes first.
    pub fn topo_order(&self) -> Result<Vec<NodeId>, GraphError> {
        self.ensure_valid()?;
        let mut indegree: BTreeMap<NodeId, usize> = self.nodes.iter().map(|n| (n.id, 0)).collect();
        let mut out: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for &(u, v) in &self.edges {
            *indegree.get_mut(&v).expect("validated") += 1;
            out.entry(u).or_default().push(v);
        }
        let mut ready: BinaryHeap<Reverse<NodeId>> =
            indegree.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| Reverse(n)).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(Reverse(n)) = ready.pop() {
            order.push(n);
            for &v in out.get(&n).map(Vec::as_slice).unwrap_or(&[]) {
                let d = indegree.get_mut(&v).expect("validated");
                *d -= 1;
                if *d == 0 {
                    ready.push(Reverse(v));
                }
            }
        }
        Ok(order)
    }

    pub fn in_neighbors(&self, node: NodeId) -> Result<BTreeSet<NodeId>, GraphError> {
        if self.node(node).is_none() {
            return Err(GraphError::UnknownNode { graph: self.id.clone(), node });
        }
        Ok(self.edges.iter().filter(|&&(_, v)| v == node).map(|&(u, _)| u).collect())
    }

    pub fn out_neighbors(&self, node: NodeId) -> Result<BTreeSet<NodeId>, GraphError> {
        if self.node(node).is_none() {
            return Err(GraphError::UnknownNode { graph: self.id.clone(), node });
        }
        Ok(self.edges.iter().filter(|&&(u, _)| u == node).map(|&(_, v)| v).collect())
    }

    /// Predecessor lists by node position (not id), in edge-list order.
    pub fn in_adjacency(&self) -> Vec<Vec<usize>> {
        let idx = self.index_map();
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (u, v) in &self.edges {
            if let (Some(&iu), Some(&iv)) = (idx.get(u), idx.get(v)) {
                adj[iv].push(iu);
            }
        }
        adj
    }

    /// Successor lists by node position.
    pub fn out_adjacency(&self) -> Vec<Vec<usize>> {
        let idx = self.index_map();
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (u, v) in &self.edges {
            if let (Some(&iu), Some(&iv)) = (idx.get(u), idx.get(v)) {
                adj[iu].push(iv);
            }
        }
        adj
    }

    /// True if `to` is reachable from `from` along directed edges.
    pub fn reaches(&self, from: NodeId, to: NodeId) -> bool {
        let idx = self.index_map();
        let (Some(&s), Some(&t)) = (idx.get(&from), idx.get(&to)) else {
            return false;
        };
        let adj = self.out_adjacency();
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![s];
        while let Some(n) = stack.pop() {
            if n == t {
                return true;
            }
            if std::mem::replace(&mut seen[n], true) {
                continue;
            }
            stack.extend(adj[n].iter().copied());
        }
        false
    }

    /// Number of weakly connected components.
    pub fn component_count(&self) -> usize {
        let idx = self.index_map();
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (u, v) in &self.edges {
            if let (Some(&a), Some(&b)) = (idx.get(u), idx.get(v)) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra] = rb;
                }
            }
        }
        (0..self.nodes.len()).filter(|&i| find(&mut parent, i) == i).count()
    }

    /// Copy with `node` and all incident edges removed.
    pub fn without_node(&self, node: NodeId) -> WorkflowGraph {
        WorkflowGraph {
            id: self.id.clone(),
            nodes: self.nodes.iter().filter(|n| n.id != node).cloned().collect(),
            edges: self.edges.iter().filter(|&&(u, v)| u != node && v != node).copied().collect(),
        }
    }

    /// Applies `map` to every node id, keeping node and edge order.
    pub fn relabeled(&self, map: &HashMap<NodeId, NodeId>) -> WorkflowGraph {
        WorkflowGraph {
            id: self.id.clone(),
            nodes: self.nodes.iter().map(|n| AgentNode { id: map[&n.id], prompt: n.prompt.clone() }).collect(),
            edges: self.edges.iter().map(|(u, v)| (map[u], map[v])).collect(),
        }
    }

    pub fn max_node_id(&self) -> Option<NodeId> {
        self.nodes.iter().map(|n| n.id).max()
    }
}

fn find_cycle(nodes: &BTreeSet<NodeId>, edges: &BTreeSet<(NodeId, NodeId)>) -> Option<Vec<NodeId>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }
    let mut out: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for &(u, v) in edges {
        if nodes.contains(&u) && nodes.contains(&v) && u != v {
            out.entry(u).or_default().push(v);
        }
    }
    let mut mark: BTreeMap<NodeId, Mark> = nodes.iter().map(|&n| (n, Mark::White)).collect();
    for &start in nodes {
        if mark[&start] != Mark::White {
            continue;
        }
        // iterative DFS keeping the current path
        let mut path: Vec<NodeId> = vec![start];
        let mut cursor: Vec<usize> = vec![0];
        mark.insert(start, Mark::Grey);
        while let Some(&top) = path.last() {
            let i = *cursor.last().expect("parallel stacks");
            let succ = out.get(&top).map(Vec::as_slice).unwrap_or(&[]);
            if i < succ.len() {
                *cursor.last_mut().expect("parallel stacks") += 1;
                let next = succ[i];
                match mark[&next] {
                    Mark::White => {
                        mark.insert(next, Mark::Grey);
                        path.push(next);
                        cursor.push(0);
                    }
                    Mark::Grey => {
                        let pos = path.iter().position(|&n| n == next).expect("grey nodes are on the path");
                        return Some(path[pos..].to_vec());
                    }
                    Mark::Black => {}
                }
            } else {
                mark.insert(top, Mark::Black);
                path.pop();
                cursor.pop();
            }
        }
    }
    None
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn coding_workflow() -> WorkflowGraph {
        WorkflowGraph::from_parts(
            "coding_workflow",
            &[
                (1, "init"),
                (2, "block a"),
                (3, "block b"),
                (4, "block c"),
                (5, "aggregate"),
                (6, "review"),
                (7, "validate"),
                (8, "respond"),
            ],
            &[(1, 2), (1, 3), (1, 4), (2, 5), (3, 5), (4, 5), (5, 6), (6, 7), (1, 8), (7, 8)],
        )
    }

    #[test]
    fn single_node_is_valid() {
        let g = WorkflowGraph::from_parts("g", &[(1, "solo")], &[]);
        assert!(g.validate().is_valid());
    }

    #[test]
    fn two_cycle_is_named() {
        let g = WorkflowGraph::from_parts("g", &[(1, "a"), (2, "b")], &[(1, 2), (2, 1)]);
        let r = g.validate();
        assert_eq!(r.cycle(), Some(&[NodeId(1), NodeId(2)][..]));
        assert!(matches!(g.topo_order(), Err(GraphError::CyclicGraph { .. })));
    }

    #[test]
    fn structural_violations() {
        let g = WorkflowGraph::from_parts("g", &[(1, "a"), (1, " "), (2, "b")], &[(2, 2), (1, 2), (1, 2), (1, 9)]);
        let v = g.validate().violations;
        assert!(v.contains(&Violation::DuplicateNode(NodeId(1))));
        assert!(v.contains(&Violation::EmptyPrompt(NodeId(1))));
        assert!(v.contains(&Violation::SelfLoop(NodeId(2))));
        assert!(v.contains(&Violation::DuplicateEdge(NodeId(1), NodeId(2))));
        assert!(v.contains(&Violation::DanglingEdge(NodeId(1), NodeId(9))));
    }

    #[test]
    fn topo_chain_and_star() {
        let chain = WorkflowGraph::from_parts("c", &[(1, "a"), (2, "b"), (3, "c")], &[(1, 2), (2, 3)]);
        assert_eq!(chain.topo_order().unwrap(), vec![NodeId(1), NodeId(2), NodeId(3)]);
        let star = WorkflowGraph::from_parts("s", &[(3, "c"), (2, "b"), (1, "a")], &[(1, 3), (1, 2)]);
        assert_eq!(star.topo_order().unwrap(), vec![NodeId(1), NodeId(2), NodeId(3)]);
    }

    #[test]
    fn coding_workflow_order_and_neighbors() {
        let g = coding_workflow();
        let order = g.topo_order().unwrap();
        assert_eq!(order.first(), Some(&NodeId(1)));
        assert_eq!(order.last(), Some(&NodeId(8)));
        let preds = g.in_neighbors(NodeId(5)).unwrap();
        assert_eq!(preds, [2, 3, 4].into_iter().map(NodeId).collect());
        assert!(g.in_neighbors(NodeId(1)).unwrap().is_empty());
        assert!(matches!(g.in_neighbors(NodeId(42)), Err(GraphError::UnknownNode { .. })));
    }

    #[test]
    fn chain_in_neighbors() {
        let g = WorkflowGraph::from_parts("c", &[(1, "a"), (2, "b")], &[(1, 2)]);
        assert_eq!(g.in_neighbors(NodeId(2)).unwrap(), [NodeId(1)].into_iter().collect());
    }

    #[test]
    fn components() {
        let g = WorkflowGraph::from_parts("c", &[(1, "a"), (2, "b"), (3, "c")], &[(1, 2)]);
        assert_eq!(g.component_count(), 2);
        assert_eq!(coding_workflow().component_count(), 1);
    }

    /// Independent cycle check: a cycle exists iff some node reaches itself
    /// through a path of length ≥ 1, found by enumerating simple paths.
    fn has_cycle_by_paths(g: &WorkflowGraph) -> bool {
        let adj = g.out_adjacency();
        fn walk(adj: &[Vec<usize>], start: usize, at: usize, on_path: &mut Vec<bool>) -> bool {
            for &n in &adj[at] {
                if n == start {
                    return true;
                }
                if !on_path[n] {
                    on_path[n] = true;
                    if walk(adj, start, n, on_path) {
                        return true;
                    }
                    on_path[n] = false;
                }
            }
            false
        }
        (0..adj.len()).any(|s| {
            let mut on = vec![false; adj.len()];
            on[s] = true;
            walk(&adj, s, s, &mut on)
        })
    }

    fn arb_graph(max_n: u32) -> impl Strategy<Value = WorkflowGraph> {
        (1..=max_n).prop_flat_map(|n| {
            let pairs = proptest::collection::vec((1..=n, 1..=n), 0..(2 * n as usize + 1));
            (Just(n), pairs).prop_map(|(n, pairs)| {
                let nodes: Vec<(u32, &str)> = (1..=n).map(|i| (i, "agent")).collect();
                let mut edges: Vec<(u32, u32)> = pairs.into_iter().filter(|(u, v)| u != v).collect();
                edges.sort();
                edges.dedup();
                WorkflowGraph::from_parts("p", &nodes, &edges)
            })
        })
    }

    fn arb_dag(max_n: u32) -> impl Strategy<Value = WorkflowGraph> {
        (1..=max_n)
            .prop_flat_map(|n| {
                (Just(n), proptest::collection::vec(any::<bool>(), (n * n) as usize), Just((1..=n).collect::<Vec<u32>>()).prop_shuffle())
            })
            .prop_map(|(n, mask, perm)| {
                let nodes: Vec<(u32, &str)> = perm.iter().map(|&i| (i, "agent")).collect();
                let mut edges = Vec::new();
                for a in 0..n as usize {
                    for b in a + 1..n as usize {
                        if mask[a * n as usize + b] {
                            edges.push((perm[a], perm[b]));
                        }
                    }
                }
                WorkflowGraph::from_parts("d", &nodes, &edges)
            })
    }

    proptest! {
        #[test]
        fn cycle_detection_matches_path_oracle(g in arb_graph(7)) {
            let report = g.validate();
            prop_assert_eq!(report.cycle().is_some(), has_cycle_by_paths(&g));
            if let Some(c) = report.cycle() {
                for w in 0..c.len() {
                    prop_assert!(g.contains_edge(c[w], c[(w + 1) % c.len()]));
                }
            }
        }

        #[test]
        fn topo_order_is_a_linear_extension(g in arb_dag(10)) {
            let order = g.topo_order().unwrap();
            let mut sorted = order.clone();
            sorted.sort();
            let mut ids = g.node_ids();
            ids.sort();
            prop_assert_eq!(sorted, ids);
            let pos: HashMap<NodeId, usize> = order.iter().enumerate().map(|(i, &n)| (n, i)).collect();
            for (u, v) in &g.edges {
                prop_assert!(pos[u] < pos[v]);
            }
        }

        #[test]
        fn in_neighbors_commutes_with_relabeling(g in arb_dag(8), shift in 1u32..50) {
            let map: HashMap<NodeId, NodeId> = g.nodes.iter().map(|n| (n.id, NodeId(n.id.0 * 7 + shift))).collect();
            let h = g.relabeled(&map);
            for n in &g.nodes {
                let a: BTreeSet<NodeId> = g.in_neighbors(n.id).unwrap().into_iter().map(|x| map[&x]).collect();
                prop_assert_eq!(a, h.in_neighbors(map[&n.id]).unwrap());
            }
        }
    }
}
