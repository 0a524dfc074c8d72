//! Graph IR shared by both disambiguation phases.
//!
//! Measures are nodes. A `causes` relationship becomes one directed edge; an
//! unresolved `relates` becomes a pair of opposed edges that both carry
//! [`Provenance::FromRelatesUnresolved`]. Nodes are kept in lexicographic
//! order and node indices follow that order, which makes every traversal
//! (and so every question the compiler asks) deterministic.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Certainty, ConceptualModel, RelationshipShape};

/// Largest graph [`ConceptGraph::find_simple_cycles`] accepts by default.
pub const DEFAULT_MAX_CYCLE_NODES: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    FromCauses,
    FromRelatesResolved,
    FromRelatesUnresolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub provenance: Provenance,
    pub certainty: Certainty,
}

impl Edge {
    pub fn new(from: impl Into<String>, to: impl Into<String>, provenance: Provenance, certainty: Certainty) -> Self {
        Edge { from: from.into(), to: to.into(), provenance, certainty }
    }

    pub fn is_unresolved(&self) -> bool {
        self.provenance == Provenance::FromRelatesUnresolved
    }
}

impl std::fmt::Display for Edge {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} -> {}", self.from, self.to)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("graph is not acyclic (it has a cycle or an unresolved `relates` edge)")]
    GraphNotAcyclic,
    #[error("graph has {nodes} nodes; cycle search is limited to {cap}")]
    GraphTooLarge { nodes: usize, cap: usize },
    #[error("{0}")]
    InvalidArguments(String),
}

/// A simple directed cycle, rotated to start at its lexicographically
/// smallest node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptGraph {
    nodes: Vec<String>,
    edges: Vec<Edge>,
    /// Number of refinement steps applied since the graph was built.
    #[serde(default)]
    revision: u64,
}

/// Index-based adjacency used by the traversal routines.
struct Adjacency {
    out: Vec<Vec<usize>>,
    inn: Vec<Vec<usize>>,
}

impl ConceptGraph {
    /// Builds a graph from explicit parts. Nodes are sorted and deduplicated;
    /// edge endpoints are added as nodes; a repeated `(from, to)` pair keeps
    /// its first edge.
    pub fn new(nodes: impl IntoIterator<Item = String>, edges: impl IntoIterator<Item = Edge>) -> Self {
        let mut node_set: BTreeSet<String> = nodes.into_iter().collect();
        let mut by_pair: BTreeMap<(String, String), Edge> = BTreeMap::new();
        for e in edges {
            node_set.insert(e.from.clone());
            node_set.insert(e.to.clone());
            by_pair.entry((e.from.clone(), e.to.clone())).or_insert(e);
        }
        ConceptGraph { nodes: node_set.into_iter().collect(), edges: by_pair.into_values().collect(), revision: 0 }
    }

    /// Convenience for tests and examples: every pair becomes an assumed
    /// `causes` edge.
    pub fn from_causes<S: AsRef<str>>(nodes: &[S], edges: &[(S, S)]) -> Self {
        ConceptGraph::new(
            nodes.iter().map(|n| n.as_ref().to_string()),
            edges
                .iter()
                .map(|(a, b)| Edge::new(a.as_ref(), b.as_ref(), Provenance::FromCauses, Certainty::Assume)),
        )
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn contains(&self, node: &str) -> bool {
        self.index_of(node).is_some()
    }

    pub fn index_of(&self, node: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(node)).ok()
    }

    fn require(&self, node: &str) -> Result<usize, GraphError> {
        self.index_of(node).ok_or_else(|| GraphError::UnknownNode(node.to_string()))
    }

    pub fn edge(&self, from: &str, to: &str) -> Option<&Edge> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }

    pub fn has_unresolved(&self) -> bool {
        self.edges.iter().any(Edge::is_unresolved)
    }

    /// Replaces the edge set, bumping the revision. Used by refinement.
    pub(crate) fn with_edges(&self, edges: Vec<Edge>) -> ConceptGraph {
        let mut g = ConceptGraph::new(self.nodes.iter().cloned(), edges);
        g.revision = self.revision + 1;
        g
    }

    /// The graph with every edge leaving `node` deleted.
    pub fn without_outgoing(&self, node: &str) -> ConceptGraph {
        ConceptGraph {
            nodes: self.nodes.clone(),
            edges: self.edges.iter().filter(|e| e.from != node).cloned().collect(),
            revision: self.revision,
        }
    }

    /// The graph without the given edges (matched on endpoints).
    pub fn without_edges(&self, removed: &[(String, String)]) -> ConceptGraph {
        ConceptGraph {
            nodes: self.nodes.clone(),
            edges: self
                .edges
                .iter()
                .filter(|e| !removed.iter().any(|(a, b)| *a == e.from && *b == e.to))
                .cloned()
                .collect(),
            revision: self.revision,
        }
    }

    fn adjacency(&self) -> Adjacency {
        let n = self.nodes.len();
        let mut out = vec![Vec::new(); n];
        let mut inn = vec![Vec::new(); n];
        for e in &self.edges {
            let (a, b) = (self.index_of(&e.from).unwrap(), self.index_of(&e.to).unwrap());
            out[a].push(b);
            inn[b].push(a);
        }
        for list in out.iter_mut().chain(inn.iter_mut()) {
            list.sort_unstable();
        }
        Adjacency { out, inn }
    }

    pub fn parents(&self, node: &str) -> Result<BTreeSet<String>, GraphError> {
        self.require(node)?;
        Ok(self.edges.iter().filter(|e| e.to == node).map(|e| e.from.clone()).collect())
    }

    pub fn children(&self, node: &str) -> Result<BTreeSet<String>, GraphError> {
        self.require(node)?;
        Ok(self.edges.iter().filter(|e| e.from == node).map(|e| e.to.clone()).collect())
    }

    /// Descendants (`Forward`) or ancestors (`Backward`) of `node`, excluding
    /// the node itself.
    pub fn reachable(&self, node: &str, dir: Direction) -> Result<BTreeSet<String>, GraphError> {
        let start = self.require(node)?;
        let adj = self.adjacency();
        let next = match dir {
            Direction::Forward => &adj.out,
            Direction::Backward => &adj.inn,
        };
        Ok(bfs(next, start).into_iter().filter(|&i| i != start).map(|i| self.nodes[i].clone()).collect())
    }

    /// True when the directed graph, counting both legs of any unresolved
    /// pair, has no cycle.
    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    fn topological_order(&self) -> Option<Vec<usize>> {
        let adj = self.adjacency();
        let n = self.nodes.len();
        let mut indegree: Vec<usize> = adj.inn.iter().map(Vec::len).collect();
        let mut ready: VecDeque<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_front() {
            order.push(v);
            for &w in &adj.out[v] {
                indegree[w] -= 1;
                if indegree[w] == 0 {
                    ready.push_back(w);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Whether the graph contains any cycle other than the 2-cycles formed
    /// by unresolved `relates` pairs. Cheap: strongly connected components
    /// only, no enumeration.
    pub fn has_proper_cycle(&self) -> bool {
        let adj = self.adjacency();
        let comps = components(&adj);
        let mut sizes = BTreeMap::new();
        for &c in &comps {
            *sizes.entry(c).or_insert(0usize) += 1;
        }
        self.edges.iter().any(|e| {
            let (a, b) = (self.index_of(&e.from).unwrap(), self.index_of(&e.to).unwrap());
            comps[a] == comps[b] && (sizes[&comps[a]] > 2 || !e.is_unresolved())
        })
    }

    /// All simple directed cycles, shortest first and then by node list.
    /// The 2-cycle made by an unresolved `relates` pair is a direction
    /// question, not a cycle, and is left out; longer cycles that use one
    /// leg of such a pair are reported.
    pub fn find_simple_cycles(&self, max_nodes: usize) -> Result<Vec<Cycle>, GraphError> {
        if self.nodes.len() > max_nodes {
            return Err(GraphError::GraphTooLarge { nodes: self.nodes.len(), cap: max_nodes });
        }
        let adj = self.adjacency();
        let mut raw = Vec::new();
        for s in 0..self.nodes.len() {
            johnson_from(&adj, s, &mut raw);
        }
        let mut cycles: Vec<Cycle> = raw
            .into_iter()
            .map(|idx| {
                let nodes: Vec<String> = idx.iter().map(|&i| self.nodes[i].clone()).collect();
                let edges = (0..nodes.len())
                    .map(|k| self.edge(&nodes[k], &nodes[(k + 1) % nodes.len()]).unwrap().clone())
                    .collect();
                Cycle { nodes, edges }
            })
            .filter(|c: &Cycle| !(c.nodes.len() == 2 && c.edges.iter().all(Edge::is_unresolved)))
            .collect();
        cycles.sort_by(|a, b| a.nodes.len().cmp(&b.nodes.len()).then_with(|| a.nodes.cmp(&b.nodes)));
        Ok(cycles)
    }

    /// d-separation of `x` and `y` given `given`, by reachability of
    /// active trails ("Bayes ball"). Requires a fully refined DAG.
    pub fn d_separated(&self, x: &str, y: &str, given: &BTreeSet<String>) -> Result<bool, GraphError> {
        let xi = self.require(x)?;
        let yi = self.require(y)?;
        let mut observed = vec![false; self.nodes.len()];
        for z in given {
            observed[self.require(z)?] = true;
        }
        if xi == yi {
            return Err(GraphError::InvalidArguments(format!("cannot test `{x}` against itself")));
        }
        if observed[xi] || observed[yi] {
            return Err(GraphError::InvalidArguments("query endpoints must not be in the conditioning set".into()));
        }
        if self.has_unresolved() || !self.is_acyclic() {
            return Err(GraphError::GraphNotAcyclic);
        }
        let adj = self.adjacency();

        // Nodes that are observed or have an observed descendant: colliders
        // here let the ball bounce back up.
        let mut opens_collider = vec![false; self.nodes.len()];
        let mut queue: VecDeque<usize> = (0..self.nodes.len()).filter(|&v| observed[v]).collect();
        while let Some(v) = queue.pop_front() {
            if opens_collider[v] {
                continue;
            }
            opens_collider[v] = true;
            queue.extend(adj.inn[v].iter().copied());
        }

        // (node, arrived_from_child)
        let mut seen = vec![[false; 2]; self.nodes.len()];
        let mut trail = VecDeque::from([(xi, true)]);
        while let Some((v, up)) = trail.pop_front() {
            if seen[v][up as usize] {
                continue;
            }
            seen[v][up as usize] = true;
            if v == yi {
                return Ok(false);
            }
            if up {
                if !observed[v] {
                    trail.extend(adj.inn[v].iter().map(|&p| (p, true)));
                    trail.extend(adj.out[v].iter().map(|&c| (c, false)));
                }
            } else {
                if !observed[v] {
                    trail.extend(adj.out[v].iter().map(|&c| (c, false)));
                }
                if opens_collider[v] {
                    trail.extend(adj.inn[v].iter().map(|&p| (p, true)));
                }
            }
        }
        Ok(true)
    }

    /// Layer index per node for drawing: longest path from a source over
    /// the strongly-connected-component condensation, so members of a cycle
    /// share a layer.
    pub fn layers(&self) -> BTreeMap<String, usize> {
        let adj = self.adjacency();
        let comps = components(&adj);
        let n_comp = comps.iter().copied().max().map_or(0, |m| m + 1);
        let mut preds: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_comp];
        for (v, outs) in adj.out.iter().enumerate() {
            for &w in outs {
                if comps[v] != comps[w] {
                    preds[comps[w]].insert(comps[v]);
                }
            }
        }
        let mut memo = vec![None; n_comp];
        fn depth(c: usize, preds: &[BTreeSet<usize>], memo: &mut [Option<usize>]) -> usize {
            if let Some(d) = memo[c] {
                return d;
            }
            let d = preds[c].iter().map(|&p| depth(p, preds, memo) + 1).max().unwrap_or(0);
            memo[c] = Some(d);
            d
        }
        self.nodes.iter().enumerate().map(|(i, name)| (name.clone(), depth(comps[i], &preds, &mut memo))).collect()
    }

    /// `{nodes, edges}` document consumed by the UI and `--emit-graph`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "nodes": self.nodes, "edges": self.edges })
    }
}

fn bfs(next: &[Vec<usize>], start: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &w in &next[v] {
            if seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    seen
}

/// Strongly connected component id per node (ids are arbitrary but
/// deterministic).
fn components(adj: &Adjacency) -> Vec<usize> {
    let n = adj.out.len();
    let mut comp = vec![usize::MAX; n];
    let mut next_id = 0;
    for v in 0..n {
        if comp[v] != usize::MAX {
            continue;
        }
        let fwd = bfs(&adj.out, v);
        let bwd = bfs(&adj.inn, v);
        comp[v] = next_id;
        for &w in fwd.intersection(&bwd) {
            comp[w] = next_id;
        }
        next_id += 1;
    }
    comp
}

/// Johnson's circuit search for cycles whose smallest node is `s`,
/// restricted to the strongly connected part of the subgraph on `s..`.
fn johnson_from(adj: &Adjacency, s: usize, out: &mut Vec<Vec<usize>>) {
    let n = adj.out.len();
    let allowed_out: Vec<Vec<usize>> = adj.out.iter().map(|ws| ws.iter().copied().filter(|&w| w >= s).collect()).collect();
    let allowed_in: Vec<Vec<usize>> = adj.inn.iter().map(|ws| ws.iter().copied().filter(|&w| w >= s).collect()).collect();
    let fwd = bfs(&allowed_out, s);
    if !fwd.contains(&s) {
        return;
    }
    let bwd = bfs(&allowed_in, s);
    let mut member = vec![false; n];
    for &v in fwd.intersection(&bwd) {
        member[v] = true;
    }

    struct Search<'a> {
        out: &'a [Vec<usize>],
        member: Vec<bool>,
        blocked: Vec<bool>,
        b: Vec<BTreeSet<usize>>,
        stack: Vec<usize>,
        s: usize,
        found: &'a mut Vec<Vec<usize>>,
    }

    impl Search<'_> {
        fn unblock(&mut self, u: usize) {
            self.blocked[u] = false;
            for w in std::mem::take(&mut self.b[u]) {
                if self.blocked[w] {
                    self.unblock(w);
                }
            }
        }

        fn circuit(&mut self, v: usize) -> bool {
            let mut closed = false;
            self.stack.push(v);
            self.blocked[v] = true;
            for &w in &self.out[v] {
                if !self.member[w] {
                    continue;
                }
                if w == self.s {
                    self.found.push(self.stack.clone());
                    closed = true;
                } else if !self.blocked[w] && self.circuit(w) {
                    closed = true;
                }
            }
            if closed {
                self.unblock(v);
            } else {
                for &w in &self.out[v] {
                    if self.member[w] {
                        self.b[w].insert(v);
                    }
                }
            }
            self.stack.pop();
            closed
        }
    }

    let mut search = Search {
        out: &allowed_out,
        member,
        blocked: vec![false; n],
        b: vec![BTreeSet::new(); n],
        stack: Vec::new(),
        s,
        found: out,
    };
    search.circuit(s);
}

/// Lowers a validated conceptual model into the graph IR.
pub fn build_graph(cm: &ConceptualModel) -> ConceptGraph {
    let nodes = cm.measures().map(|m| m.name.clone());
    let mut edges = Vec::new();
    for r in &cm.relationships {
        match &r.shape {
            RelationshipShape::Causes { cause, effect } => {
                edges.push(Edge::new(cause, effect, Provenance::FromCauses, r.certainty));
            }
            RelationshipShape::Relates { a, b } => {
                edges.push(Edge::new(a, b, Provenance::FromRelatesUnresolved, r.certainty));
                edges.push(Edge::new(b, a, Provenance::FromRelatesUnresolved, r.certainty));
            }
        }
    }
    ConceptGraph::new(nodes, edges)
}
