//! Covariate selection for the average causal effect of `iv` on `dv`.
//!
//! The selected set is `confounders ∪ precision`:
//!
//! * confounders: nodes that are not descendants of `iv`, are ancestors of
//!   `iv` or `dv`, and lie on some path between `iv` and `dv` in the graph
//!   with `iv`'s outgoing edges removed (that is, on a backdoor path);
//! * precision: parents of `dv` that are not descendants of `iv` and are
//!   d-separated from `iv` given the confounders.
//!
//! Every parent of `iv` that can reach `dv` is a confounder, and a parent is
//! a non-collider on any path that leaves `iv` through it, so the set always
//! blocks every backdoor path (unless `dv` is itself a parent of `iv`).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::DerivationError;
use crate::disambiguation::refinement_complete;
use crate::graph::{ConceptGraph, Direction, GraphError};
use crate::model::Query;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    IncludeConfounder,
    IncludePrecision,
    ExcludeMediator,
    ExcludeColliderPath,
    ExcludeDescendantOfDv,
    ExcludeUnrelated,
}

impl Verdict {
    pub fn includes(self) -> bool {
        matches!(self, Verdict::IncludeConfounder | Verdict::IncludePrecision)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjustmentDecision {
    pub variable: String,
    pub verdict: Verdict,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum DerivationWarning {
    /// No directed path from `iv` to `dv`.
    QueryUnreachable { message: String },
    /// The covariates kept by the analyst no longer satisfy the backdoor
    /// criterion.
    Confounding { message: String },
}

impl DerivationWarning {
    pub fn message(&self) -> &str {
        match self {
            DerivationWarning::QueryUnreachable { message } | DerivationWarning::Confounding { message } => message,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjustmentSet {
    pub set: BTreeSet<String>,
    pub decisions: Vec<AdjustmentDecision>,
    pub warnings: Vec<DerivationWarning>,
}

pub fn select_adjustment_set(g: &ConceptGraph, q: &Query) -> Result<AdjustmentSet, DerivationError> {
    if !refinement_complete(g) {
        return Err(DerivationError::RefinementIncomplete);
    }
    let (iv, dv) = (q.iv.as_str(), q.dv.as_str());
    let de_iv = g.reachable(iv, Direction::Forward)?;
    let de_dv = g.reachable(dv, Direction::Forward)?;
    let an_iv = g.reachable(iv, Direction::Backward)?;
    let an_dv = g.reachable(dv, Direction::Backward)?;

    let mut warnings = Vec::new();
    if !de_iv.contains(dv) {
        let extra = if an_iv.contains(dv) {
            format!(" `{dv}` is an ancestor of `{iv}`, so no adjustment set can isolate the effect.")
        } else {
            String::new()
        };
        warnings.push(DerivationWarning::QueryUnreachable {
            message: format!("there is no directed path from `{iv}` to `{dv}`; the estimated effect is expected to be zero.{extra}"),
        });
    }

    let backdoor = g.without_outgoing(iv);
    let on_backdoor = nodes_on_paths(&backdoor, iv, dv);
    let confounders: BTreeSet<String> = g
        .nodes()
        .iter()
        .filter(|v| *v != iv && *v != dv)
        .filter(|v| !de_iv.contains(*v))
        .filter(|v| an_iv.contains(*v) || an_dv.contains(*v))
        .filter(|v| on_backdoor.contains(*v))
        .cloned()
        .collect();

    let mut precision = BTreeSet::new();
    for p in g.parents(dv)? {
        if p == iv || de_iv.contains(&p) || confounders.contains(&p) {
            continue;
        }
        if g.d_separated(iv, &p, &confounders)? {
            precision.insert(p);
        }
    }

    // Non-causal paths from iv: drop the first edge of every causal path.
    let causal_first_steps: Vec<(String, String)> = g
        .children(iv)?
        .into_iter()
        .filter(|c| c == dv || an_dv.contains(c))
        .map(|c| (iv.to_string(), c))
        .collect();
    let proper_backdoor = g.without_edges(&causal_first_steps);

    let mut decisions = Vec::new();
    for v in g.nodes().iter().filter(|v| *v != iv && *v != dv) {
        let (verdict, rationale) = if confounders.contains(v) {
            (
                Verdict::IncludeConfounder,
                format!("`{v}` lies on a backdoor path between `{iv}` and `{dv}`; adjusting for it blocks confounding."),
            )
        } else if precision.contains(v) {
            (
                Verdict::IncludePrecision,
                format!(
                    "`{v}` influences `{dv}` but shares no open path with `{iv}`; including it improves precision without adding bias."
                ),
            )
        } else if de_iv.contains(v) && an_dv.contains(v) {
            (
                Verdict::ExcludeMediator,
                format!("`{v}` lies on a causal path from `{iv}` to `{dv}`; adjusting for it would remove part of the effect."),
            )
        } else if de_dv.contains(v) {
            (
                Verdict::ExcludeDescendantOfDv,
                format!("`{v}` is influenced by `{dv}`; adjusting for a descendant of the outcome biases the estimate."),
            )
        } else if opens_collider(&proper_backdoor, iv, dv, &confounders, v)? {
            (
                Verdict::ExcludeColliderPath,
                format!("adjusting for `{v}` would open a non-causal path between `{iv}` and `{dv}` through a collider."),
            )
        } else {
            (
                Verdict::ExcludeUnrelated,
                format!("`{v}` is not needed to block any backdoor path between `{iv}` and `{dv}`."),
            )
        };
        decisions.push(AdjustmentDecision { variable: v.clone(), verdict, rationale });
    }

    let set = confounders.union(&precision).cloned().collect();
    Ok(AdjustmentSet { set, decisions, warnings })
}

fn opens_collider(
    g: &ConceptGraph,
    iv: &str,
    dv: &str,
    base: &BTreeSet<String>,
    v: &str,
) -> Result<bool, GraphError> {
    if !g.d_separated(iv, dv, base)? {
        return Ok(false);
    }
    let mut with = base.clone();
    with.insert(v.to_string());
    Ok(!g.d_separated(iv, dv, &with)?)
}

/// The backdoor criterion: no member descends from `iv` and the set
/// d-separates `iv` and `dv` once `iv`'s outgoing edges are removed.
pub fn satisfies_backdoor(g: &ConceptGraph, q: &Query, z: &BTreeSet<String>) -> Result<bool, GraphError> {
    let de_iv = g.reachable(&q.iv, Direction::Forward)?;
    if z.iter().any(|v| de_iv.contains(v) || *v == q.iv || *v == q.dv) {
        return Ok(false);
    }
    g.without_outgoing(&q.iv).d_separated(&q.iv, &q.dv, z)
}

/// Nodes (other than the endpoints) that lie on at least one simple path
/// between `s` and `t` in the skeleton of `g`.
///
/// `v` is on such a path exactly when there are two paths from `v`, one to
/// `s` and one to `t`, sharing no vertex but `v` (Menger). That is a
/// max-flow of 2 with unit vertex capacities.
pub fn nodes_on_paths(g: &ConceptGraph, s: &str, t: &str) -> BTreeSet<String> {
    let n = g.nodes().len();
    let (Some(si), Some(ti)) = (g.index_of(s), g.index_of(t)) else {
        return BTreeSet::new();
    };
    let mut neighbours = vec![BTreeSet::new(); n];
    for e in g.edges() {
        let (a, b) = (g.index_of(&e.from).unwrap(), g.index_of(&e.to).unwrap());
        neighbours[a].insert(b);
        neighbours[b].insert(a);
    }
    (0..n)
        .filter(|&v| v != si && v != ti && two_disjoint_paths(&neighbours, v, si, ti))
        .map(|v| g.nodes()[v].clone())
        .collect()
}

fn two_disjoint_paths(neighbours: &[BTreeSet<usize>], source: usize, s: usize, t: usize) -> bool {
    // Vertex v splits into in = 2v and out = 2v + 1; the sink is 2n.
    let n = neighbours.len();
    let sink = 2 * n;
    let size = 2 * n + 1;
    let mut cap = vec![vec![0u8; size]; size];
    for v in 0..n {
        cap[2 * v][2 * v + 1] = if v == source { 2 } else { 1 };
        for &w in &neighbours[v] {
            cap[2 * v + 1][2 * w] = 1;
        }
    }
    cap[2 * s + 1][sink] = 1;
    cap[2 * t + 1][sink] = 1;

    let start = 2 * source;
    let mut flow = 0;
    while flow < 2 {
        let mut prev = vec![usize::MAX; size];
        prev[start] = start;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            if u == sink {
                break;
            }
            for w in 0..size {
                if cap[u][w] > 0 && prev[w] == usize::MAX {
                    prev[w] = u;
                    queue.push_back(w);
                }
            }
        }
        if prev[sink] == usize::MAX {
            break;
        }
        let mut w = sink;
        while w != start {
            let u = prev[w];
            cap[u][w] -= 1;
            cap[w][u] += 1;
            w = u;
        }
        flow += 1;
    }
    flow == 2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(iv: &str, dv: &str) -> Query {
        Query { iv: iv.into(), dv: dv.into() }
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn verdict(a: &AdjustmentSet, v: &str) -> Verdict {
        a.decisions.iter().find(|d| d.variable == v).unwrap().verdict
    }

    #[test]
    fn classic_confounder() {
        let g = ConceptGraph::from_causes(&["X", "Y", "Z"], &[("Z", "X"), ("Z", "Y"), ("X", "Y")]);
        let a = select_adjustment_set(&g, &q("X", "Y")).unwrap();
        assert_eq!(a.set, set(&["Z"]));
        assert_eq!(verdict(&a, "Z"), Verdict::IncludeConfounder);
        assert!(a.warnings.is_empty());
    }

    #[test]
    fn mediator_is_excluded() {
        let g = ConceptGraph::from_causes(&["M", "X", "Y"], &[("X", "M"), ("M", "Y")]);
        let a = select_adjustment_set(&g, &q("X", "Y")).unwrap();
        assert!(a.set.is_empty());
        assert_eq!(verdict(&a, "M"), Verdict::ExcludeMediator);
    }

    #[test]
    fn precision_parent_of_outcome() {
        let g = ConceptGraph::from_causes(&["W", "X", "Y"], &[("W", "Y"), ("X", "Y")]);
        let a = select_adjustment_set(&g, &q("X", "Y")).unwrap();
        assert_eq!(a.set, set(&["W"]));
        assert_eq!(verdict(&a, "W"), Verdict::IncludePrecision);
        assert!(satisfies_backdoor(&g, &q("X", "Y"), &a.set).unwrap());
    }

    #[test]
    fn m_bias_keeps_the_collider_out() {
        let g = ConceptGraph::from_causes(
            &["M", "U1", "U2", "X", "Y"],
            &[("U1", "X"), ("U1", "M"), ("U2", "M"), ("U2", "Y"), ("X", "Y")],
        );
        let a = select_adjustment_set(&g, &q("X", "Y")).unwrap();
        assert_eq!(a.set, set(&["U1", "U2"]));
        assert_eq!(verdict(&a, "M"), Verdict::ExcludeUnrelated);
    }

    #[test]
    fn descendant_collider_of_treatment() {
        // X -> C <- P -> Y, X -> Y. C is a bad control.
        let g = ConceptGraph::from_causes(&["C", "P", "X", "Y"], &[("X", "C"), ("P", "C"), ("P", "Y"), ("X", "Y")]);
        let a = select_adjustment_set(&g, &q("X", "Y")).unwrap();
        assert_eq!(a.set, set(&["P"]));
        assert_eq!(verdict(&a, "P"), Verdict::IncludePrecision);
        assert_eq!(verdict(&a, "C"), Verdict::ExcludeColliderPath);
    }

    #[test]
    fn descendant_of_outcome() {
        let g = ConceptGraph::from_causes(&["D", "X", "Y"], &[("X", "Y"), ("Y", "D")]);
        let a = select_adjustment_set(&g, &q("X", "Y")).unwrap();
        assert_eq!(verdict(&a, "D"), Verdict::ExcludeDescendantOfDv);
    }

    #[test]
    fn unreachable_query_warns() {
        let g = ConceptGraph::from_causes(&["X", "Y"], &[("Y", "X")]);
        let a = select_adjustment_set(&g, &q("X", "Y")).unwrap();
        assert!(matches!(a.warnings[..], [DerivationWarning::QueryUnreachable { .. }]));
    }

    #[test]
    fn refuses_unrefined_graph() {
        let g = ConceptGraph::from_causes(&["X", "Y"], &[("X", "Y"), ("Y", "X")]);
        assert_eq!(select_adjustment_set(&g, &q("X", "Y")), Err(DerivationError::RefinementIncomplete));
    }

    #[test]
    fn verdict_for_every_other_node() {
        let g = ConceptGraph::from_causes(&["A", "B", "C", "X", "Y"], &[("A", "X"), ("X", "Y")]);
        let a = select_adjustment_set(&g, &q("X", "Y")).unwrap();
        assert_eq!(a.decisions.len(), 3);
        // A reaches Y only through X, so it sits on no backdoor path.
        assert_eq!(verdict(&a, "A"), Verdict::ExcludeUnrelated);
    }

    #[test]
    fn path_membership() {
        // s - a - t, plus a dead-end branch a - d and a detour s - b - c - t.
        let g = ConceptGraph::from_causes(
            &["a", "b", "c", "d", "s", "t"],
            &[("s", "a"), ("a", "t"), ("a", "d"), ("b", "s"), ("b", "c"), ("t", "c")],
        );
        assert_eq!(nodes_on_paths(&g, "s", "t"), set(&["a", "b", "c"]));
    }
}
