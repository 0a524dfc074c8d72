//! Conceptual refinement: turn `relates` pairs into directed edges and
//! break cycles until the graph is a DAG.
//!
//! Questions are answered one at a time. After each answer the list is
//! recomputed from the new graph, since orienting one pair can create or
//! destroy cycles.
//!
//! Ambiguity ids are derived from graph content (`direction:a~b`,
//! `cycle:a>b>c`) so answer logs stay readable and replayable by hand.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{ConceptGraph, Cycle, Edge, GraphError, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionAction {
    Orient,
    RemoveEdge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolutionOption {
    pub action: OptionAction,
    pub from: String,
    pub to: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AmbiguityKind {
    DirectionChoice { a: String, b: String },
    CycleBreak { cycle: Cycle },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ambiguity {
    pub id: String,
    #[serde(flatten)]
    pub kind: AmbiguityKind,
    pub options: Vec<ResolutionOption>,
    pub explanation: String,
}

/// An analyst's answer to one [`Ambiguity`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub ambiguity_id: String,
    pub choice: usize,
    /// Graph revision the answer was given against. When present it must
    /// match the current revision.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revision: Option<u64>,
}

impl Resolution {
    pub fn new(ambiguity_id: impl Into<String>, choice: usize) -> Self {
        Resolution { ambiguity_id: ambiguity_id.into(), choice, revision: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("ambiguity `{0}` no longer applies to the current graph")]
    StaleAmbiguity(String),
    #[error("unknown ambiguity `{0}`")]
    UnknownAmbiguity(String),
    #[error("choice {choice} is out of range for `{id}` ({options} options)")]
    ChoiceOutOfRange { id: String, choice: usize, options: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// What an applied resolution did to the graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum ResolutionEffect {
    Oriented { from: String, to: String },
    Removed { edge: Edge },
}

impl std::fmt::Display for ResolutionEffect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ResolutionEffect::Oriented { from, to } => write!(f, "assumed {from} -> {to}"),
            ResolutionEffect::Removed { edge } => write!(f, "removed {edge}"),
        }
    }
}

fn direction_id(a: &str, b: &str) -> String {
    format!("direction:{a}~{b}")
}

fn cycle_id(nodes: &[String]) -> String {
    format!("cycle:{}", nodes.join(">"))
}

/// Open questions for `g`: direction choices (by endpoint names) and then
/// cycle breaks (shortest first). Empty exactly when refinement is done.
///
/// Cycles are only enumerated when a strongly connected component shows
/// one exists, so large acyclic models never hit the cycle-search cap.
pub fn enumerate_ambiguities(g: &ConceptGraph, max_cycle_nodes: usize) -> Result<Vec<Ambiguity>, GraphError> {
    let mut out = Vec::new();
    for e in g.edges() {
        if e.is_unresolved() && e.from < e.to {
            let (a, b) = (e.from.clone(), e.to.clone());
            out.push(Ambiguity {
                id: direction_id(&a, &b),
                options: vec![
                    ResolutionOption {
                        action: OptionAction::Orient,
                        from: a.clone(),
                        to: b.clone(),
                        label: format!("{a} influences {b}"),
                    },
                    ResolutionOption {
                        action: OptionAction::Orient,
                        from: b.clone(),
                        to: a.clone(),
                        label: format!("{b} influences {a}"),
                    },
                ],
                explanation: format!(
                    "`{a}` and `{b}` are related, but the direction of influence is open. \
                     A statistical model can only be derived once one variable is assumed to influence the other."
                ),
                kind: AmbiguityKind::DirectionChoice { a, b },
            });
        }
    }
    if g.has_proper_cycle() {
        for cycle in g.find_simple_cycles(max_cycle_nodes)? {
            let path = {
                let mut p = cycle.nodes.join(" -> ");
                p.push_str(" -> ");
                p.push_str(&cycle.nodes[0]);
                p
            };
            out.push(Ambiguity {
                id: cycle_id(&cycle.nodes),
                options: cycle
                    .edges
                    .iter()
                    .map(|e| ResolutionOption {
                        action: OptionAction::RemoveEdge,
                        from: e.from.clone(),
                        to: e.to.clone(),
                        label: if e.is_unresolved() {
                            format!("remove {e} (keeps {} -> {})", e.to, e.from)
                        } else {
                            format!("remove {e}")
                        },
                    })
                    .collect(),
                explanation: format!(
                    "These relationships form a cycle ({path}). A cycle describes several different \
                     data-generating processes at once, so one of its edges has to go before a model can be derived."
                ),
                kind: AmbiguityKind::CycleBreak { cycle },
            });
        }
    }
    Ok(out)
}

/// True when no `relates` pair is left unresolved and the graph is a DAG.
pub fn refinement_complete(g: &ConceptGraph) -> bool {
    !g.has_unresolved() && g.is_acyclic()
}

fn parse_id<'a>(g: &ConceptGraph, id: &'a str) -> Option<Vec<&'a str>> {
    let names: Vec<&str> = if let Some(rest) = id.strip_prefix("direction:") {
        let names: Vec<&str> = rest.split('~').collect();
        if names.len() != 2 {
            return None;
        }
        names
    } else if let Some(rest) = id.strip_prefix("cycle:") {
        let names: Vec<&str> = rest.split('>').collect();
        if names.len() < 2 {
            return None;
        }
        names
    } else {
        return None;
    };
    names.iter().all(|n| g.contains(n)).then_some(names)
}

/// Applies one answer and returns the new graph with what changed.
///
/// Orienting a pair replaces both unresolved legs with one
/// [`Provenance::FromRelatesResolved`] edge. Breaking a cycle removes the
/// chosen edge; if that edge is one leg of an unresolved pair, the pair is
/// oriented the other way instead, since a `relates` relationship can only
/// be dropped by editing the program.
pub fn apply_resolution(
    g: &ConceptGraph,
    r: &Resolution,
    max_cycle_nodes: usize,
) -> Result<(ConceptGraph, ResolutionEffect), ResolveError> {
    if parse_id(g, &r.ambiguity_id).is_none() {
        return Err(ResolveError::UnknownAmbiguity(r.ambiguity_id.clone()));
    }
    if r.revision.is_some_and(|rev| rev != g.revision()) {
        return Err(ResolveError::StaleAmbiguity(r.ambiguity_id.clone()));
    }
    let current = enumerate_ambiguities(g, max_cycle_nodes)?;
    let amb = current
        .iter()
        .find(|a| a.id == r.ambiguity_id)
        .ok_or_else(|| ResolveError::StaleAmbiguity(r.ambiguity_id.clone()))?;
    let option = amb.options.get(r.choice).ok_or_else(|| ResolveError::ChoiceOutOfRange {
        id: amb.id.clone(),
        choice: r.choice,
        options: amb.options.len(),
    })?;

    let (from, to) = (option.from.as_str(), option.to.as_str());
    let chosen = g.edge(from, to).expect("options reference existing edges").clone();
    let (keep_from, keep_to, effect) = match option.action {
        OptionAction::Orient => (from, to, ResolutionEffect::Oriented { from: from.into(), to: to.into() }),
        OptionAction::RemoveEdge if chosen.is_unresolved() => {
            (to, from, ResolutionEffect::Removed { edge: chosen.clone() })
        }
        OptionAction::RemoveEdge => {
            let edges = g.edges().iter().filter(|e| **e != chosen).cloned().collect();
            return Ok((g.with_edges(edges), ResolutionEffect::Removed { edge: chosen }));
        }
    };
    // Collapse the unresolved pair between `keep_from` and `keep_to`.
    let edges = g
        .edges()
        .iter()
        .filter_map(|e| {
            let in_pair = (e.from == keep_from && e.to == keep_to) || (e.from == keep_to && e.to == keep_from);
            if !in_pair {
                Some(e.clone())
            } else if e.from == keep_from {
                Some(Edge { provenance: Provenance::FromRelatesResolved, ..e.clone() })
            } else {
                None
            }
        })
        .collect();
    Ok((g.with_edges(edges), effect))
}
