//! Brute-force reference implementations for graph questions.
//!
//! Everything here works on plain `(node count, edge list)` pairs so the
//! oracles stay independent of the compiler's own graph representation.
//! Nothing is clever: paths are enumerated one by one and the textbook
//! blocking rules are applied literally.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

pub type Edge = (usize, usize);

fn has_edge(edges: &[Edge], a: usize, b: usize) -> bool {
    edges.iter().any(|&(u, v)| u == a && v == b)
}

/// Every node reachable from `start` along directed edges, `start` excluded
/// unless it sits on a cycle through itself.
pub fn descendants(n: usize, edges: &[Edge], start: usize) -> BTreeSet<usize> {
    // Warshall closure; quadratic memory is fine at oracle sizes.
    let mut reach = vec![vec![false; n]; n];
    for &(a, b) in edges {
        reach[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    (0..n).filter(|&j| reach[start][j]).collect()
}

pub fn ancestors(n: usize, edges: &[Edge], start: usize) -> BTreeSet<usize> {
    let flipped: Vec<Edge> = edges.iter().map(|&(a, b)| (b, a)).collect();
    descendants(n, &flipped, start)
}

/// All simple paths between `x` and `y` in the skeleton (edge direction
/// ignored).
pub fn undirected_simple_paths(n: usize, edges: &[Edge], x: usize, y: usize) -> Vec<Vec<usize>> {
    let mut adj = vec![BTreeSet::new(); n];
    for &(a, b) in edges {
        adj[a].insert(b);
        adj[b].insert(a);
    }
    let mut out = Vec::new();
    let mut path = vec![x];
    let mut on_path = vec![false; n];
    on_path[x] = true;
    walk(&adj, y, &mut path, &mut on_path, &mut out);
    out
}

fn walk(
    adj: &[BTreeSet<usize>],
    target: usize,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    out: &mut Vec<Vec<usize>>,
) {
    let last = *path.last().unwrap();
    if last == target {
        out.push(path.clone());
        return;
    }
    for &next in &adj[last] {
        if on_path[next] {
            continue;
        }
        on_path[next] = true;
        path.push(next);
        walk(adj, target, path, on_path, out);
        path.pop();
        on_path[next] = false;
    }
}

/// d-separation by enumerating every undirected path and applying the
/// chain/fork/collider rules one node at a time.
pub fn d_separated(n: usize, edges: &[Edge], x: usize, y: usize, given: &BTreeSet<usize>) -> bool {
    for path in undirected_simple_paths(n, edges, x, y) {
        if path_is_open(n, edges, &path, given) {
            return false;
        }
    }
    true
}

fn path_is_open(n: usize, edges: &[Edge], path: &[usize], given: &BTreeSet<usize>) -> bool {
    for w in path.windows(3) {
        let (prev, mid, next) = (w[0], w[1], w[2]);
        let collider = has_edge(edges, prev, mid) && has_edge(edges, next, mid);
        if collider {
            let mut family = descendants(n, edges, mid);
            family.insert(mid);
            if family.is_disjoint(given) {
                return false;
            }
        } else if given.contains(&mid) {
            return false;
        }
    }
    true
}

/// The backdoor criterion for `(x, y)`: no member of `z` descends from
/// `x`, and `z` blocks every path in the graph with `x`'s outgoing edges
/// deleted.
pub fn satisfies_backdoor(n: usize, edges: &[Edge], x: usize, y: usize, z: &BTreeSet<usize>) -> bool {
    if z.contains(&x) || z.contains(&y) {
        return false;
    }
    let de = descendants(n, edges, x);
    if !de.is_disjoint(z) {
        return false;
    }
    let cut: Vec<Edge> = edges.iter().copied().filter(|&(a, _)| a != x).collect();
    d_separated(n, &cut, x, y, z)
}

/// Every subset of the non-query nodes that satisfies the backdoor
/// criterion.
pub fn all_backdoor_sets(n: usize, edges: &[Edge], x: usize, y: usize) -> Vec<BTreeSet<usize>> {
    let others: Vec<usize> = (0..n).filter(|&v| v != x && v != y).collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << others.len()) {
        let z: BTreeSet<usize> = others
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, &v)| v)
            .collect();
        if satisfies_backdoor(n, edges, x, y, &z) {
            out.push(z);
        }
    }
    out
}

/// Simple directed cycles found by trying every ordered node sequence.
/// Each cycle is rotated to start at its smallest node.
pub fn simple_cycles(n: usize, edges: &[Edge]) -> BTreeSet<Vec<usize>> {
    let mut out = BTreeSet::new();
    let mut seq = Vec::new();
    let mut used = vec![false; n];
    for start in 0..n {
        seq.clear();
        seq.push(start);
        used[start] = true;
        extend_sequences(n, edges, start, &mut seq, &mut used, &mut out);
        used[start] = false;
    }
    out
}

fn extend_sequences(
    n: usize,
    edges: &[Edge],
    start: usize,
    seq: &mut Vec<usize>,
    used: &mut [bool],
    out: &mut BTreeSet<Vec<usize>>,
) {
    // Only sequences whose head is the minimum are kept, so each cycle
    // appears once.
    if seq.len() >= 2 {
        let closes = has_edge(edges, *seq.last().unwrap(), start);
        let consecutive = seq.windows(2).all(|w| has_edge(edges, w[0], w[1]));
        if closes && consecutive {
            out.insert(seq.clone());
        }
    }
    for v in (start + 1)..n {
        if used[v] {
            continue;
        }
        used[v] = true;
        seq.push(v);
        extend_sequences(n, edges, start, seq, used, out);
        seq.pop();
        used[v] = false;
    }
}

pub fn is_acyclic(n: usize, edges: &[Edge]) -> bool {
    (0..n).all(|v| !descendants(n, edges, v).contains(&v))
}

/// Random DAG: edges only go from lower to higher positions of a shuffled
/// order, each present with probability `p`.
pub fn random_dag<R: Rng>(rng: &mut R, n: usize, p: f64) -> Vec<Edge> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(p) {
                edges.push((order[i], order[j]));
            }
        }
    }
    edges.sort();
    edges
}

/// Random simple digraph (no self loops); both directions between a pair
/// may appear.
pub fn random_digraph<R: Rng>(rng: &mut R, n: usize, p: f64) -> Vec<Edge> {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen_bool(p) {
                edges.push((a, b));
            }
        }
    }
    edges
}

/// Every DAG on `n` labelled nodes. Enumerates all subsets of ordered
/// pairs and keeps the acyclic ones, so only use for tiny `n`.
pub fn all_dags(n: usize) -> Vec<Vec<Edge>> {
    let pairs: Vec<Edge> = (0..n)
        .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    let mut out = Vec::new();
    for mask in 0u64..(1 << pairs.len()) {
        let edges: Vec<Edge> = pairs
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, &e)| e)
            .collect();
        if edges.iter().any(|&(a, b)| has_edge(&edges, b, a)) {
            continue;
        }
        if is_acyclic(n, &edges) {
            out.push(edges);
        }
    }
    out
}

/// Terms of an R formula using only `+` and `*`, as R's `terms()` would
/// expand them: `A*B` stands for `A + B + A:B`. Returns the response and
/// each term as a sorted variable list. Backticks are stripped.
pub fn expand_formula(formula: &str) -> (String, BTreeSet<Vec<String>>) {
    let (lhs, rhs) = formula.split_once('~').expect("formula has a ~");
    let clean = |s: &str| s.trim().trim_matches('`').to_string();
    let mut terms = BTreeSet::new();
    for chunk in rhs.split('+') {
        let factors: Vec<String> = chunk.split('*').map(clean).collect();
        for mask in 1u32..(1 << factors.len()) {
            let mut term: Vec<String> = factors
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, f)| f.clone())
                .collect();
            term.sort();
            term.dedup();
            terms.insert(term);
        }
    }
    (clean(lhs), terms)
}

/// Source text of a random program over measures `m0..m{n-1}` mixing
/// `causes` and `relates` with at least one injected directed cycle. Every
/// unordered pair carries at most one `relates` and never a `relates`
/// together with a `causes`, so the program always validates. Returns the
/// source and the relationships as `(a, b, is_relates)`.
pub fn random_refinement_program<R: Rng>(rng: &mut R, n: usize) -> (String, Vec<(usize, usize, bool)>) {
    assert!(n >= 3);
    let mut rels: Vec<(usize, usize, bool)> = Vec::new();
    let free = |rels: &[(usize, usize, bool)], a: usize, b: usize, relates: bool| {
        rels.iter().all(|&(x, y, r)| {
            let same_pair = (x == a && y == b) || (x == b && y == a);
            !same_pair || (!relates && !r && !(x == a && y == b))
        })
    };

    let len = rng.gen_range(3..=n.min(4));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for i in 0..len {
        let (a, b) = (order[i], order[(i + 1) % len]);
        let relates = rng.gen_bool(0.3);
        if free(&rels, a, b, relates) {
            rels.push((a, b, relates));
        }
    }
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen_bool(0.2) {
                let relates = rng.gen_bool(0.4);
                if (!relates || a < b) && free(&rels, a, b, relates) {
                    rels.push((a, b, relates));
                }
            }
        }
    }

    let mut src = String::from("unit p\n");
    for i in 0..n {
        src.push_str(&format!("measure m{i} = continuous(p)\n"));
    }
    for &(a, b, relates) in &rels {
        let certainty = if rng.gen_bool(0.5) { "assume" } else { "hypothesize" };
        let kind = if relates { "relates" } else { "causes" };
        src.push_str(&format!("{certainty} {kind}(m{a}, m{b})\n"));
    }
    let (iv, dv, _) = rels[0];
    src.push_str(&format!("query ace(m{iv} -> m{dv})\n"));
    (src, rels)
}

/// Smoke-level syntax check for emitted R: strings and backticks close,
/// brackets balance, and every top-level statement is an assignment or a
/// call. Not a parser; it only catches gross emission mistakes.
pub fn r_smoke_check(script: &str) -> Result<(), String> {
    let mut statement = String::new();
    let mut depth: Vec<char> = Vec::new();
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for (line_no, line) in script.lines().enumerate() {
        let mut in_comment = false;
        for c in line.chars() {
            if in_comment {
                continue;
            }
            if let Some(q) = quote {
                statement.push(c);
                if escaped {
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == q {
                    quote = None;
                }
                continue;
            }
            match c {
                '#' => in_comment = true,
                '"' | '\'' | '`' => quote = Some(c),
                '(' | '[' | '{' => depth.push(c),
                ')' | ']' | '}' => {
                    let open = match c {
                        ')' => '(',
                        ']' => '[',
                        _ => '{',
                    };
                    if depth.pop() != Some(open) {
                        return Err(format!("line {}: unbalanced `{c}`", line_no + 1));
                    }
                }
                _ => {}
            }
            if !in_comment {
                statement.push(c);
            }
        }
        if quote.is_some() {
            return Err(format!("line {}: string continues past end of line", line_no + 1));
        }
        if depth.is_empty() {
            let stmt = statement.trim();
            if !stmt.is_empty() {
                let call = stmt.find('(').is_some_and(|i| {
                    let head = &stmt[..i];
                    !head.is_empty() && head.chars().all(|c| c.is_ascii_alphanumeric() || "._:".contains(c))
                });
                if !(stmt.contains("<-") || (call && stmt.ends_with(')'))) {
                    return Err(format!("line {}: not an assignment or call: {stmt}", line_no + 1));
                }
            }
            statement.clear();
        }
    }
    if !depth.is_empty() {
        return Err("unclosed bracket at end of script".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dag_count_on_three_and_four_nodes() {
        // OEIS A003024: 1, 3, 25, 543
        assert_eq!(all_dags(3).len(), 25);
        assert_eq!(all_dags(4).len(), 543);
    }

    #[test]
    fn collider_rule() {
        let edges = [(0, 2), (1, 2)];
        assert!(d_separated(3, &edges, 0, 1, &BTreeSet::new()));
        assert!(!d_separated(3, &edges, 0, 1, &BTreeSet::from([2])));
    }

    #[test]
    fn formula_expansion() {
        let (dv, terms) = expand_formula("Y ~ X + A*B*C");
        assert_eq!(dv, "Y");
        assert_eq!(terms.len(), 1 + 7);
        assert!(terms.contains(&vec!["A".to_string(), "C".to_string()]));
    }

    #[test]
    fn r_smoke() {
        assert!(r_smoke_check("# c\ndata <- read.csv(\"a(.csv\")\nm <- glm(y ~ x,\n  data=data)\nprint(m)\n").is_ok());
        assert!(r_smoke_check("m <- glm(y ~ x\n").is_err());
        assert!(r_smoke_check("x <- \"open\n").is_err());
        assert!(r_smoke_check("just words\n").is_err());
    }

    #[test]
    fn triangle_has_one_cycle() {
        let c = simple_cycles(3, &[(0, 1), (1, 2), (2, 0)]);
        assert_eq!(c, BTreeSet::from([vec![0, 1, 2]]));
    }
}
