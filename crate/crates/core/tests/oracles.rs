use std::collections::BTreeSet;

use cmc_core::derivation::{select_adjustment_set, Verdict};
use cmc_core::graph::{ConceptGraph, Direction, DEFAULT_MAX_CYCLE_NODES};
use cmc_core::model::Query;
use cmc_testkit as oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn name(i: usize) -> String {
    ((b'a' + i as u8) as char).to_string()
}

fn graph(n: usize, edges: &[(usize, usize)]) -> ConceptGraph {
    let nodes: Vec<String> = (0..n).map(name).collect();
    let edges: Vec<(String, String)> = edges.iter().map(|&(a, b)| (name(a), name(b))).collect();
    ConceptGraph::from_causes(&nodes, &edges)
}

fn names(set: &BTreeSet<usize>) -> BTreeSet<String> {
    set.iter().map(|&i| name(i)).collect()
}

fn subsets(items: &[usize]) -> impl Iterator<Item = BTreeSet<usize>> + '_ {
    (0u32..1 << items.len()).map(move |mask| items.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &v)| v).collect())
}

#[test]
fn d_separation_on_every_three_and_four_node_dag() {
    for n in [3, 4] {
        for edges in oracle::all_dags(n) {
            let g = graph(n, &edges);
            for x in 0..n {
                for y in 0..n {
                    if x == y {
                        continue;
                    }
                    let rest: Vec<usize> = (0..n).filter(|&v| v != x && v != y).collect();
                    for z in subsets(&rest) {
                        assert_eq!(
                            g.d_separated(&name(x), &name(y), &names(&z)).unwrap(),
                            oracle::d_separated(n, &edges, x, y, &z),
                            "{edges:?} {x} {y} {z:?}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn reachability_matches_transitive_closure() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.gen_range(2..=7);
        let edges = oracle::random_digraph(&mut rng, n, 0.3);
        let g = graph(n, &edges);
        for v in 0..n {
            // The start node is excluded even when it lies on a cycle.
            let mut de = oracle::descendants(n, &edges, v);
            let mut an = oracle::ancestors(n, &edges, v);
            de.remove(&v);
            an.remove(&v);
            assert_eq!(g.reachable(&name(v), Direction::Forward).unwrap(), names(&de));
            assert_eq!(g.reachable(&name(v), Direction::Backward).unwrap(), names(&an));
        }
    }
}

#[test]
fn simple_cycles_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..150 {
        let n = rng.gen_range(1..=6);
        let edges = oracle::random_digraph(&mut rng, n, 0.35);
        let g = graph(n, &edges);
        let found: BTreeSet<Vec<String>> =
            g.find_simple_cycles(DEFAULT_MAX_CYCLE_NODES).unwrap().into_iter().map(|c| c.nodes).collect();
        let expected: BTreeSet<Vec<String>> =
            oracle::simple_cycles(n, &edges).into_iter().map(|c| c.into_iter().map(name).collect()).collect();
        assert_eq!(found, expected, "{edges:?}");
        assert_eq!(g.is_acyclic(), oracle::is_acyclic(n, &edges));
    }
}

#[test]
fn adjustment_sets_are_valid_backdoor_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut checked = 0;
    for _ in 0..300 {
        let n = rng.gen_range(2..=6);
        let edges = oracle::random_dag(&mut rng, n, 0.4);
        let g = graph(n, &edges);
        let (iv, dv) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if iv == dv {
            continue;
        }
        let q = Query { iv: name(iv), dv: name(dv) };
        let adj = select_adjustment_set(&g, &q).unwrap();
        assert_eq!(adj.decisions.len(), n - 2);

        let z: BTreeSet<usize> = (0..n).filter(|&v| adj.set.contains(&name(v))).collect();
        let de_iv = oracle::descendants(n, &edges, iv);
        assert!(z.is_disjoint(&de_iv));
        if edges.contains(&(dv, iv)) {
            // No set blocks a direct dv -> iv edge.
            assert!(!adj.warnings.is_empty());
            continue;
        }
        assert!(oracle::satisfies_backdoor(n, &edges, iv, dv, &z), "{edges:?} {iv}->{dv} {z:?}");
        assert!(oracle::all_backdoor_sets(n, &edges, iv, dv).contains(&z));

        let conf: BTreeSet<usize> = (0..n)
            .filter(|&v| adj.decisions.iter().any(|d| d.variable == name(v) && d.verdict == Verdict::IncludeConfounder))
            .collect();
        assert!(oracle::satisfies_backdoor(n, &edges, iv, dv, &conf), "confounders alone must block");
        checked += 1;
    }
    assert!(checked > 150, "only {checked} queries checked");
}
