mod common;

use std::collections::BTreeMap;

use common::oracle;
use dpp_core::pairgraph::{NodeId, PairGraph, PairLabel, PairwiseDatum, RelationKind, Topology};
use proptest::prelude::*;

fn graph_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..=10).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        let len = pairs.len();
        (Just(n), proptest::sample::subsequence(pairs, 0..=len.min(20)))
    })
}

fn all_alive(m: usize) -> u32 {
    if m == 0 {
        0
    } else {
        u32::MAX >> (32 - m)
    }
}

/// Extra components from deleting `s`, via whole-graph component counts.
fn increase_oracle(n: usize, edges: &[(usize, usize)], s: usize) -> usize {
    let without: Vec<(usize, usize)> = edges.iter().copied().filter(|&(a, b)| a != s && b != s).collect();
    let after = oracle::components(n, &without, all_alive(without.len()), Some(s));
    let before = oracle::components(n, edges, all_alive(edges.len()), None);
    after.saturating_sub(before)
}

proptest! {
    #[test]
    fn degree_sum_is_twice_edges((n, edges) in graph_strategy()) {
        let t = Topology::new(n, &edges).unwrap();
        let total: usize = (0..n).map(|v| t.degree(v)).sum();
        prop_assert_eq!(total, 2 * edges.len());
    }

    #[test]
    fn component_counts_match_oracle((n, edges) in graph_strategy()) {
        let t = Topology::new(n, &edges).unwrap();
        prop_assert_eq!(t.component_count(), oracle::components(n, &edges, all_alive(edges.len()), None));
        for s in 0..n {
            let inc = t.component_increase_on_removal(s);
            prop_assert!(inc <= t.degree(s));
            prop_assert_eq!(inc, increase_oracle(n, &edges, s));
        }
    }

    #[test]
    fn build_round_trip(
        (n, edges) in graph_strategy(),
        flips in proptest::collection::vec(any::<bool>(), 20),
        order in any::<prop::sample::Index>(),
    ) {
        // endpoints in either orientation, labels alternating, rotated order
        let mut pairs: Vec<PairwiseDatum<f64>> = edges
            .iter()
            .zip(&flips)
            .map(|(&(a, b), &f)| {
                let (i, j) = if f { (b, a) } else { (a, b) };
                let y = if (a + b) % 2 == 0 { PairLabel::Similar } else { PairLabel::Dissimilar };
                PairwiseDatum::new(i, j, vec![a as f64 - b as f64, 1.0], y).unwrap()
            })
            .collect();
        if !pairs.is_empty() {
            let k = order.index(pairs.len());
            pairs.rotate_left(k);
        }
        let g = PairGraph::build(pairs.clone(), RelationKind::Transitive).unwrap();
        prop_assert_eq!(g.edge_count(), pairs.len());
        let as_multiset = |ps: &[PairwiseDatum<f64>]| {
            let mut m = BTreeMap::new();
            for p in ps {
                let key = if p.i <= p.j { (p.i.clone(), p.j.clone()) } else { (p.j.clone(), p.i.clone()) };
                *m.entry(key).or_insert(0) += 1;
            }
            m
        };
        let recovered: Vec<_> = g
            .topology()
            .edges()
            .iter()
            .map(|&(a, b)| PairwiseDatum::new(g.id(a).clone(), g.id(b).clone(), vec![], PairLabel::Similar).unwrap())
            .collect();
        prop_assert_eq!(as_multiset(&recovered), as_multiset(&pairs));
        prop_assert_eq!(g.pairs(), &pairs[..]);
        let _ = n;
    }

    #[test]
    fn remove_edges_keeps_nodes((n, edges) in graph_strategy(), mask in any::<u32>()) {
        let g = PairGraph::<f64>::from_edges(n, &edges, RelationKind::Transitive).unwrap();
        let drop: Vec<(NodeId, NodeId)> = edges
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, &(a, b))| (NodeId::from(a), NodeId::from(b)))
            .collect();
        let h = g.remove_edges(&drop).unwrap();
        prop_assert_eq!(h.node_count(), g.node_count());
        prop_assert_eq!(h.edge_count(), g.edge_count() - drop.len());
        prop_assert_eq!(h.node_ids(), g.node_ids());
    }
}

#[test]
fn cut_vertex_joining_three_branches() {
    // 0 joins three paths of length two
    let edges = [(0, 1), (1, 2), (0, 3), (3, 4), (0, 5), (5, 6)];
    let t = Topology::new(7, &edges).unwrap();
    assert_eq!(t.component_increase_on_removal(0), increase_oracle(7, &edges, 0));
    assert_eq!(t.component_increase_on_removal(0), 2);
}

#[test]
fn duplicate_pairs_in_either_orientation_are_rejected() {
    let p = |a: &str, b: &str| PairwiseDatum::new(a, b, vec![0.5], PairLabel::Similar).unwrap();
    let err = PairGraph::build(vec![p("a", "b"), p("b", "a")], RelationKind::Transitive).unwrap_err();
    assert!(err.to_string().contains("duplicate"));
}
