//! Exhaustive reference computations on tiny graphs, written against plain
//! edge lists with bitmasks and sharing no code with the library.
//!
//! Limits: at most 64 nodes and 31 edges; the enumerations are exponential
//! and meant for |E| ≤ 12 or so.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use rand::Rng;

pub type Edges = Vec<(usize, usize)>;

/// Nodes reachable from `from` using only the edges in `alive`.
pub fn reach(n: usize, edges: &[(usize, usize)], alive: u32, from: usize) -> u64 {
    let mut seen = 1u64 << from;
    loop {
        let before = seen;
        for (k, &(a, b)) in edges.iter().enumerate() {
            if alive >> k & 1 == 1 {
                if seen >> a & 1 == 1 {
                    seen |= 1 << b;
                }
                if seen >> b & 1 == 1 {
                    seen |= 1 << a;
                }
            }
        }
        if seen == before {
            debug_assert!(n <= 64);
            return seen;
        }
    }
}

fn full(m: usize) -> u32 {
    if m == 0 {
        0
    } else {
        u32::MAX >> (32 - m)
    }
}

/// Every subset of `mask` with exactly `k` bits.
fn subsets_of_size(mask: u32, k: usize) -> Vec<u32> {
    let bits: Vec<u32> = (0..32).filter(|b| mask >> b & 1 == 1).collect();
    let mut out = Vec::new();
    let mut pick = Vec::with_capacity(k);
    fn rec(bits: &[u32], start: usize, k: usize, pick: &mut Vec<u32>, out: &mut Vec<u32>) {
        if pick.len() == k {
            out.push(pick.iter().fold(0, |acc, b| acc | 1 << b));
            return;
        }
        for i in start..bits.len() {
            pick.push(bits[i]);
            rec(bits, i + 1, k, pick, out);
            pick.pop();
        }
    }
    rec(&bits, 0, k, &mut pick, &mut out);
    out
}

/// Size of a minimum `s–t` edge cut, by trying cuts of increasing size.
pub fn min_cut(n: usize, edges: &[(usize, usize)], s: usize, t: usize) -> usize {
    let all = full(edges.len());
    for k in 0..=edges.len() {
        for cut in subsets_of_size(all, k) {
            if reach(n, edges, all & !cut, s) >> t & 1 == 0 {
                return k;
            }
        }
    }
    unreachable!("removing every edge separates s and t")
}

/// Edge sets of all node-simple `s–t` paths.
pub fn simple_paths(n: usize, edges: &[(usize, usize)], s: usize, t: usize) -> Vec<u32> {
    let mut out = Vec::new();
    fn dfs(
        edges: &[(usize, usize)],
        u: usize,
        t: usize,
        visited: u64,
        used: u32,
        out: &mut Vec<u32>,
    ) {
        if u == t {
            out.push(used);
            return;
        }
        for (k, &(a, b)) in edges.iter().enumerate() {
            let v = if a == u {
                b
            } else if b == u {
                a
            } else {
                continue;
            };
            if visited >> v & 1 == 0 {
                dfs(edges, v, t, visited | 1 << v, used | 1 << k, out);
            }
        }
    }
    let _ = n;
    dfs(edges, s, t, 1 << s, 0, &mut out);
    out
}

/// Edge unions of all collections of `size` pairwise edge-disjoint paths.
pub fn disjoint_unions(paths: &[u32], size: usize) -> BTreeSet<u32> {
    let mut out = BTreeSet::new();
    fn rec(paths: &[u32], start: usize, left: usize, acc: u32, out: &mut BTreeSet<u32>) {
        if left == 0 {
            out.insert(acc);
            return;
        }
        for i in start..paths.len() {
            if paths[i] & acc == 0 {
                rec(paths, i + 1, left - 1, acc | paths[i], out);
            }
        }
    }
    rec(paths, 0, size, 0, &mut out);
    out
}

/// Largest number of pairwise edge-disjoint `s–t` paths, by search over
/// simple paths.
pub fn max_disjoint_paths(n: usize, edges: &[(usize, usize)], s: usize, t: usize) -> usize {
    let paths = simple_paths(n, edges, s, t);
    (0..=edges.len())
        .rev()
        .find(|&k| !disjoint_unions(&paths, k).is_empty())
        .unwrap_or(0)
}

/// `s` lies on a cycle iff some incident edge `(s, u)` leaves `u`
/// reachable from `s` once that edge is gone.
pub fn on_cycle(n: usize, edges: &[(usize, usize)], alive: u32, s: usize) -> bool {
    edges.iter().enumerate().any(|(k, &(a, b))| {
        if alive >> k & 1 == 0 || (a != s && b != s) {
            return false;
        }
        let u = if a == s { b } else { a };
        reach(n, edges, alive & !(1 << k), s) >> u & 1 == 1
    })
}

/// Fewest edges of `alive` whose removal leaves `s` on no cycle.
pub fn cycle_breaking(n: usize, edges: &[(usize, usize)], alive: u32, s: usize) -> usize {
    for k in 0..=alive.count_ones() as usize {
        for cut in subsets_of_size(alive, k) {
            if !on_cycle(n, edges, alive & !cut, s) {
                return k;
            }
        }
    }
    unreachable!("an edgeless graph has no cycles")
}

/// Exhaustive transitive κ. The path set removed before measuring cycle
/// isolation is not unique, so both the largest and the smallest resulting
/// κ are returned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleKappa {
    pub max_over_path_sets: usize,
    pub min_over_path_sets: usize,
}

pub fn kappa(n: usize, edges: &[(usize, usize)]) -> OracleKappa {
    let all = full(edges.len());
    let mut cache: HashMap<(usize, u32), usize> = HashMap::new();
    let mut c = |s: usize, alive: u32| *cache.entry((s, alive)).or_insert_with(|| cycle_breaking(n, edges, alive, s));
    let (mut hi, mut lo) = (0, 0);
    for s in 0..n {
        for t in s + 1..n {
            let lambda = min_cut(n, edges, s, t);
            let unions = disjoint_unions(&simple_paths(n, edges, s, t), lambda);
            assert!(!unions.is_empty(), "Menger: {lambda} disjoint paths must exist");
            let terms: Vec<usize> = unions
                .iter()
                .map(|&u| lambda + c(s, all & !u).min(c(t, all & !u)))
                .collect();
            hi = hi.max(*terms.iter().max().unwrap());
            lo = lo.max(*terms.iter().min().unwrap());
        }
    }
    OracleKappa {
        max_over_path_sets: hi,
        min_over_path_sets: lo,
    }
}

/// Exhaustive intransitive κ: adjacent pairs pay their own edge plus cycle
/// isolation without it, other pairs pay cycle isolation only.
pub fn kappa_intransitive(n: usize, edges: &[(usize, usize)]) -> usize {
    let all = full(edges.len());
    let mut best = 0;
    for s in 0..n {
        for t in s + 1..n {
            let own = edges.iter().position(|&(a, b)| (a, b) == (s, t) || (a, b) == (t, s));
            let term = match own {
                Some(k) => {
                    let alive = all & !(1 << k);
                    1 + cycle_breaking(n, edges, alive, s).min(cycle_breaking(n, edges, alive, t))
                }
                None => cycle_breaking(n, edges, all, s).min(cycle_breaking(n, edges, all, t)),
            };
            best = best.max(term);
        }
    }
    best
}

/// Number of connected components, by repeated reachability.
pub fn components(n: usize, edges: &[(usize, usize)], alive: u32, skip: Option<usize>) -> usize {
    let mut seen = 0u64;
    let mut count = 0;
    for v in 0..n {
        if Some(v) == skip || seen >> v & 1 == 1 {
            continue;
        }
        count += 1;
        seen |= reach(n, edges, alive, v);
    }
    count
}

/// Uniform random simple graph with `2..=max_nodes` nodes and at most
/// `max_edges` edges.
pub fn random_graph<R: Rng>(rng: &mut R, max_nodes: usize, max_edges: usize) -> (usize, Edges) {
    let n = rng.random_range(2..=max_nodes);
    let mut all: Edges = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let m = rng.random_range(0..=max_edges.min(all.len()));
    for i in 0..m {
        let j = rng.random_range(i..all.len());
        all.swap(i, j);
    }
    all.truncate(m);
    (n, all)
}

/// Random tree on `n` nodes: node `i` attaches to a random earlier node.
pub fn random_tree<R: Rng>(rng: &mut R, n: usize) -> Edges {
    (1..n).map(|i| (rng.random_range(0..i), i)).collect()
}
