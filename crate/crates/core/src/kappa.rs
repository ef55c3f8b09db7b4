//! Privacy distance `κ` of a pair graph.
//!
//! For a target pair `⟨s,t⟩` an attacker can infer the label along any
//! `s–t` path and the feature difference from any cycle through `s` or `t`.
//! Hiding the pair therefore costs `|P_st| + min(c_s, c_t)` edges, where
//! `|P_st|` is the maximum number of edge-disjoint `s–t` paths and `c_s`
//! the number of edges that must go before `s` lies on no cycle of
//! `G − P_st`. `κ` is the maximum of that cost over all node pairs.
//!
//! The exact value needs a cycle-isolation search that is exponential in
//! the worst case, so it is guarded by a node limit and an expansion budget.
//! [`kappa_upper`] gives the linear-per-node bound
//! `κ′ = max_s De(s) − Co₊(s̄)` and is what large graphs use.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairgraph::{NodeId, PairGraph, RelationKind, Topology};
use crate::scalar::Scalar;

pub const DEFAULT_EXACT_LIMIT: usize = 64;
pub const DEFAULT_SEARCH_BUDGET: u64 = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaMethod {
    Exact,
    UpperBound,
    Intransitive,
    NodeDp,
}

/// One evaluated node pair: path count and cycle-isolation costs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairTerm {
    pub s: NodeId,
    pub t: NodeId,
    pub paths: usize,
    pub c_s: usize,
    pub c_t: usize,
    pub term: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KappaReport {
    pub kappa: usize,
    pub method: KappaMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_pair: Option<(NodeId, NodeId)>,
    /// Maximizing node for the per-node bounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_node: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_pair_terms: Option<Vec<PairTerm>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactConfig {
    /// Largest node count accepted by the exact search.
    pub node_limit: usize,
    /// Expansion budget for each cycle-isolation search.
    pub search_budget: u64,
    /// Keep every evaluated pair term (disables pruning).
    pub record_terms: bool,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig {
            node_limit: DEFAULT_EXACT_LIMIT,
            search_budget: DEFAULT_SEARCH_BUDGET,
            record_terms: false,
        }
    }
}

/// A maximum set of edge-disjoint `s–t` paths.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DisjointPaths {
    pub count: usize,
    /// Node sequences, each starting at `s` and ending at `t`.
    pub paths: Vec<Vec<usize>>,
    /// Union of the edge indices used by `paths`, sorted.
    pub edges: Vec<usize>,
}

/// Maximum edge-disjoint `s–t` paths by unit-capacity augmenting paths.
///
/// Each undirected edge carries a net flow in `{-1, 0, 1}`. Augmenting paths
/// are shortest paths in the residual graph, explored in neighbour-index
/// order, so the witness set is deterministic.
pub fn edge_disjoint_paths(topo: &Topology, s: usize, t: usize) -> DisjointPaths {
    assert_ne!(s, t, "source equals target");
    let n = topo.node_count();
    let edges = topo.edges();
    // net flow from the lower endpoint to the higher one
    let mut flow = vec![0i8; topo.edge_count()];
    let residual = |flow: &[i8], u: usize, e: usize| -> bool {
        if edges[e].0 == u {
            flow[e] < 1
        } else {
            flow[e] > -1
        }
    };
    let mut count = 0;
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut queue = VecDeque::new();
    loop {
        prev.iter_mut().for_each(|p| *p = None);
        let mut seen = vec![false; n];
        seen[s] = true;
        queue.clear();
        queue.push_back(s);
        'bfs: while let Some(u) = queue.pop_front() {
            for &(v, e) in topo.neighbors(u) {
                if !seen[v] && residual(&flow, u, e) {
                    seen[v] = true;
                    prev[v] = Some((u, e));
                    if v == t {
                        break 'bfs;
                    }
                    queue.push_back(v);
                }
            }
        }
        if !seen[t] {
            break;
        }
        let mut v = t;
        while let Some((u, e)) = prev[v] {
            if edges[e].0 == u {
                flow[e] += 1;
            } else {
                flow[e] -= 1;
            }
            v = u;
        }
        count += 1;
    }
    decompose(topo, &flow, s, t, count)
}

fn decompose(topo: &Topology, flow: &[i8], s: usize, t: usize, count: usize) -> DisjointPaths {
    let edges = topo.edges();
    let n = topo.node_count();
    let mut used = vec![false; flow.len()];
    let carries = |u: usize, e: usize| -> bool {
        let (lo, _) = edges[e];
        (flow[e] == 1 && lo == u) || (flow[e] == -1 && lo != u)
    };
    let mut paths = Vec::with_capacity(count);
    let mut path_edges = Vec::new();
    let mut position = vec![usize::MAX; n];
    for _ in 0..count {
        let mut nodes = vec![s];
        let mut via: Vec<usize> = Vec::new();
        position[s] = 0;
        let mut cur = s;
        while cur != t {
            let (next, e) = topo
                .neighbors(cur)
                .iter()
                .copied()
                .find(|&(_, e)| !used[e] && carries(cur, e))
                .expect("flow conservation leaves an outgoing arc");
            used[e] = true;
            if position[next] != usize::MAX {
                // flow cycle: drop the loop and continue from `next`
                let keep = position[next];
                for &dropped in &nodes[keep + 1..] {
                    position[dropped] = usize::MAX;
                }
                nodes.truncate(keep + 1);
                via.truncate(keep);
            } else {
                position[next] = nodes.len();
                nodes.push(next);
                via.push(e);
            }
            cur = next;
        }
        for &v in &nodes {
            position[v] = usize::MAX;
        }
        path_edges.extend_from_slice(&via);
        paths.push(nodes);
    }
    path_edges.sort_unstable();
    DisjointPaths {
        count,
        paths,
        edges: path_edges,
    }
}

/// Maximum edge-disjoint `s–t` paths between two named nodes.
pub fn max_edge_disjoint_paths<T: Scalar>(g: &PairGraph<T>, s: &NodeId, t: &NodeId) -> Result<(usize, Vec<Vec<NodeId>>)> {
    let (si, ti) = (g.index_of(s)?, g.index_of(t)?);
    if si == ti {
        return Err(Error::SameNode(s.clone()));
    }
    let found = edge_disjoint_paths(g.topology(), si, ti);
    let paths = found
        .paths
        .iter()
        .map(|p| p.iter().map(|&v| g.id(v).clone()).collect())
        .collect();
    Ok((found.count, paths))
}

/// Exact minimum-deletion search that leaves one node on no cycle.
///
/// Any solution must delete an edge of every cycle through `s`, so the
/// search branches on the edges of a shortest such cycle. Within one node
/// the i-th branch keeps the first `i − 1` cycle edges, which avoids
/// revisiting equivalent deletion sets. A greedy packing of edge-disjoint
/// cycles through `s` gives the lower bound used for pruning.
struct CycleIsolation<'a> {
    topo: &'a Topology,
    s: usize,
    removed: Vec<bool>,
    forbidden: Vec<bool>,
    budget: u64,
    spent: u64,
    // scratch buffers
    label: Vec<usize>,
    dist: Vec<usize>,
    parent: Vec<usize>,
    queue: VecDeque<usize>,
}

impl<'a> CycleIsolation<'a> {
    fn new(topo: &'a Topology, s: usize, removed: &[bool], budget: u64) -> Self {
        let n = topo.node_count();
        CycleIsolation {
            topo,
            s,
            removed: removed.to_vec(),
            forbidden: vec![false; topo.edge_count()],
            budget,
            spent: 0,
            label: vec![usize::MAX; n],
            dist: vec![0; n],
            parent: vec![usize::MAX; n],
            queue: VecDeque::new(),
        }
    }

    fn other(&self, e: usize, v: usize) -> usize {
        let (a, b) = self.topo.edges()[e];
        if a == v {
            b
        } else {
            a
        }
    }

    /// Shortest cycle through `s` under the current deletions, as edge indices.
    fn shortest_cycle(&mut self, removed: &[bool]) -> Option<Vec<usize>> {
        let s = self.s;
        self.label.iter_mut().for_each(|l| *l = usize::MAX);
        self.queue.clear();
        for &(u, e) in self.topo.neighbors(s) {
            if !removed[e] {
                self.label[u] = u;
                self.dist[u] = 1;
                self.parent[u] = e;
                self.queue.push_back(u);
            }
        }
        while let Some(x) = self.queue.pop_front() {
            for &(y, e) in self.topo.neighbors(x) {
                if y != s && !removed[e] && self.label[y] == usize::MAX {
                    self.label[y] = self.label[x];
                    self.dist[y] = self.dist[x] + 1;
                    self.parent[y] = e;
                    self.queue.push_back(y);
                }
            }
        }
        let mut best: Option<(usize, usize)> = None;
        for (e, &(x, y)) in self.topo.edges().iter().enumerate() {
            if removed[e] || x == s || y == s {
                continue;
            }
            let (lx, ly) = (self.label[x], self.label[y]);
            if lx == usize::MAX || ly == usize::MAX || lx == ly {
                continue;
            }
            let len = self.dist[x] + self.dist[y] + 1;
            if best.is_none_or(|(l, _)| len < l) {
                best = Some((len, e));
            }
        }
        let (_, bridge) = best?;
        let (x, y) = self.topo.edges()[bridge];
        let mut cycle = vec![bridge];
        for start in [x, y] {
            let mut v = start;
            while v != s {
                let e = self.parent[v];
                cycle.push(e);
                v = self.other(e, v);
            }
        }
        cycle.sort_unstable();
        Some(cycle)
    }

    fn packing_bound(&mut self) -> usize {
        let mut scratch = self.removed.clone();
        let mut count = 0;
        while let Some(cycle) = self.shortest_cycle(&scratch) {
            for e in cycle {
                scratch[e] = true;
            }
            count += 1;
        }
        count
    }

    fn feasible(&mut self, k: usize) -> Result<bool> {
        self.spent += 1;
        if self.spent > self.budget {
            return Err(Error::SearchBudgetExceeded(self.budget));
        }
        let removed = std::mem::take(&mut self.removed);
        let cycle = self.shortest_cycle(&removed);
        self.removed = removed;
        let Some(cycle) = cycle else {
            return Ok(true);
        };
        if k == 0 || self.packing_bound() > k {
            return Ok(false);
        }
        let mut newly_forbidden = Vec::new();
        let mut found = false;
        for e in cycle {
            if self.forbidden[e] {
                continue;
            }
            self.removed[e] = true;
            let ok = self.feasible(k - 1);
            self.removed[e] = false;
            match ok {
                Ok(true) => {
                    found = true;
                    break;
                }
                Ok(false) => {
                    self.forbidden[e] = true;
                    newly_forbidden.push(e);
                }
                Err(err) => {
                    for f in newly_forbidden {
                        self.forbidden[f] = false;
                    }
                    return Err(err);
                }
            }
        }
        for f in newly_forbidden {
            self.forbidden[f] = false;
        }
        Ok(found)
    }

    fn solve(mut self) -> Result<usize> {
        let mut k = self.packing_bound();
        loop {
            if self.feasible(k)? {
                return Ok(k);
            }
            k += 1;
        }
    }
}

/// `c_s`: minimum number of edges whose deletion leaves `s` on no cycle of
/// the graph with `removed` edges already gone.
pub fn cycle_isolation_in(topo: &Topology, s: usize, removed: &[bool], budget: u64) -> Result<usize> {
    CycleIsolation::new(topo, s, removed, budget).solve()
}

/// `c_s` on the whole graph for a named node.
pub fn cycle_isolation_count<T: Scalar>(g: &PairGraph<T>, s: &NodeId) -> Result<usize> {
    let si = g.index_of(s)?;
    let removed = vec![false; g.edge_count()];
    cycle_isolation_in(g.topology(), si, &removed, DEFAULT_SEARCH_BUDGET)
}

/// Per-node value `De(s) − Co₊(s̄)` of the efficient bound.
pub fn node_bounds(topo: &Topology) -> Vec<usize> {
    (0..topo.node_count())
        .map(|s| topo.degree(s) - topo.component_increase_on_removal(s))
        .collect()
}

/// `(s, t, |P_st|, c_s, c_t)` by node index.
pub type RawTerm = (usize, usize, usize, usize, usize);

/// Index-level result of a κ computation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopoKappa {
    pub kappa: usize,
    pub witness_pair: Option<(usize, usize)>,
    pub witness_node: Option<usize>,
    /// `(s, t, |P_st|, c_s, c_t)` for every evaluated pair when recorded.
    pub terms: Option<Vec<RawTerm>>,
}

/// Whether the exact search accepts this graph. Forests are always
/// accepted unless terms are recorded: the scan stops at the first adjacent
/// pair because `κ′ = 1` there.
pub fn exact_accepts(topo: &Topology, cfg: &ExactConfig) -> bool {
    topo.node_count() <= cfg.node_limit || (!cfg.record_terms && topo.is_forest())
}

fn guard(topo: &Topology, cfg: &ExactConfig) -> Result<()> {
    if !exact_accepts(topo, cfg) {
        return Err(Error::GraphTooLarge {
            nodes: topo.node_count(),
            limit: cfg.node_limit,
        });
    }
    Ok(())
}

/// Exact transitive κ on an index graph.
///
/// Pairs are visited in lexicographic order. A pair is skipped when the
/// cheap bound `min(De(s)−Co₊(s̄), De(t)−Co₊(t̄))` cannot beat the current
/// best, and the scan stops once the best equals the global bound `κ′`.
/// Both shortcuts are disabled when terms are recorded.
pub fn kappa_exact_topology(topo: &Topology, cfg: &ExactConfig) -> Result<TopoKappa> {
    guard(topo, cfg)?;
    let n = topo.node_count();
    let bounds = node_bounds(topo);
    let global = bounds.iter().copied().max().unwrap_or(0);
    let mut best: Option<(usize, (usize, usize))> = None;
    let mut terms = cfg.record_terms.then(Vec::new);
    let mut removed = vec![false; topo.edge_count()];
    'outer: for s in 0..n {
        for t in s + 1..n {
            if terms.is_none() {
                if let Some((b, _)) = best {
                    if b == global {
                        break 'outer;
                    }
                    if bounds[s].min(bounds[t]) <= b {
                        continue;
                    }
                }
            }
            let paths = edge_disjoint_paths(topo, s, t);
            for &e in &paths.edges {
                removed[e] = true;
            }
            let c_s = cycle_isolation_in(topo, s, &removed, cfg.search_budget);
            let c_t = cycle_isolation_in(topo, t, &removed, cfg.search_budget);
            for &e in &paths.edges {
                removed[e] = false;
            }
            let (c_s, c_t) = (c_s?, c_t?);
            let term = paths.count + c_s.min(c_t);
            if let Some(list) = terms.as_mut() {
                list.push((s, t, paths.count, c_s, c_t));
            }
            if best.is_none_or(|(b, _)| term > b) {
                best = Some((term, (s, t)));
            }
        }
    }
    Ok(TopoKappa {
        kappa: best.map_or(0, |(b, _)| b),
        witness_pair: best.map(|(_, p)| p),
        witness_node: None,
        terms,
    })
}

/// Exact κ for intransitive relations.
///
/// Adjacent pairs cost `1 + min(c_s, c_t)` measured without the pair's own
/// edge; non-adjacent pairs cost `min(c_s, c_t)` on the whole graph.
pub fn kappa_intransitive_topology(topo: &Topology, cfg: &ExactConfig) -> Result<TopoKappa> {
    guard(topo, cfg)?;
    let n = topo.node_count();
    let mut removed = vec![false; topo.edge_count()];
    let whole = (0..n)
        .map(|s| cycle_isolation_in(topo, s, &removed, cfg.search_budget))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(usize, (usize, usize))> = None;
    let mut terms = cfg.record_terms.then(Vec::new);
    for s in 0..n {
        for t in s + 1..n {
            let (paths, c_s, c_t) = match topo.edge_between(s, t) {
                Some(e) => {
                    if terms.is_none() && best.is_some_and(|(b, _)| topo.degree(s).min(topo.degree(t)) <= b) {
                        continue;
                    }
                    removed[e] = true;
                    let c_s = cycle_isolation_in(topo, s, &removed, cfg.search_budget);
                    let c_t = cycle_isolation_in(topo, t, &removed, cfg.search_budget);
                    removed[e] = false;
                    (1, c_s?, c_t?)
                }
                None => (0, whole[s], whole[t]),
            };
            let term = paths + c_s.min(c_t);
            if let Some(list) = terms.as_mut() {
                list.push((s, t, paths, c_s, c_t));
            }
            if best.is_none_or(|(b, _)| term > b) {
                best = Some((term, (s, t)));
            }
        }
    }
    Ok(TopoKappa {
        kappa: best.map_or(0, |(b, _)| b),
        witness_pair: best.map(|(_, p)| p),
        witness_node: None,
        terms,
    })
}

/// `κ′ = max_s De(s) − Co₊(s̄)`, first maximizing node as witness.
///
/// Also bounds the intransitive κ: an adjacent pair costs at most
/// `De(s) − Co₊(s̄)` and a non-adjacent one at most one less.
pub fn kappa_upper_topology(topo: &Topology) -> TopoKappa {
    let bounds = node_bounds(topo);
    let witness = bounds
        .iter()
        .enumerate()
        .fold(None, |acc: Option<(usize, usize)>, (s, &b)| match acc {
            Some((_, best)) if best >= b => acc,
            _ => Some((s, b)),
        });
    TopoKappa {
        kappa: witness.map_or(0, |(_, b)| b),
        witness_pair: None,
        witness_node: witness.map(|(s, _)| s),
        terms: None,
    }
}

pub fn kappa_node_dp_topology(topo: &Topology) -> TopoKappa {
    let witness = (0..topo.node_count()).fold(None, |acc: Option<(usize, usize)>, s| match acc {
        Some((_, best)) if best >= topo.degree(s) => acc,
        _ => Some((s, topo.degree(s))),
    });
    TopoKappa {
        kappa: witness.map_or(0, |(_, d)| d),
        witness_pair: None,
        witness_node: witness.map(|(s, _)| s),
        terms: None,
    }
}

fn to_report<T: Scalar>(g: &PairGraph<T>, raw: TopoKappa, method: KappaMethod) -> KappaReport {
    KappaReport {
        kappa: raw.kappa,
        method,
        witness_pair: raw.witness_pair.map(|(s, t)| (g.id(s).clone(), g.id(t).clone())),
        witness_node: raw.witness_node.map(|s| g.id(s).clone()),
        per_pair_terms: raw.terms.map(|list| {
            list.into_iter()
                .map(|(s, t, paths, c_s, c_t)| PairTerm {
                    s: g.id(s).clone(),
                    t: g.id(t).clone(),
                    paths,
                    c_s,
                    c_t,
                    term: paths + c_s.min(c_t),
                })
                .collect()
        }),
    }
}

pub fn kappa_exact<T: Scalar>(g: &PairGraph<T>, cfg: &ExactConfig) -> Result<KappaReport> {
    Ok(to_report(g, kappa_exact_topology(g.topology(), cfg)?, KappaMethod::Exact))
}

pub fn kappa_upper<T: Scalar>(g: &PairGraph<T>) -> KappaReport {
    to_report(g, kappa_upper_topology(g.topology()), KappaMethod::UpperBound)
}

pub fn kappa_intransitive<T: Scalar>(g: &PairGraph<T>, cfg: &ExactConfig) -> Result<KappaReport> {
    if g.relation() != RelationKind::Intransitive {
        return Err(Error::RelationMismatch {
            expected: "intransitive",
        });
    }
    Ok(to_report(
        g,
        kappa_intransitive_topology(g.topology(), cfg)?,
        KappaMethod::Intransitive,
    ))
}

pub fn kappa_node_dp<T: Scalar>(g: &PairGraph<T>) -> KappaReport {
    to_report(g, kappa_node_dp_topology(g.topology()), KappaMethod::NodeDp)
}

/// How to obtain κ.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaStrategy {
    Exact,
    Upper,
    NodeDp,
    /// Exact search up to the node limit (and budget), the bound beyond.
    #[default]
    Auto,
}

impl std::str::FromStr for KappaStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(KappaStrategy::Exact),
            "upper" => Ok(KappaStrategy::Upper),
            "node-dp" => Ok(KappaStrategy::NodeDp),
            "auto" => Ok(KappaStrategy::Auto),
            other => Err(Error::ConfigInvalid(format!("unknown kappa method '{other}'"))),
        }
    }
}

/// Computes κ with the variant matching the graph's relation kind.
pub fn compute_kappa<T: Scalar>(g: &PairGraph<T>, strategy: KappaStrategy, cfg: &ExactConfig) -> Result<KappaReport> {
    let exact = |g: &PairGraph<T>| match g.relation() {
        RelationKind::Transitive => kappa_exact(g, cfg),
        RelationKind::Intransitive => kappa_intransitive(g, cfg),
    };
    match strategy {
        KappaStrategy::Exact => exact(g),
        KappaStrategy::Upper => Ok(kappa_upper(g)),
        KappaStrategy::NodeDp => Ok(kappa_node_dp(g)),
        KappaStrategy::Auto => {
            if !exact_accepts(g.topology(), cfg) {
                return Ok(kappa_upper(g));
            }
            match exact(g) {
                Err(Error::SearchBudgetExceeded(budget)) => {
                    log::warn!("exact kappa search exceeded {budget} expansions, using the upper bound");
                    Ok(kappa_upper(g))
                }
                other => other,
            }
        }
    }
}
