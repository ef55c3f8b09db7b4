//! Undirected graph view of a pairwise dataset.
//!
//! Every individual is a node and every labelled pair is an edge. Node ids
//! are opaque strings; they are mapped to dense indices in first-appearance
//! order, and all structural algorithms work on those indices through
//! [`Topology`].

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i.to_string())
    }
}

/// Pairwise label: `0` for same class, `1` for different classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum PairLabel {
    Similar,
    Dissimilar,
}

impl PairLabel {
    pub fn from_classes(a: u32, b: u32) -> Self {
        if a == b {
            PairLabel::Similar
        } else {
            PairLabel::Dissimilar
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            PairLabel::Similar => PairLabel::Dissimilar,
            PairLabel::Dissimilar => PairLabel::Similar,
        }
    }

    pub fn is_dissimilar(self) -> bool {
        self == PairLabel::Dissimilar
    }
}

impl From<PairLabel> for u8 {
    fn from(y: PairLabel) -> u8 {
        match y {
            PairLabel::Similar => 0,
            PairLabel::Dissimilar => 1,
        }
    }
}

impl TryFrom<u8> for PairLabel {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(PairLabel::Similar),
            1 => Ok(PairLabel::Dissimilar),
            other => Err(Error::InvalidLabel(other.to_string())),
        }
    }
}

/// One pair `z = (Δx, y)` between individuals `i` and `j`, with `Δx = x_i − x_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PairwiseDatum<T> {
    pub i: NodeId,
    pub j: NodeId,
    pub delta_x: Vec<T>,
    pub y: PairLabel,
}

impl<T: Scalar> PairwiseDatum<T> {
    pub fn new(i: impl Into<NodeId>, j: impl Into<NodeId>, delta_x: Vec<T>, y: PairLabel) -> Result<Self> {
        let datum = PairwiseDatum {
            i: i.into(),
            j: j.into(),
            delta_x,
            y,
        };
        datum.validate()?;
        Ok(datum)
    }

    pub fn validate(&self) -> Result<()> {
        if self.i == self.j {
            return Err(Error::SelfLoop(self.i.clone()));
        }
        if self.delta_x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(self.i.clone(), self.j.clone()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.delta_x.len()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKind {
    /// Labels compose along paths (same disease, same employer).
    #[default]
    Transitive,
    /// Labels do not compose (friendship); only feature inference matters.
    Intransitive,
}

impl std::str::FromStr for RelationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transitive" => Ok(RelationKind::Transitive),
            "intransitive" => Ok(RelationKind::Intransitive),
            other => Err(Error::ConfigInvalid(format!("unknown relation kind '{other}'"))),
        }
    }
}

/// Index-based simple undirected graph.
///
/// Edges are stored with the lower endpoint first. Adjacency lists are sorted
/// by neighbour index, which fixes the traversal order of every algorithm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    adj: Vec<Vec<(usize, usize)>>,
    edges: Vec<(usize, usize)>,
}

impl Topology {
    /// Builds a graph on `n` nodes. Rejects self loops, duplicate edges and
    /// out-of-range endpoints; the error carries index-formatted node ids.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        let mut seen = HashMap::with_capacity(edges.len());
        let mut stored = Vec::with_capacity(edges.len());
        for (e, &(a, b)) in edges.iter().enumerate() {
            if a >= n {
                return Err(Error::UnknownNode(a.into()));
            }
            if b >= n {
                return Err(Error::UnknownNode(b.into()));
            }
            if a == b {
                return Err(Error::SelfLoop(a.into()));
            }
            let key = (a.min(b), a.max(b));
            if seen.insert(key, e).is_some() {
                return Err(Error::DuplicateEdge(key.0.into(), key.1.into()));
            }
            adj[a].push((b, e));
            adj[b].push((a, e));
            stored.push(key);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Ok(Topology { adj, edges: stored })
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// `(neighbour, edge index)` pairs sorted by neighbour.
    pub fn neighbors(&self, u: usize) -> &[(usize, usize)] {
        &self.adj[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adj[u].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        self.adj[u]
            .binary_search_by_key(&v, |&(w, _)| w)
            .ok()
            .map(|pos| self.adj[u][pos].1)
    }

    /// Component id per node (ids assigned in node order) and the count.
    pub fn components(&self) -> (Vec<usize>, usize) {
        self.components_without(None)
    }

    fn components_without(&self, removed: Option<usize>) -> (Vec<usize>, usize) {
        let n = self.node_count();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..n {
            if comp[start] != usize::MAX || Some(start) == removed {
                continue;
            }
            comp[start] = count;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &(v, _) in &self.adj[u] {
                    if comp[v] == usize::MAX && Some(v) != removed {
                        comp[v] = count;
                        queue.push_back(v);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    /// Number of connected components, isolated nodes included.
    pub fn component_count(&self) -> usize {
        self.components().1
    }

    /// Extra components created by deleting `s` and its incident edges.
    ///
    /// Deleting a leaf creates none, deleting the middle of `a–s–b` creates
    /// one. An isolated node yields zero rather than minus one.
    pub fn component_increase_on_removal(&self, s: usize) -> usize {
        if self.degree(s) == 0 {
            return 0;
        }
        // Only the component holding s can change; count what it splits into.
        let mut pieces = 0;
        let mut mark = vec![false; self.node_count()];
        mark[s] = true;
        let mut queue = VecDeque::new();
        for &(start, _) in &self.adj[s] {
            if mark[start] {
                continue;
            }
            pieces += 1;
            mark[start] = true;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &(v, _) in &self.adj[u] {
                    if !mark[v] {
                        mark[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        pieces - 1
    }

    /// Copy of the graph without the flagged edges. Edge indices are
    /// renumbered densely in the original order.
    pub fn without_edges(&self, removed: &[bool]) -> Topology {
        let kept: Vec<(usize, usize)> = self
            .edges
            .iter()
            .zip(removed)
            .filter(|(_, &r)| !r)
            .map(|(&e, _)| e)
            .collect();
        Topology::new(self.node_count(), &kept).expect("subgraph of a valid graph is valid")
    }

    /// True when the graph has no cycle.
    pub fn is_forest(&self) -> bool {
        self.edge_count() + self.component_count() == self.node_count()
    }
}

/// A pairwise dataset viewed as a graph.
#[derive(Clone, Debug)]
pub struct PairGraph<T> {
    ids: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    topo: Topology,
    pairs: Vec<PairwiseDatum<T>>,
    relation: RelationKind,
    dim: usize,
}

impl<T: Scalar> PairGraph<T> {
    /// Builds the graph from a pair list; the node set is the union of
    /// endpoints in first-appearance order.
    pub fn build(pairs: Vec<PairwiseDatum<T>>, relation: RelationKind) -> Result<Self> {
        Self::build_with_nodes(std::iter::empty::<NodeId>(), pairs, relation)
    }

    /// Like [`PairGraph::build`] but seeds the node set with `nodes` first,
    /// which may include individuals that appear in no pair.
    pub fn build_with_nodes<I>(nodes: I, pairs: Vec<PairwiseDatum<T>>, relation: RelationKind) -> Result<Self>
    where
        I: IntoIterator,
        I::Item: Into<NodeId>,
    {
        let mut ids = Vec::new();
        let mut index = HashMap::new();
        let mut intern = |id: &NodeId, ids: &mut Vec<NodeId>| -> usize {
            *index.entry(id.clone()).or_insert_with(|| {
                ids.push(id.clone());
                ids.len() - 1
            })
        };
        for node in nodes {
            intern(&node.into(), &mut ids);
        }
        let dim = pairs.first().map_or(0, PairwiseDatum::dim);
        let mut seen: HashMap<(usize, usize), ()> = HashMap::with_capacity(pairs.len());
        let mut edges = Vec::with_capacity(pairs.len());
        for p in &pairs {
            p.validate()?;
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
            let a = intern(&p.i, &mut ids);
            let b = intern(&p.j, &mut ids);
            let key = (a.min(b), a.max(b));
            if seen.insert(key, ()).is_some() {
                return Err(Error::DuplicateEdge(p.i.clone(), p.j.clone()));
            }
            edges.push((a, b));
        }
        let index = ids.iter().enumerate().map(|(k, id)| (id.clone(), k)).collect();
        let topo = Topology::new(ids.len(), &edges)?;
        Ok(PairGraph {
            ids,
            index,
            topo,
            pairs,
            relation,
            dim,
        })
    }

    /// Structure-only graph on nodes `0..n` (ids are decimal strings) with
    /// zero-dimensional pairs labelled similar.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], relation: RelationKind) -> Result<Self> {
        let pairs = edges
            .iter()
            .map(|&(a, b)| PairwiseDatum::new(a, b, Vec::new(), PairLabel::Similar))
            .collect::<Result<Vec<_>>>()?;
        Self::build_with_nodes((0..n).map(NodeId::from), pairs, relation)
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn relation(&self) -> RelationKind {
        self.relation
    }

    pub fn pairs(&self) -> &[PairwiseDatum<T>] {
        &self.pairs
    }

    pub fn node_ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.pairs.len()
    }

    /// Feature dimension shared by all pairs (0 for an empty graph).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn index_of(&self, id: &NodeId) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownNode(id.clone()))
    }

    pub fn id(&self, idx: usize) -> &NodeId {
        &self.ids[idx]
    }

    pub fn degree(&self, s: &NodeId) -> Result<usize> {
        Ok(self.topo.degree(self.index_of(s)?))
    }

    pub fn component_count(&self) -> usize {
        self.topo.component_count()
    }

    pub fn component_increase_on_removal(&self, s: &NodeId) -> Result<usize> {
        Ok(self.topo.component_increase_on_removal(self.index_of(s)?))
    }

    /// New graph without the listed edges; the node set is unchanged.
    pub fn remove_edges(&self, edge_set: &[(NodeId, NodeId)]) -> Result<Self> {
        let mut removed = vec![false; self.edge_count()];
        for (a, b) in edge_set {
            let (ia, ib) = (self.index_of(a)?, self.index_of(b)?);
            let e = self
                .topo
                .edge_between(ia, ib)
                .ok_or_else(|| Error::MissingEdge(a.clone(), b.clone()))?;
            removed[e] = true;
        }
        let pairs = self
            .pairs
            .iter()
            .zip(&removed)
            .filter(|(_, &r)| !r)
            .map(|(p, _)| p.clone())
            .collect();
        Self::build_with_nodes(self.ids.iter().cloned(), pairs, self.relation)
    }
}
