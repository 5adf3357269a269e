//! Undirected graph primitives: union-find, Kruskal, constrained Kruskal,
//! grid generation and an exhaustive spanning-tree enumerator.
//!
//! Edge ids are positions in [`Graph::edges`]. Every algorithm breaks weight
//! ties by ascending edge id, so all outputs are deterministic.

use std::cmp::Ordering;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("edge {edge} is a self-loop on vertex {vertex}")]
    SelfLoop { edge: usize, vertex: usize },
    #[error("edge {edge} references vertex {vertex} but the graph has {num_vertices} vertices")]
    VertexOutOfRange {
        edge: usize,
        vertex: usize,
        num_vertices: usize,
    },
    #[error("edges {first} and {second} join the same pair of vertices")]
    DuplicateEdge { first: usize, second: usize },
    #[error("graph is not spanning: {components} connected components")]
    NotSpanning { components: usize },
    #[error("expected {expected} edge weights, got {actual}")]
    WeightLength { expected: usize, actual: usize },
    #[error("weight of edge {edge} is not finite")]
    NonFiniteWeight { edge: usize },
    #[error("edge id {0} does not exist")]
    UnknownEdge(usize),
    #[error("forced edge set contains a cycle (edge {0} closes it)")]
    CyclicForest(usize),
    #[error("enumeration limited to {limit} edges, graph has {actual}")]
    TooLarge { limit: usize, actual: usize },
    #[error("grid dimensions must be at least 2x2, got {width}x{height}")]
    GridTooSmall { width: usize, height: usize },
}

/// Disjoint-set forest with path compression and union by rank.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
    components: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
            components: n,
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Merges the sets of `a` and `b`. Returns `false` (and changes nothing)
    /// when they already share a set.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            Ordering::Less => self.parent[ra] = rb,
            Ordering::Greater => self.parent[rb] = ra,
            Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        self.components -= 1;
        true
    }

    pub fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }

    pub fn components(&self) -> usize {
        self.components
    }
}

/// A connected simple undirected graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_vertices: usize,
    edges: Vec<(usize, usize)>,
    incident: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds and validates a graph: no self-loops, no parallel edges,
    /// connected.
    pub fn new(num_vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        let mut seen = std::collections::HashMap::with_capacity(edges.len());
        for (id, &(u, v)) in edges.iter().enumerate() {
            for vertex in [u, v] {
                if vertex >= num_vertices {
                    return Err(GraphError::VertexOutOfRange {
                        edge: id,
                        vertex,
                        num_vertices,
                    });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop {
                    edge: id,
                    vertex: u,
                });
            }
            if let Some(first) = seen.insert((u.min(v), u.max(v)), id) {
                return Err(GraphError::DuplicateEdge { first, second: id });
            }
        }
        let mut uf = UnionFind::new(num_vertices);
        for &(u, v) in &edges {
            uf.union(u, v);
        }
        if num_vertices == 0 || uf.components() != 1 {
            return Err(GraphError::NotSpanning {
                components: uf.components(),
            });
        }
        let mut incident = vec![Vec::new(); num_vertices];
        for (id, &(u, v)) in edges.iter().enumerate() {
            incident[u].push(id);
            incident[v].push(id);
        }
        Ok(Self {
            num_vertices,
            edges,
            incident,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> (usize, usize) {
        self.edges[id]
    }

    /// Edge ids incident to vertex `v`.
    pub fn incident(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    fn check_weights(&self, weights: &[f64]) -> Result<(), GraphError> {
        if weights.len() != self.edges.len() {
            return Err(GraphError::WeightLength {
                expected: self.edges.len(),
                actual: weights.len(),
            });
        }
        if let Some(edge) = weights.iter().position(|w| !w.is_finite()) {
            return Err(GraphError::NonFiniteWeight { edge });
        }
        Ok(())
    }
}

/// A set of edge ids, kept sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Forest {
    edge_ids: Vec<usize>,
}

impl Forest {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Wraps an edge-id list; sorts and deduplicates it. Acyclicity is
    /// checked by the algorithms that consume the forest.
    pub fn from_edges(mut edge_ids: Vec<usize>) -> Self {
        edge_ids.sort_unstable();
        edge_ids.dedup();
        Self { edge_ids }
    }

    pub fn edge_ids(&self) -> &[usize] {
        &self.edge_ids
    }

    pub fn len(&self) -> usize {
        self.edge_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_ids.is_empty()
    }

    pub fn contains(&self, edge: usize) -> bool {
        self.edge_ids.binary_search(&edge).is_ok()
    }

    pub fn weight(&self, weights: &[f64]) -> f64 {
        self.edge_ids.iter().map(|&e| weights[e]).sum()
    }

    /// True when the edges are acyclic in `graph`.
    pub fn is_acyclic(&self, graph: &Graph) -> bool {
        let mut uf = UnionFind::new(graph.num_vertices());
        self.edge_ids.iter().all(|&e| {
            let (u, v) = graph.edge(e);
            uf.union(u, v)
        })
    }

    /// True when the edges form a spanning tree of `graph`.
    pub fn is_spanning_tree(&self, graph: &Graph) -> bool {
        self.edge_ids.len() + 1 == graph.num_vertices() && self.is_acyclic(graph)
    }
}

/// Edge ids sorted by `(weight, id)`.
pub fn sorted_edge_order(weights: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[a].total_cmp(&weights[b]).then(a.cmp(&b)));
    order
}

/// Kruskal over a precomputed edge order, starting from a union-find that
/// may already hold forced edges. Returns the added edges.
pub(crate) fn kruskal_from_order(
    graph: &Graph,
    order: &[usize],
    uf: &mut UnionFind,
    out: &mut Vec<usize>,
) {
    for &e in order {
        if uf.components() == 1 {
            break;
        }
        let (u, v) = graph.edge(e);
        if uf.union(u, v) {
            out.push(e);
        }
    }
}

/// Minimum-weight spanning tree.
pub fn mst_kruskal(graph: &Graph, weights: &[f64]) -> Result<Forest, GraphError> {
    mst_constrained(graph, weights, &Forest::empty())
}

/// Minimum-weight spanning tree among those containing `forced`.
pub fn mst_constrained(
    graph: &Graph,
    weights: &[f64],
    forced: &Forest,
) -> Result<Forest, GraphError> {
    graph.check_weights(weights)?;
    let mut uf = UnionFind::new(graph.num_vertices());
    let mut tree = Vec::with_capacity(graph.num_vertices().saturating_sub(1));
    for &e in forced.edge_ids() {
        if e >= graph.num_edges() {
            return Err(GraphError::UnknownEdge(e));
        }
        let (u, v) = graph.edge(e);
        if !uf.union(u, v) {
            return Err(GraphError::CyclicForest(e));
        }
        tree.push(e);
    }
    kruskal_from_order(graph, &sorted_edge_order(weights), &mut uf, &mut tree);
    if uf.components() != 1 {
        return Err(GraphError::NotSpanning {
            components: uf.components(),
        });
    }
    Ok(Forest::from_edges(tree))
}

/// Maximum edge count accepted by [`enumerate_spanning_trees`].
pub const ENUMERATION_EDGE_LIMIT: usize = 20;

/// Every spanning tree of `graph`, each exactly once, in lexicographic order
/// of sorted edge ids.
pub fn enumerate_spanning_trees(graph: &Graph) -> Result<Vec<Forest>, GraphError> {
    if graph.num_edges() > ENUMERATION_EDGE_LIMIT {
        return Err(GraphError::TooLarge {
            limit: ENUMERATION_EDGE_LIMIT,
            actual: graph.num_edges(),
        });
    }
    let target = graph.num_vertices() - 1;
    let mut trees = Vec::new();
    let mut chosen = Vec::with_capacity(target);
    let uf = UnionFind::new(graph.num_vertices());
    enumerate_rec(graph, 0, target, &mut chosen, &uf, &mut trees);
    Ok(trees)
}

fn enumerate_rec(
    graph: &Graph,
    next: usize,
    target: usize,
    chosen: &mut Vec<usize>,
    uf: &UnionFind,
    trees: &mut Vec<Forest>,
) {
    if chosen.len() == target {
        trees.push(Forest::from_edges(chosen.clone()));
        return;
    }
    let remaining = graph.num_edges() - next;
    if remaining < target - chosen.len() {
        return;
    }
    let (u, v) = graph.edge(next);
    let mut with = uf.clone();
    if with.union(u, v) {
        chosen.push(next);
        enumerate_rec(graph, next + 1, target, chosen, &with, trees);
        chosen.pop();
    }
    enumerate_rec(graph, next + 1, target, chosen, uf, trees);
}

/// `width × height` 4-neighbour grid. Vertex `(row, col)` has id
/// `row * width + col`; horizontal edges come first (row-major), then
/// vertical edges (row-major).
pub fn grid_graph(width: usize, height: usize) -> Result<Graph, GraphError> {
    if width < 2 || height < 2 {
        return Err(GraphError::GridTooSmall { width, height });
    }
    let mut edges = Vec::with_capacity(width * (height - 1) + height * (width - 1));
    for row in 0..height {
        for col in 0..width - 1 {
            let v = row * width + col;
            edges.push((v, v + 1));
        }
    }
    for row in 0..height - 1 {
        for col in 0..width {
            let v = row * width + col;
            edges.push((v, v + width));
        }
    }
    Graph::new(width * height, edges)
}
