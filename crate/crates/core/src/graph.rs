//! Compressed sparse-row storage for the undirected training graph and the
//! subgraphs cut out of it.
//!
//! Every undirected edge `{u, v}` with `u != v` is stored as the two arcs
//! `(u, v)` and `(v, u)`; a self-loop is stored as the single arc `(v, v)`.
//! Arc values hold the random-walk normalized adjacency `D^-1 A`, which is
//! not symmetric, so both directions are kept.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph<F> {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    norm_values: Vec<F>,
    degrees: Vec<usize>,
    /// Undirected edges as `(u, v)` with `u <= v`, ascending.
    edges: Vec<(usize, usize)>,
    /// Undirected edge id of every arc.
    arc_edge: Vec<usize>,
    self_loops: bool,
}

/// Builds the symmetrized, deduplicated CSR graph.
///
/// Self-loops present in `edges` are kept only when `self_loops` is set, in
/// which case every node receives one.
pub fn build_graph<F: Scalar>(
    edges: &[(usize, usize)],
    num_nodes: usize,
    self_loops: bool,
) -> Result<Graph<F>> {
    if num_nodes == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut arcs = Vec::with_capacity(2 * edges.len() + if self_loops { num_nodes } else { 0 });
    for &(u, v) in edges {
        for id in [u, v] {
            if id >= num_nodes {
                return Err(Error::NodeOutOfRange { id, num_nodes });
            }
        }
        if u != v {
            arcs.push((u, v));
            arcs.push((v, u));
        }
    }
    if self_loops {
        arcs.extend((0..num_nodes).map(|v| (v, v)));
    }
    arcs.sort_unstable();
    arcs.dedup();

    let mut row_offsets = vec![0usize; num_nodes + 1];
    for &(u, _) in &arcs {
        row_offsets[u + 1] += 1;
    }
    for v in 0..num_nodes {
        row_offsets[v + 1] += row_offsets[v];
    }
    let col_indices: Vec<usize> = arcs.iter().map(|&(_, v)| v).collect();
    let degrees: Vec<usize> = row_offsets.windows(2).map(|w| w[1] - w[0]).collect();
    let norm_values = arcs
        .iter()
        .map(|&(u, _)| F::one() / F::of_usize(degrees[u]))
        .collect();

    let mut graph = Graph {
        num_nodes,
        row_offsets,
        col_indices,
        norm_values,
        degrees,
        edges: Vec::new(),
        arc_edge: vec![usize::MAX; arcs.len()],
        self_loops,
    };
    // Forward arcs (u <= v) appear in ascending (u, v) order, which fixes the
    // edge numbering; reverse arcs then look up their twin.
    for (arc, &(u, v)) in arcs.iter().enumerate() {
        if u <= v {
            graph.arc_edge[arc] = graph.edges.len();
            graph.edges.push((u, v));
        }
    }
    for (arc, &(u, v)) in arcs.iter().enumerate() {
        if u > v {
            let twin = graph.arc_lookup(v, u).expect("arcs are symmetric");
            graph.arc_edge[arc] = graph.arc_edge[twin];
        }
    }
    Ok(graph)
}

impl<F: Scalar> Graph<F> {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Undirected edge count, self-loops included.
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.col_indices.len()
    }

    pub fn has_self_loops(&self) -> bool {
        self.self_loops
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    /// `D^-1 A` value of every arc, aligned with `col_indices`.
    pub fn norm_values(&self) -> &[F] {
        &self.norm_values
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn degree(&self, v: usize) -> usize {
        self.degrees[v]
    }

    pub fn arc_range(&self, v: usize) -> std::ops::Range<usize> {
        self.row_offsets[v]..self.row_offsets[v + 1]
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.col_indices[self.arc_range(v)]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn is_loop(&self, e: usize) -> bool {
        let (u, v) = self.edges[e];
        u == v
    }

    pub fn arc_edge(&self, arc: usize) -> usize {
        self.arc_edge[arc]
    }

    pub fn arc_edges(&self) -> &[usize] {
        &self.arc_edge
    }

    /// Row (aggregating) node of an arc.
    pub fn arc_source(&self, arc: usize) -> usize {
        self.row_offsets.partition_point(|&off| off <= arc) - 1
    }

    /// Index of arc `(u, v)`, if present.
    pub fn arc_lookup(&self, u: usize, v: usize) -> Option<usize> {
        let start = self.row_offsets[u];
        self.neighbors(u).binary_search(&v).ok().map(|i| start + i)
    }

    /// Ids of the edges that samplers draw from (everything but self-loops).
    pub fn sampleable_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(move |&e| !self.is_loop(e))
    }

    pub fn num_isolated(&self) -> usize {
        self.degrees.iter().filter(|&&d| d == 0).count()
    }
}

/// Sampled node set with its local CSR adjacency.
///
/// Local ids index into `nodes`, which is sorted; `arc_origin` points every
/// local arc back at the parent graph's arc, so parent-side values such as
/// `norm_values` and normalization coefficients are read through it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    nodes: Vec<usize>,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    arc_origin: Vec<usize>,
    multiplicity: Vec<u32>,
}

impl Subgraph {
    pub fn from_parts(
        nodes: Vec<usize>,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        arc_origin: Vec<usize>,
        multiplicity: Vec<u32>,
    ) -> Result<Self> {
        let n = nodes.len();
        let ok = row_offsets.len() == n + 1
            && multiplicity.len() == n
            && row_offsets.first() == Some(&0)
            && row_offsets.last() == Some(&col_indices.len())
            && arc_origin.len() == col_indices.len()
            && row_offsets.windows(2).all(|w| w[0] <= w[1])
            && nodes.windows(2).all(|w| w[0] < w[1])
            && col_indices.iter().all(|&c| c < n);
        if !ok {
            return Err(Error::Inconsistent("subgraph arrays disagree".into()));
        }
        Ok(Subgraph {
            nodes,
            row_offsets,
            col_indices,
            arc_origin,
            multiplicity,
        })
    }

    /// Subgraph with no nodes; the independent edge sampler can select
    /// nothing.
    pub fn empty() -> Self {
        Subgraph {
            nodes: Vec::new(),
            row_offsets: vec![0],
            col_indices: Vec::new(),
            arc_origin: Vec::new(),
            multiplicity: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.col_indices.len()
    }

    /// Original ids, sorted and unique.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn arc_origin(&self) -> &[usize] {
        &self.arc_origin
    }

    /// How often the sampler emitted each node before deduplication.
    pub fn multiplicity(&self) -> &[u32] {
        &self.multiplicity
    }

    pub fn local_index(&self, global: usize) -> Option<usize> {
        self.nodes.binary_search(&global).ok()
    }

    pub fn arc_range(&self, local: usize) -> std::ops::Range<usize> {
        self.row_offsets[local]..self.row_offsets[local + 1]
    }

    /// Parent edge ids present in the subgraph, each reported once.
    pub fn edge_ids<'a, F: Scalar>(&'a self, g: &'a Graph<F>) -> impl Iterator<Item = usize> + 'a {
        (0..self.nodes.len()).flat_map(move |i| {
            self.arc_range(i)
                .filter(move |&a| self.col_indices[a] >= i)
                .map(move |a| g.arc_edge(self.arc_origin[a]))
        })
    }

    pub fn num_edges<F: Scalar>(&self, g: &Graph<F>) -> usize {
        self.edge_ids(g).count()
    }
}

fn dedup_with_counts(node_ids: &[usize]) -> (Vec<usize>, Vec<u32>) {
    let mut sorted = node_ids.to_vec();
    sorted.sort_unstable();
    let mut nodes = Vec::with_capacity(sorted.len());
    let mut counts: Vec<u32> = Vec::with_capacity(sorted.len());
    for v in sorted {
        if nodes.last() == Some(&v) {
            *counts.last_mut().unwrap() += 1;
        } else {
            nodes.push(v);
            counts.push(1);
        }
    }
    (nodes, counts)
}

fn check_ids<F: Scalar>(g: &Graph<F>, ids: &[usize]) -> Result<()> {
    if ids.is_empty() {
        return Err(Error::EmptyNodeSet);
    }
    match ids.iter().find(|&&v| v >= g.num_nodes()) {
        Some(&id) => Err(Error::NodeOutOfRange {
            id,
            num_nodes: g.num_nodes(),
        }),
        None => Ok(()),
    }
}

/// Subgraph induced by a node multiset: every parent arc with both endpoints
/// in the set.
pub fn induced_subgraph<F: Scalar>(g: &Graph<F>, node_ids: &[usize]) -> Result<Subgraph> {
    check_ids(g, node_ids)?;
    let (nodes, multiplicity) = dedup_with_counts(node_ids);
    let mut row_offsets = Vec::with_capacity(nodes.len() + 1);
    let mut col_indices = Vec::new();
    let mut arc_origin = Vec::new();
    row_offsets.push(0);
    for &v in &nodes {
        // Neighbor lists and `nodes` are both sorted: merge them.
        let range = g.arc_range(v);
        let mut j = 0;
        for arc in range {
            let u = g.col_indices()[arc];
            while j < nodes.len() && nodes[j] < u {
                j += 1;
            }
            if j == nodes.len() {
                break;
            }
            if nodes[j] == u {
                col_indices.push(j);
                arc_origin.push(arc);
            }
        }
        row_offsets.push(col_indices.len());
    }
    Ok(Subgraph {
        nodes,
        row_offsets,
        col_indices,
        arc_origin,
        multiplicity,
    })
}

/// Subgraph made of exactly the given edges, their endpoints, and the
/// self-loops of those endpoints. No induction is performed.
///
/// Multiplicity counts how many selected edges touch each node.
pub fn edge_subgraph<F: Scalar>(g: &Graph<F>, edge_ids: &[usize]) -> Result<Subgraph> {
    let endpoints: Vec<usize> = edge_ids
        .iter()
        .flat_map(|&e| {
            let (u, v) = g.edge(e);
            if u == v { vec![u] } else { vec![u, v] }
        })
        .collect();
    if endpoints.is_empty() {
        return Err(Error::EmptyNodeSet);
    }
    let (nodes, multiplicity) = dedup_with_counts(&endpoints);
    let local = |v: usize| nodes.binary_search(&v).expect("endpoint is a node");

    let mut arcs: Vec<(usize, usize, usize)> = Vec::with_capacity(2 * edge_ids.len());
    let mut seen = vec![false; g.num_edges()];
    for &e in edge_ids {
        if std::mem::replace(&mut seen[e], true) {
            continue;
        }
        let (u, v) = g.edge(e);
        if u == v {
            continue;
        }
        arcs.push((local(u), local(v), g.arc_lookup(u, v).expect("edge arc")));
        arcs.push((local(v), local(u), g.arc_lookup(v, u).expect("edge arc")));
    }
    if g.has_self_loops() {
        for (i, &v) in nodes.iter().enumerate() {
            if let Some(arc) = g.arc_lookup(v, v) {
                arcs.push((i, i, arc));
            }
        }
    }
    arcs.sort_unstable();

    let mut row_offsets = vec![0usize; nodes.len() + 1];
    for &(i, _, _) in &arcs {
        row_offsets[i + 1] += 1;
    }
    for i in 0..nodes.len() {
        row_offsets[i + 1] += row_offsets[i];
    }
    Ok(Subgraph {
        nodes,
        row_offsets,
        col_indices: arcs.iter().map(|&(_, j, _)| j).collect(),
        arc_origin: arcs.iter().map(|&(_, _, a)| a).collect(),
        multiplicity,
    })
}

/// The whole graph viewed as a subgraph of itself.
pub fn full_subgraph<F: Scalar>(g: &Graph<F>) -> Subgraph {
    Subgraph {
        nodes: (0..g.num_nodes()).collect(),
        row_offsets: g.row_offsets().to_vec(),
        col_indices: g.col_indices().to_vec(),
        arc_origin: (0..g.num_arcs()).collect(),
        multiplicity: vec![1; g.num_nodes()],
    }
}
