//! Subgraph samplers.
//!
//! Each sampler emits a node multiset which is then turned into a node-induced
//! [`Subgraph`]. The edge samplers can optionally skip induction, which makes
//! their output match the closed-form inclusion probabilities used by
//! [`crate::norm::analytic_coeffs_edge`].

mod draw;
pub mod pool;
mod weights;

use rand::Rng;

pub use draw::{
    sample_edge_approx, sample_edge_independent, sample_mrw, sample_node, sample_rw,
};
pub use weights::{edge_weights, node_weights, Cumulative, EdgeWeights, NodeWeights};

use crate::error::{Error, Result};
use crate::graph::{full_subgraph, Graph, Subgraph};
use crate::rng::stream_rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    /// `n` nodes drawn with replacement from [`NodeWeights`].
    Node { n: usize },
    /// `m` edges drawn with replacement from [`EdgeWeights`].
    Edge { m: usize },
    /// Every edge kept independently with probability `min(1, m·w_e/Σw)`.
    EdgeIndependent { m: usize },
    /// `r` uniform roots, each walking `h` hops.
    RandomWalk { r: usize, h: usize },
    /// Degree-weighted frontier of `r` walkers grown to `n` nodes.
    MultiWalk { n: usize, r: usize },
    /// The whole graph every time.
    Full,
}

impl SamplerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::Node { .. } => "node",
            SamplerKind::Edge { .. } => "edge",
            SamplerKind::EdgeIndependent { .. } => "edge-indep",
            SamplerKind::RandomWalk { .. } => "rw",
            SamplerKind::MultiWalk { .. } => "mrw",
            SamplerKind::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub seed: u64,
    /// Induce the subgraph from the sampled nodes. Only the edge samplers
    /// may turn this off.
    pub induce: bool,
}

impl SamplerConfig {
    pub fn new(kind: SamplerKind, seed: u64) -> Self {
        SamplerConfig {
            kind,
            seed,
            induce: true,
        }
    }

    pub fn without_induction(mut self) -> Self {
        self.induce = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        match self.kind {
            SamplerKind::Node { n: 0 } => return bad("node budget n must be positive"),
            SamplerKind::Edge { m: 0 } | SamplerKind::EdgeIndependent { m: 0 } => {
                return bad("edge budget m must be positive")
            }
            SamplerKind::RandomWalk { r, h } if r == 0 || h == 0 => {
                return bad("random walk needs r >= 1 roots and h >= 1 hops")
            }
            SamplerKind::MultiWalk { n, r } if r == 0 || r >= n => {
                return bad("multi-dimensional walk needs 1 <= r < n")
            }
            _ => {}
        }
        let edge_based = matches!(
            self.kind,
            SamplerKind::Edge { .. } | SamplerKind::EdgeIndependent { .. }
        );
        if !self.induce && !edge_based {
            return bad("only edge samplers can skip induction");
        }
        Ok(())
    }
}

/// One sampler draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub subgraph: Subgraph,
    /// Per graph edge id, whether the independent edge sampler selected it.
    pub edge_mask: Option<Vec<bool>>,
    /// Walkers that stopped early on an isolated node (RW and MRW).
    pub early_stops: usize,
}

impl Sample {
    fn plain(subgraph: Subgraph) -> Self {
        Sample {
            subgraph,
            edge_mask: None,
            early_stops: 0,
        }
    }
}

#[derive(Debug, Clone)]
enum Tables<F> {
    None,
    Nodes(NodeWeights<F>),
    Edges(EdgeWeights<F>),
    Independent(EdgeWeights<F>, Vec<F>),
}

/// A configured sampler bound to a graph, with its distributions
/// precomputed. Instance `i` always draws from RNG stream `(seed, i)`.
#[derive(Debug, Clone)]
pub struct Sampler<'g, F> {
    graph: &'g Graph<F>,
    config: SamplerConfig,
    tables: Tables<F>,
}

impl<'g, F: Scalar> Sampler<'g, F> {
    pub fn new(graph: &'g Graph<F>, config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        let tables = match config.kind {
            SamplerKind::Node { .. } => Tables::Nodes(node_weights(graph)?),
            SamplerKind::Edge { .. } => Tables::Edges(edge_weights(graph)?),
            SamplerKind::EdgeIndependent { m } => {
                let w = edge_weights(graph)?;
                let p = w.inclusion_probabilities(m);
                Tables::Independent(w, p)
            }
            _ => Tables::None,
        };
        Ok(Sampler {
            graph,
            config,
            tables,
        })
    }

    pub fn graph(&self) -> &'g Graph<F> {
        self.graph
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn sample(&self, instance: u64) -> Result<Sample> {
        let mut rng = stream_rng(self.config.seed, instance);
        self.sample_with(&mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Sample> {
        let g = self.graph;
        let induce = self.config.induce;
        match (&self.config.kind, &self.tables) {
            (SamplerKind::Node { n }, Tables::Nodes(w)) => draw::node_with(g, w, *n, rng),
            (SamplerKind::Edge { m }, Tables::Edges(w)) => draw::edge_approx_with(g, w, *m, induce, rng),
            (SamplerKind::EdgeIndependent { .. }, Tables::Independent(w, p)) => {
                draw::edge_independent_with(g, w, p, induce, rng)
            }
            (SamplerKind::RandomWalk { r, h }, _) => draw::rw_with(g, *r, *h, rng),
            (SamplerKind::MultiWalk { n, r }, _) => draw::mrw_with(g, *n, *r, rng),
            (SamplerKind::Full, _) => Ok(Sample::plain(full_subgraph(g))),
            _ => unreachable!("tables are built for the configured kind"),
        }
    }
}
