//! Graph-sampling minibatch training for graph convolutional networks.
//!
//! Each minibatch is a subgraph drawn from the training graph by a node,
//! edge, random-walk or frontier sampler. A full GCN runs on the subgraph,
//! with aggregation and loss normalization coefficients that make the
//! minibatch estimates unbiased. Everything numeric is generic over
//! [`Scalar`] (`f32` or `f64`); the aliases below fix the precision.

pub mod data;
pub mod error;
pub mod gcn;
pub mod graph;
pub mod io;
pub mod norm;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod variance;

pub use data::{Dataset, LabelMode, Labels, Split};
pub use error::{Error, ErrorClass, Result};
pub use gcn::{Head, Model, TrainConfig};
pub use graph::{build_graph, edge_subgraph, full_subgraph, induced_subgraph, Graph, Subgraph};
pub use norm::NormCoeffs;
pub use sampler::{Sampler, SamplerConfig, SamplerKind};
pub use scalar::Scalar;

pub type Graph64 = Graph<f64>;
pub type Graph32 = Graph<f32>;
pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type Model64 = Model<f64>;
pub type Model32 = Model<f32>;
pub type NormCoeffs64 = NormCoeffs<f64>;
pub type NormCoeffs32 = NormCoeffs<f32>;
