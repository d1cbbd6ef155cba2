//! Dataset files, binary artifacts and synthetic data.

pub mod binary;
pub mod synth;
pub mod text;

pub use binary::{
    graph_hash, load_checkpoint, load_coeffs, load_subgraphs, save_checkpoint, save_coeffs, save_subgraphs,
    CoeffCacheInfo,
};
pub use synth::{er_edges, generate_er, generate_regular, generate_sbm, random_dataset, regular_edges, SbmSpec};
pub use text::{load_dataset, save_dataset};
