//! Graph convolutional network: model, propagation, loss, optimizer and
//! the training loop.

pub mod adam;
pub mod forward;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod sparse;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use forward::{backward, forward_full, forward_subgraph, full_activations, Batch, Dropout, ForwardCache};
pub use loss::{loss_and_grad, node_losses, Reduction};
pub use metrics::{confusion, f1_micro, ConfusionCounts};
pub use model::{Head, Model};
pub use sparse::SparseAdj;
pub use train::{evaluate, majority_baseline, train, CoeffMode, LogEntry, TrainConfig, TrainOutcome, TrainState, Trainer};
