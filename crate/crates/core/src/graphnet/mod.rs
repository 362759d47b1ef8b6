//! Message-passing network over formula graphs: graph encoding, forward
//! pass with mean or gated-attention aggregation, cross-entropy loss,
//! reverse-mode gradients, Adam training, and checkpoint I/O.

mod checkpoint;
mod graph;
mod model;
mod params;
mod tape;
mod train;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CheckpointError,
};
pub use graph::{build_graph, FormulaGraph};
pub use model::{loss, predict, Prediction};
pub use params::{Affine, Aggregation, Mlp, ModelParams};
pub use train::{
    batch_gradients, final_policy_error, final_sat_correct, train, MetricPoint, TrainConfig,
};
