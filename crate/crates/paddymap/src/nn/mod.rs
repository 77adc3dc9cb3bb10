//! From-scratch tensor ops, the DNN and U-Net architectures, training and
//! checkpointing.

pub mod checkpoint;
pub mod model;
pub mod ops;
pub mod tensor;
pub mod train;

pub use model::{AdamState, Arch, Cache, ModelSpec, Network};
pub use tensor::Tensor;
pub use train::{
    augment, evaluate, f1_score, metrics, train, EpochMetrics, MetricAccumulator, MetricSet,
    TrainConfig,
};
