//! Unsupervised neural allocator.
//!
//! Channel features are flattened, standardized and optionally reduced by
//! PCA; a fully connected network with batch normalization maps them to
//! phases and a relaxed allocation, trained by Adam on the negative mean
//! sum utility.

pub mod adam;
pub mod checkpoint;
pub mod features;
pub mod loss;
pub mod mlp;
pub mod pca;
pub mod train;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, TrainingMetadata};
pub use features::{feature_dim, flatten_features};
pub use loss::{nn_loss, LossOutput};
pub use mlp::{parameter_count, ForwardOutput, MlpArch, MlpModel, ParamSet, Tensor};
pub use pca::{pca_fit, FeatureMap, PcaModel, Standardizer};
pub use train::{
    history_csv, infer, infer_batch, train, EpochRecord, PlateauEvent, PlateauScheduler,
    TrainOptions, TrainOutcome, TrainSample, HISTORY_HEADER,
};
