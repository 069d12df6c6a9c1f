//! From-scratch CNN-3 authenticator.

pub mod checkpoint;
pub mod data;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use data::Examples;
pub use gradcheck::{gradient_check, GradCheckReport};
pub use metrics::{evaluate, Metrics};
pub use model::{Cnn3, Cnn3Spec, Tensor, Workspace};
pub use scalar::Scalar;
pub use train::{train, train_with, EpochStats, LrSchedule, TrainConfig, TrainHistory};
