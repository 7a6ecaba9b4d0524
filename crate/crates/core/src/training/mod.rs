//! Loss, gradients, Adam, the epoch loop and checkpoints.

mod checkpoint;
mod fit;
mod grad;
mod gradcheck;
mod optim;
mod report;
mod samples;

pub use checkpoint::{
    Checkpoint, Partition, Provenance, TensorEntry, TransferableSet, CENTERS_NAME, FORMAT_VERSION,
    MANIFEST_FILE,
};
pub(crate) use fit::{bind_config, fit, prepare};
pub use fit::{pretrain, train_from_scratch, TrainConfig};
pub use grad::{batch_loss, compute_gradients, prediction_loss, Gradients, Regularizer};
pub use gradcheck::{
    gradcheck, gradcheck_random, relative_error, CheckedEntry, GradcheckReport, RELATIVE_FLOOR,
};
pub use optim::{adam_step, OptimizerState};
pub use report::{EpochRecord, TrainReport};
pub use samples::{Batch, Samples};
