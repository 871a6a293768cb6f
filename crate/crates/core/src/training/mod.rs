//! Joint optimization of translation and reconstruction, checkpoints and
//! checkpoint averaging.

mod checkpoint;
mod optim;
mod trainer;

pub use checkpoint::{average_checkpoints, load_checkpoint, save_checkpoint, Checkpoint, Provenance};
pub use optim::{adam_step, lr_at, AdamConfig, AdamState};
pub use trainer::{
    loss_curve_csv, train, train_step, train_with, write_loss_curve, LossRecord, Objective, TrainConfig,
    TrainOutcome, TrainState,
};
