//! Loss, optimizer, training loop, evaluation and checkpoints. Encoders stay frozen;
//! only decoder parameters are updated.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod history;
pub mod inference;
pub mod loss;
pub mod model;
pub mod trainer;

pub use adam::Adam;
pub use checkpoint::{checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint};
pub use config::{
    IiBackend, InputMode, LossConfig, ModelSpec, SigmaScope, TrainConfig, EXPERIMENT_PRESETS, PAPER_EXPERIMENTS,
};
pub use history::{EpochRecord, TrainHistory, HISTORY_HEADER};
pub use inference::{evaluate, generate, DecoderMetrics, EvalMetrics, Generation};
pub use loss::{loss, loss_graph, LossTerms, LossVars};
pub use model::{build_banks, Codes, DecoderSlot, ModelState};
pub use trainer::{run_epochs, train};
