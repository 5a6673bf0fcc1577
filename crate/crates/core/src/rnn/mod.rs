//! LSTM sequence classifier: vocabulary, model, training and checkpoints.

mod adam;
mod checkpoint;
mod model;
mod train;
mod vocab;

pub use adam::Adam;
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, MAGIC, VERSION};
pub use model::{Dims, GradientMatrix, LstmModel, Network, ParamGrads, Trace};
pub use train::{
    accuracy, encode_split, predict_proba, train, train_classifier, EpochMetrics, Example,
    TrainConfig, TrainOutcome,
};
pub use vocab::{build_vocab, Vocab, PAD, PAD_ID, UNK, UNK_ID};
