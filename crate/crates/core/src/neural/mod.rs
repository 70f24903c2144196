//! Neural building blocks for the pairwise coreference classifiers: a small
//! matrix type, dense and LSTM layers with exact backpropagation, the two-kind
//! pairwise model, and a deterministic SGD trainer with gradient checking.

pub mod layers;
pub mod math;
pub mod model;
pub mod train;

pub use layers::{DenseLayer, LstmCell, LstmGate, OutputHead};
pub use math::{cosine, euclidean, pair_similarity, sigmoid, Matrix};
pub use model::{
    head_feature_names, ModelKind, PairFeatures, PairInstance, PairwiseModel, CONTEXT_WINDOW,
    DEFAULT_CONTEXT_HIDDEN, DEFAULT_WORD_HIDDEN,
};
pub use train::{accuracy, gradient_check, mean_loss, train, EpochStats, TrainConfig, TrainOutcome};
