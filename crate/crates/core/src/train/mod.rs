//! Training of small fully connected networks and the tasks used to build them.

mod dataset;
mod idx;
mod mackey_glass;
mod mlp;

pub use dataset::{argmax, one_hot, Dataset, Split};
pub use idx::{
    dataset_from_bytes, digits, encode_images, encode_labels, load_idx, parse_images, parse_labels, DIGITS_TEST_SIZE,
};
pub use mackey_glass::{mackey_glass, windowize, MackeyGlassParams, MackeyGlassSeries};
pub use mlp::{
    batch_gradients, error_rate, evaluate, init_network, mean_loss, nrmse, train, write_training_log, EpochRecord,
    Evaluation, Gradients, LossKind, TrainConfig, TrainOutcome,
};
