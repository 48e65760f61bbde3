//! The transformer detector: network definition, labels and decision rule,
//! training, and weight files.

mod detector;
mod io;
mod label;
mod network;
mod params;
mod train;

pub use detector::TransDetector;
pub use io::{load_params, read_params, save_params, write_params, WEIGHTS_MAGIC, WEIGHTS_VERSION};
pub use label::{decide, decode, one_hot};
pub use network::{backward, forward, loss, loss_and_grad, ForwardCache, NetOptions};
pub use params::{init_params, tensor_layout, HeadParams, NetDims, NetworkParams};
pub use train::{initial_params, make_batch, train, Batch, TrainConfig, TrainOutcome};
