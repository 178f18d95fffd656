//! Toy fully-connected residual network trained from scratch, with the
//! features of every block recorded for collapse measurements.

pub mod data;
pub mod idx;
pub mod net;
pub mod train;

pub use data::{gen_gaussian_mixture, GaussianMixture, MixtureSample};
pub use idx::{load_mnist_idx, parse_idx_images, parse_idx_labels};
pub use net::{resnet_backward, resnet_forward, BlockForm, Params};
pub use train::{train, EpochRecord, Snapshot, TrainConfig, TrainTrace};
