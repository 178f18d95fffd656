//! Progressive feedforward collapse toolkit.
//!
//! Measures how strongly the features of every layer of a network have
//! collapsed toward the neural-collapse geometry (class means forming a
//! simplex equiangular tight frame), predicts those measurements along
//! straight-line feature transport, and provides two testbeds that produce
//! such features: surrogate feature models solved by gradient descent and a
//! small fully-connected residual network trained from scratch.
//!
//! Matrices are `nalgebra::DMatrix<f64>`. Feature matrices are `d × (K·n)`
//! with one column per sample, grouped by class in contiguous blocks.

pub mod error;
pub mod etf;
pub mod features;
pub mod geodesic;
pub mod io;
pub mod metrics;
pub mod rank;
pub mod resnet;
pub mod rng;
pub mod surrogate;

pub use error::{PfcError, Result};
pub use etf::{build_etf, build_etf_seeded, gram_target, EtfFrame};
pub use features::{class_stats, centered_class_mean_matrix, ClassStats, FeatureSet, LayerStack};
pub use metrics::{alignment, effective_depth, pfc1, pfc2, pfc3, pfc_report, PfcReport};
