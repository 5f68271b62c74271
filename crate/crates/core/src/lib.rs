//! Neural topic modeling with topic-guided attention.
//!
//! A document is consumed twice: as a token sequence fed through an LSTM
//! encoder whose hidden states are attended per topic, and as a bag-of-words
//! vector that is both the reconstruction target and the source of the
//! document-topic proportions that aggregate the per-topic context vectors.
//! The aggregated context drives a variational inference head (logistic-normal
//! approximation of a Dirichlet prior) and a single-layer BoW decoder.
//!
//! The crate carries the model math, hand-derived gradients, the Adam training
//! loop, NPMI coherence scoring and a linear classification probe. It is
//! `no_std`-compatible (`alloc` required, `libm` feature for math); the
//! companion `tanntm` crate adds corpus preprocessing, file formats and a CLI.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_op_in_unsafe_fn)]
#![allow(clippy::needless_range_loop)]

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("tanntm-core needs either the `std` or the `libm` feature");

extern crate alloc;

pub mod adam;
pub mod batch;
pub mod config;
pub mod error;
pub mod mat;
pub mod model;
pub mod npmi;
pub mod numeric;
pub mod prior;
pub mod probe;
pub mod rng;
pub mod schedule;
pub mod topwords;
pub mod train;

pub use batch::{bow_counts, bow_vectorize, pad_or_truncate, Batch, EncodedDoc};
pub use config::{ModelConfig, Variant};
pub use error::CoreError;
pub use mat::Mat;
pub use model::forward::{forward, ForwardTrace, Losses, Mode};
pub use model::params::{Grads, ModelParams};
pub use model::train_step;
pub use npmi::{CoherenceConfig, CoherenceReport, WindowSpec};
pub use prior::PriorParams;
pub use rng::Rng;
pub use train::{train, EpochRecord, TrainConfig, TrainError, TrainState};
