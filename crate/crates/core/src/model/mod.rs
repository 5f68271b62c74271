//! Model: parameters, normalization, forward/backward passes.

pub mod backward;
pub mod forward;
pub mod norm;
pub mod ops;
pub mod params;

use crate::batch::Batch;
use crate::config::ModelConfig;
use crate::error::CoreError;
use crate::rng::Rng;

pub use backward::backward;
pub use forward::{forward, ForwardTrace, Losses, Mode};
pub use params::{Grads, ModelParams};

/// One training step: train-mode forward plus full backward.
///
/// Parameters are not touched; the caller applies the optimizer update and
/// folds the trace's batch statistics into the normalization running moments.
pub fn train_step(
    batch: &Batch,
    params: &ModelParams,
    cfg: &ModelConfig,
    rng: &mut Rng,
    threads: usize,
) -> Result<(ForwardTrace, Grads), CoreError> {
    let trace = forward(batch, params, cfg, Mode::Train(rng), threads)?;
    let grads = backward(batch, params, cfg, &trace, threads);
    Ok((trace, grads))
}
