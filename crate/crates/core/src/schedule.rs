//! Learning-rate schedule: an exponential staircase for the top-topic variant,
//! a constant rate for everything else.

use crate::config::Variant;
use crate::numeric::{floor, powf};

/// `decay_steps` is the nominal number of steps per epoch,
/// `floor(num_train_docs / batch_size)`, so the rate holds for an epoch and
/// decays when one completes.
pub fn learning_rate(
    init_rate: f64,
    decay_rate: f64,
    variant: Variant,
    train_step: u64,
    decay_steps: u64,
) -> f64 {
    match variant {
        Variant::TTan => {
            let steps = decay_steps.max(1);
            init_rate * powf(decay_rate, floor(train_step as f64 / steps as f64))
        }
        _ => init_rate,
    }
}
