//! Epoch loop: seeded shuffling, Adam updates with the per-variant schedule,
//! running-statistic maintenance, per-epoch reporting.

use alloc::vec::Vec;
use core::fmt;
use core::ops::ControlFlow;

use crate::adam::Adam;
use crate::batch::{Batch, EncodedDoc};
use crate::config::ModelConfig;
use crate::error::CoreError;
use crate::model::norm::BN_DECAY;
use crate::model::params::ModelParams;
use crate::model::train_step;
use crate::rng::Rng;
use crate::schedule::learning_rate;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub init_rate: f64,
    /// Per-epoch decay factor; only the top-topic variant uses it.
    pub decay_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Worker threads for the per-document stages (1 = sequential).
    pub threads: usize,
    /// Epochs between checkpoint callbacks; 0 means only the final epoch.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 100,
            epochs: 200,
            init_rate: 0.002,
            decay_rate: 0.96,
            adam_beta1: 0.99,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            threads: 1,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.batch_size == 0 {
            return Err(CoreError::InvalidConfig("batch_size must be positive"));
        }
        if self.epochs == 0 {
            return Err(CoreError::InvalidConfig("epochs must be at least 1"));
        }
        if self.init_rate.is_nan()
            || self.init_rate <= 0.0
            || self.decay_rate.is_nan()
            || self.decay_rate <= 0.0
        {
            return Err(CoreError::InvalidConfig("rates must be positive"));
        }
        Ok(())
    }
}

/// Monotone counters of training progress.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrainState {
    pub epoch: usize,
    pub step: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Global step count after the epoch.
    pub step: u64,
    pub lr: f64,
    pub recon: f64,
    pub kl: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    Core(CoreError),
    /// The loss left the reals; parameters keep their last good values.
    NonFiniteLoss { epoch: usize, step: u64 },
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::Core(e) => write!(f, "{e}"),
            TrainError::NonFiniteLoss { epoch, step } => {
                write!(f, "non-finite loss at epoch {epoch}, step {step}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TrainError {}

impl From<CoreError> for TrainError {
    fn from(e: CoreError) -> Self {
        TrainError::Core(e)
    }
}

/// Everything a checkpoint writer needs at an epoch boundary.
pub struct TrainSnapshot<'a> {
    pub record: &'a EpochRecord,
    pub params: &'a ModelParams,
    pub optimizer: &'a Adam,
    pub rng_state: [u64; 4],
    pub state: TrainState,
    /// True on the epochs selected by `checkpoint_every` (and on the last).
    pub checkpoint_due: bool,
}

pub struct Trainer {
    pub model_cfg: ModelConfig,
    pub cfg: TrainConfig,
    optimizer: Adam,
    rng: Rng,
    state: TrainState,
}

impl Trainer {
    pub fn new(model_cfg: ModelConfig, cfg: TrainConfig, params: &ModelParams) -> Self {
        let sizes: Vec<usize> = params.trainable().iter().map(|(_, _, _, d)| d.len()).collect();
        let optimizer = Adam::new(&sizes, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
        let rng = Rng::seed_from_u64(cfg.seed);
        Self {
            model_cfg,
            cfg,
            optimizer,
            rng,
            state: TrainState::default(),
        }
    }

    /// Rebuilds a trainer mid-run from checkpointed optimizer, RNG and
    /// counters.
    pub fn resume(
        model_cfg: ModelConfig,
        cfg: TrainConfig,
        optimizer: Adam,
        rng_state: [u64; 4],
        state: TrainState,
    ) -> Self {
        Self {
            model_cfg,
            cfg,
            optimizer,
            rng: Rng::from_state(rng_state),
            state,
        }
    }

    pub fn state(&self) -> TrainState {
        self.state
    }

    pub fn optimizer(&self) -> &Adam {
        &self.optimizer
    }

    pub fn rng_state(&self) -> [u64; 4] {
        self.rng.state()
    }

    /// Runs up to `cfg.epochs` (continuing from a resumed state), invoking
    /// `on_epoch` after each epoch. The callback may stop training early by
    /// returning `ControlFlow::Break`.
    pub fn run(
        &mut self,
        docs: &[EncodedDoc],
        max_seq_len: usize,
        params: &mut ModelParams,
        mut on_epoch: impl FnMut(&TrainSnapshot<'_>) -> ControlFlow<()>,
    ) -> Result<Vec<EpochRecord>, TrainError> {
        self.cfg.validate()?;
        self.model_cfg.validate()?;
        assert!(
            docs.iter().all(|d| !d.is_empty()),
            "empty documents must be filtered before training"
        );
        let n = docs.len();
        assert!(n > 0, "empty corpus");
        let decay_steps = (n / self.cfg.batch_size).max(1) as u64;
        let mut records = Vec::new();

        while self.state.epoch < self.cfg.epochs {
            let epoch = self.state.epoch;
            // The rate holds for the whole epoch; the staircase advances at
            // epoch boundaries (canonical step count, partial batches kept).
            let lr = learning_rate(
                self.cfg.init_rate,
                self.cfg.decay_rate,
                self.model_cfg.variant,
                epoch as u64 * decay_steps,
                decay_steps,
            );

            let mut order: Vec<usize> = (0..n).collect();
            self.rng.shuffle(&mut order);

            let mut loss_sum = 0.0;
            let mut recon_sum = 0.0;
            let mut kl_sum = 0.0;
            for chunk in order.chunks(self.cfg.batch_size) {
                let refs: Vec<&EncodedDoc> = chunk.iter().map(|&i| &docs[i]).collect();
                let batch = Batch::from_docs(&refs, max_seq_len);
                let (trace, grads) = train_step(
                    &batch,
                    params,
                    &self.model_cfg,
                    &mut self.rng,
                    self.cfg.threads,
                )
                .map_err(|e| match e {
                    CoreError::NonFinite(_) => TrainError::NonFiniteLoss {
                        epoch,
                        step: self.state.step,
                    },
                    other => TrainError::Core(other),
                })?;

                let grad_views: Vec<&[f64]> =
                    grads.trainable().into_iter().map(|(_, g)| g).collect();
                let mut param_views = params.trainable_mut();
                let mut slices: Vec<&mut [f64]> =
                    param_views.iter_mut().map(|(_, s)| &mut **s).collect();
                self.optimizer.step(lr, &mut slices, &grad_views);
                drop(param_views);

                if let Some(stats) = trace.batch_stats() {
                    params.bn_mu.update_running(stats[0].0, stats[0].1, BN_DECAY);
                    params
                        .bn_logvar
                        .update_running(stats[1].0, stats[1].1, BN_DECAY);
                    params.bn_dec.update_running(stats[2].0, stats[2].1, BN_DECAY);
                }

                for d in 0..batch.size() {
                    recon_sum += trace.losses.recon[d];
                    kl_sum += trace.losses.kl[d];
                }
                loss_sum += trace.losses.total * batch.size() as f64;
                self.state.step += 1;
            }

            self.state.epoch += 1;
            let record = EpochRecord {
                epoch,
                step: self.state.step,
                lr,
                recon: recon_sum / n as f64,
                kl: kl_sum / n as f64,
                total: loss_sum / n as f64,
            };
            records.push(record);

            let checkpoint_due = self.state.epoch == self.cfg.epochs
                || (self.cfg.checkpoint_every > 0
                    && self.state.epoch.is_multiple_of(self.cfg.checkpoint_every));
            let snapshot = TrainSnapshot {
                record: records.last().expect("just pushed"),
                params,
                optimizer: &self.optimizer,
                rng_state: self.rng.state(),
                state: self.state,
                checkpoint_due,
            };
            if on_epoch(&snapshot).is_break() {
                break;
            }
        }
        Ok(records)
    }
}

/// Convenience wrapper: fresh trainer, run to completion.
pub fn train(
    docs: &[EncodedDoc],
    max_seq_len: usize,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    params: &mut ModelParams,
    on_epoch: impl FnMut(&TrainSnapshot<'_>) -> ControlFlow<()>,
) -> Result<Vec<EpochRecord>, TrainError> {
    let mut trainer = Trainer::new(model_cfg.clone(), cfg.clone(), params);
    trainer.run(docs, max_seq_len, params, on_epoch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_train_config_matches_published_setup() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.batch_size, 100);
        assert_eq!(cfg.epochs, 200);
        assert_eq!(cfg.init_rate, 0.002);
        assert_eq!(cfg.decay_rate, 0.96);
        assert_eq!(cfg.adam_beta1, 0.99);
        assert_eq!(cfg.adam_beta2, 0.999);
        assert_eq!(cfg.adam_eps, 1e-8);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn rejects_zero_epochs_and_batches() {
        let no_epochs = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(no_epochs.validate().is_err());
        let no_batch = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(no_batch.validate().is_err());
    }
}
